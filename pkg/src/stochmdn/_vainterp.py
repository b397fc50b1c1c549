"""Interpreter for the analog-function subset of Verilog-A that the exporter emits.

Supported: ``analog function real`` definitions with ``input``/``real``/
``integer`` declarations, ``begin``/``end`` blocks, assignments, ``if``/
``else``, bounded ``for`` loops, arithmetic, comparisons, ``&&``/``||``/``!``
and calls to ``exp``, ``sqrt``, ``abs``, ``min``, ``max`` or other functions in
the same text.  Anything else raises :class:`InterpretError`.

Functions are compiled to Python closures once per text.
"""

from __future__ import annotations

import math
import re

__all__ = ["InterpretError", "compile_functions"]

MAX_LOOP_ITERATIONS = 1_000_000

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|[-+*/()<>=;,!])
    """,
    re.VERBOSE,
)

_BUILTINS = {
    "exp": math.exp,
    "sqrt": math.sqrt,
    "abs": abs,
    "min": min,
    "max": max,
}

_KEYWORDS = {"analog", "function", "real", "integer", "input", "begin", "end", "endfunction",
             "if", "else", "for"}


class InterpretError(ValueError):
    """Text outside the supported subset, or a runtime fault while interpreting it."""


def _tokenize(text: str):
    toks = []
    pos = 0
    line = 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise InterpretError(f"line {line}: unsupported character {text[pos]!r}")
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            toks.append((kind, val, line))
        line += val.count("\n")
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0
        self.functions = {}

    # token helpers
    def peek(self, offset=0):
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else ("eof", "", -1)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, val):
        kind, v, line = self.next()
        if v != val:
            raise InterpretError(f"line {line}: expected {val!r}, found {v!r}")
        return v

    def ident(self):
        kind, v, line = self.next()
        if kind != "id" or v in _KEYWORDS:
            raise InterpretError(f"line {line}: expected identifier, found {v!r}")
        return v

    # top level
    def parse_all(self):
        while self.peek()[0] != "eof":
            self.parse_function()
        return self.functions

    def parse_function(self):
        for kw in ("analog", "function", "real"):
            self.expect(kw)
        name = self.ident()
        self.expect(";")
        inputs, declared = [], set()
        while self.peek()[1] in ("input", "real", "integer"):
            kw = self.next()[1]
            names = [self.ident()]
            while self.peek()[1] == ",":
                self.next()
                names.append(self.ident())
            self.expect(";")
            if kw == "input":
                inputs += names
            else:
                declared.update(names)
        missing = [n for n in inputs if n not in declared]
        if missing:
            raise InterpretError(f"function {name}: inputs {missing} lack a type declaration")
        self.current = (name, declared | {name})
        body = self.parse_stmt()
        self.expect("endfunction")
        self.functions[name] = (inputs, body)

    # statements
    def parse_stmt(self):
        kind, v, line = self.peek()
        if v == "begin":
            self.next()
            stmts = []
            while self.peek()[1] != "end":
                if self.peek()[0] == "eof":
                    raise InterpretError(f"line {line}: unterminated begin block")
                stmts.append(self.parse_stmt())
            self.next()

            def block(env):
                for s in stmts:
                    s(env)
            return block
        if v == "if":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_stmt()
            other = None
            if self.peek()[1] == "else":
                self.next()
                other = self.parse_stmt()

            def if_stmt(env):
                if cond(env):
                    then(env)
                elif other is not None:
                    other(env)
            return if_stmt
        if v == "for":
            self.next()
            self.expect("(")
            init = self.parse_assign()
            self.expect(";")
            cond = self.parse_expr()
            self.expect(";")
            step = self.parse_assign()
            self.expect(")")
            body = self.parse_stmt()

            def for_stmt(env):
                init(env)
                n = 0
                while cond(env):
                    body(env)
                    step(env)
                    n += 1
                    if n > MAX_LOOP_ITERATIONS:
                        raise InterpretError("loop iteration limit exceeded")
            return for_stmt
        stmt = self.parse_assign()
        self.expect(";")
        return stmt

    def parse_assign(self):
        line = self.peek()[2]
        name = self.ident()
        if name not in self.current[1]:
            raise InterpretError(f"line {line}: assignment to undeclared variable {name!r}")
        self.expect("=")
        expr = self.parse_expr()

        def assign(env):
            env[name] = expr(env)
        return assign

    # expressions, lowest precedence first
    def parse_expr(self):
        return self.parse_or()

    def _binary(self, sub, ops):
        left = sub()
        while self.peek()[1] in ops:
            op = self.next()[1]
            right = sub()
            left = ops[op](left, right)
        return left

    def parse_or(self):
        return self._binary(self.parse_and, {"||": lambda a, b: lambda e: bool(a(e)) or bool(b(e))})

    def parse_and(self):
        return self._binary(self.parse_cmp, {"&&": lambda a, b: lambda e: bool(a(e)) and bool(b(e))})

    def parse_cmp(self):
        ops = {
            "<": lambda a, b: lambda e: a(e) < b(e),
            "<=": lambda a, b: lambda e: a(e) <= b(e),
            ">": lambda a, b: lambda e: a(e) > b(e),
            ">=": lambda a, b: lambda e: a(e) >= b(e),
            "==": lambda a, b: lambda e: a(e) == b(e),
            "!=": lambda a, b: lambda e: a(e) != b(e),
        }
        return self._binary(self.parse_add, ops)

    def parse_add(self):
        ops = {"+": lambda a, b: lambda e: a(e) + b(e), "-": lambda a, b: lambda e: a(e) - b(e)}
        return self._binary(self.parse_mul, ops)

    def parse_mul(self):
        def div(a, b):
            def f(e):
                den = b(e)
                if den == 0:
                    raise InterpretError("division by zero")
                return a(e) / den
            return f
        return self._binary(self.parse_unary, {"*": lambda a, b: lambda e: a(e) * b(e), "/": div})

    def parse_unary(self):
        v = self.peek()[1]
        if v == "-":
            self.next()
            inner = self.parse_unary()
            return lambda e: -inner(e)
        if v == "+":
            self.next()
            return self.parse_unary()
        if v == "!":
            self.next()
            inner = self.parse_unary()
            return lambda e: not inner(e)
        return self.parse_primary()

    def parse_primary(self):
        kind, v, line = self.next()
        if kind == "num":
            val = float(v) if any(c in v for c in ".eE") else int(v)
            return lambda e: val
        if v == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if kind == "id" and v not in _KEYWORDS:
            if self.peek()[1] == "(":
                self.next()
                args = []
                if self.peek()[1] != ")":
                    args.append(self.parse_expr())
                    while self.peek()[1] == ",":
                        self.next()
                        args.append(self.parse_expr())
                self.expect(")")
                return self._call(v, args, line)
            name = v
            if name not in self.current[1]:
                raise InterpretError(f"line {line}: use of undeclared variable {name!r}")

            def load(env):
                try:
                    return env[name]
                except KeyError:
                    raise InterpretError(f"variable {name!r} read before assignment") from None
            return load
        raise InterpretError(f"line {line}: unexpected token {v!r}")

    def _call(self, fname, args, line):
        if fname in _BUILTINS:
            fn = _BUILTINS[fname]

            def builtin(env):
                try:
                    return fn(*(a(env) for a in args))
                except (TypeError, ValueError, OverflowError) as exc:
                    raise InterpretError(f"{fname}: {exc}") from None
            return builtin
        functions = self.functions
        if fname not in functions:
            raise InterpretError(f"line {line}: call to unknown function {fname!r}")

        def user(env):
            return _invoke(functions, fname, [a(env) for a in args])
        return user


def _invoke(functions, name, values):
    inputs, body = functions[name]
    if len(values) != len(inputs):
        raise InterpretError(f"{name} takes {len(inputs)} arguments, got {len(values)}")
    env = dict(zip(inputs, values))
    body(env)
    if name not in env:
        raise InterpretError(f"function {name} never assigned its return value")
    return env[name]


def compile_functions(text: str):
    """Compile every analog function in ``text``; returns ``call(name, *args)``."""
    functions = _Parser(_tokenize(text)).parse_all()

    def call(name, *args):
        if name not in functions:
            raise InterpretError(f"no analog function named {name!r}")
        return _invoke(functions, name, [float(a) for a in args])

    call.functions = tuple(functions)
    return call
