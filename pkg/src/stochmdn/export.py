"""Verilog-A export of a trained I-V model.

The emitted module unrolls the network into scalar assignments, evaluates
the mixture CDF with the same rational erf approximation used natively, and
inverts it with a fixed 60-step bisection.  Quantile hold/regeneration and
the state feedback live in the ``analog`` block.  Every real literal is
printed with ``repr`` so it parses back to the identical double.

:func:`reference_interpret` re-executes the emitted analog functions and is
the oracle for export equivalence.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass

import numpy as np

from . import _erf
from ._vainterp import InterpretError, compile_functions
from .device import VMidRule, model_quantile, v_mid_rule_of
from .network import EPS, HEADS, MdnNetwork
from .sampling import BRACKET_SIGMAS, QuantilePolicy

__all__ = [
    "EquivalenceError",
    "ExportBundle",
    "ExportError",
    "check_equivalence",
    "emit_veriloga",
    "extract_weight_literals",
    "reference_interpret",
    "weight_literal_order",
]

SCHEMA_VERSION = 1
BISECTION_STEPS = 60
MAX_K = 16
MAX_WIDTH = 128
MAX_LAYERS = 8
Q_MODE_CODES = {"fixed": 0, "held_per_sweep": 1, "fresh_per_call": 2}

WEIGHTS_BEGIN = "// mdn:weights begin"
WEIGHTS_END = "// mdn:weights end"
FUNCTIONS_BEGIN = "// mdn:functions begin"
FUNCTIONS_END = "// mdn:functions end"

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_VA_RESERVED = {
    "module", "endmodule", "analog", "begin", "end", "function", "endfunction", "real", "integer",
    "input", "output", "inout", "electrical", "parameter", "if", "else", "for", "while", "case",
    "exp", "sqrt", "abs", "min", "max", "ln", "log", "pow", "initial_step", "final_step",
}
_LITERAL = re.compile(r"\(?-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?\)?")


class ExportError(ValueError):
    """The bundle cannot be exported (invalid name, unsupported shape...)."""


class EquivalenceError(ArithmeticError):
    """Interpreted Verilog-A disagrees with the native model."""


@dataclass(frozen=True)
class ExportBundle:
    """Everything the compact model needs: network, quantile policy and midpoint rule."""

    net: MdnNetwork
    policy: QuantilePolicy = QuantilePolicy()
    v_mid_rule: VMidRule | None = None
    module_name: str = "hcryotron_mdn"
    seed: int = 1
    schema_version: int = SCHEMA_VERSION
    max_K: int = MAX_K
    max_width: int = MAX_WIDTH

    def validate(self):
        if not _IDENT.match(self.module_name) or self.module_name in _VA_RESERVED or keyword.iskeyword(self.module_name):
            raise ExportError(f"module name {self.module_name!r} is not a legal identifier")
        net = self.net
        net.validate()
        if net.input_dim != 3:
            raise ExportError(f"compact model needs the I-V variant (input_dim 3), got {net.input_dim}")
        if net.K > self.max_K:
            raise ExportError(f"K={net.K} exceeds unroll limit {self.max_K}")
        if any(h > self.max_width for h in net.hidden_sizes):
            raise ExportError(f"hidden sizes {list(net.hidden_sizes)} exceed unroll limit {self.max_width}")
        if len(net.hidden_sizes) > MAX_LAYERS:
            raise ExportError(f"{len(net.hidden_sizes)} hidden layers exceed unroll limit {MAX_LAYERS}")

    def rule(self) -> VMidRule:
        return self.v_mid_rule if self.v_mid_rule is not None else v_mid_rule_of(self.net)


def _lit(x) -> str:
    s = repr(float(x))
    if not np.isfinite(float(x)):
        raise ExportError(f"non-finite literal {s}")
    return f"({s})" if s.startswith("-") else s


def _horner(coeffs, var) -> str:
    expr = _lit(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        expr = f"({expr} * {var} + {_lit(c)})"
    return expr


def _affine(bias, weights, inputs) -> str:
    terms = [_lit(bias)] + [f"{_lit(w)} * {x}" for w, x in zip(weights, inputs)]
    return " + ".join(terms)


def weight_literal_order(net: MdnNetwork) -> list:
    """Network parameters in the order they appear in the emitted text."""
    out = []
    for W, b in net.layers:
        for j in range(b.size):
            out.append(float(b[j]))
            out.extend(float(w) for w in W[:, j])
    for name in HEADS:
        W, b = net.heads[name]
        for k in range(net.K):
            out.append(float(b[k]))
            out.extend(float(w) for w in W[:, k])
    return out


def extract_weight_literals(text: str) -> list:
    """All numeric literals between the weight markers, parsed back to floats."""
    try:
        start = text.index(WEIGHTS_BEGIN) + len(WEIGHTS_BEGIN)
        stop = text.index(WEIGHTS_END)
    except ValueError:
        raise ExportError("weight markers not found in text") from None
    body = text[start:stop]
    body = re.sub(r"\b[A-Za-z_][A-Za-z0-9_]*\b", " ", body)
    return [float(tok.strip("()")) for tok in _LITERAL.findall(body)]


def _erf_function() -> list:
    L = []
    L.append("  analog function real mdn_erf;")
    L.append("    input x;")
    L.append("    real x;")
    L.append("    real a, z, s, y;")
    L.append("    begin")
    L.append("      a = abs(x);")
    L.append(f"      if (a < {_lit(_erf.TINY)})")
    L.append(f"        y = a + {_lit(_erf.EFX)} * a;")
    L.append(f"      else if (a < {_lit(_erf.SMALL)}) begin")
    L.append("        z = a * a;")
    L.append(f"        y = a + a * ({_horner(_erf.PP, 'z')} / {_horner(_erf.QQ, 'z')});")
    L.append("      end")
    L.append(f"      else if (a < {_lit(_erf.MID)}) begin")
    L.append("        s = a - 1.0;")
    L.append(f"        y = {_lit(_erf.ERX)} + {_horner(_erf.PA, 's')} / {_horner(_erf.QA, 's')};")
    L.append("      end")
    L.append(f"      else if (a < {_lit(_erf.LARGE)}) begin")
    L.append("        z = a * a;")
    L.append("        s = 1.0 / z;")
    L.append(f"        y = 1.0 - exp(-z - 0.5625 + {_horner(_erf.RA, 's')} / {_horner(_erf.SA, 's')}) / a;")
    L.append("      end")
    L.append(f"      else if (a < {_lit(_erf.SATURATE)}) begin")
    L.append("        z = a * a;")
    L.append("        s = 1.0 / z;")
    L.append(f"        y = 1.0 - exp(-z - 0.5625 + {_horner(_erf.RB, 's')} / {_horner(_erf.SB, 's')}) / a;")
    L.append("      end")
    L.append("      else")
    L.append("        y = 1.0;")
    L.append("      if (x < 0.0)")
    L.append("        y = -y;")
    L.append("      mdn_erf = y;")
    L.append("    end")
    L.append("  endfunction")
    return L


def _relu_function() -> list:
    return [
        "  analog function real mdn_relu;",
        "    input x;",
        "    real x;",
        "    begin",
        "      if (x > 0.0)",
        "        mdn_relu = x;",
        "      else",
        "        mdn_relu = 0.0;",
        "    end",
        "  endfunction",
    ]


def _vmid_function(rule: VMidRule) -> list:
    b, v = rule.bias_uA, rule.v_mid_V
    L = ["  analog function real mdn_vmid;", "    input ib;", "    real ib;", "    begin"]
    L.append(f"      if (ib <= {_lit(b[0])})")
    L.append(f"        mdn_vmid = {_lit(v[0])};")
    for i in range(1, len(b)):
        slope_expr = f"({_lit(v[i])} - {_lit(v[i - 1])}) * (ib - {_lit(b[i - 1])}) / ({_lit(b[i])} - {_lit(b[i - 1])})"
        L.append(f"      else if (ib <= {_lit(b[i])})")
        L.append(f"        mdn_vmid = {_lit(v[i - 1])} + {slope_expr};")
    L.append("      else")
    L.append(f"        mdn_vmid = {_lit(v[-1])};")
    L.append("    end")
    L.append("  endfunction")
    return L


def _quantile_function(net: MdnNetwork) -> list:
    K = net.K
    inputs = [f"x{i}" for i in range(net.input_dim)]
    hidden_names = [[f"h{l}_{j}" for j in range(w)] for l, w in enumerate(net.hidden_sizes)]
    heads = {name: [f"{prefix}{k}" for k in range(K)] for name, prefix in
             (("mu", "mu"), ("sigma", "sg"), ("alpha", "al"))}
    locals_ = inputs + [n for layer in hidden_names for n in layer]
    locals_ += [n for name in HEADS for n in heads[name]]
    locals_ += ["amax", "den", "lo", "hi", "mid", "f"]

    L = ["  analog function real mdn_quantile;"]
    L.append("    input ig, ib, st, q;")
    L.append("    real ig, ib, st, q;")
    for i in range(0, len(locals_), 8):
        L.append("    real " + ", ".join(locals_[i:i + 8]) + ";")
    L.append("    integer it;")
    L.append("    begin")
    # Feature normalization onto [-1, 1].
    for x, raw, lo, hi in zip(inputs, ("ig", "ib", "st"), net.feature_min, net.feature_max):
        if hi > lo:
            L.append(f"      {x} = 2.0 * ({raw} - {_lit(lo)}) / {_lit(hi - lo)} - 1.0;")
        else:
            L.append(f"      {x} = 0.0;")
    L.append(f"      {WEIGHTS_BEGIN}")
    prev = inputs
    for (W, b), names in zip(net.layers, hidden_names):
        for j, name in enumerate(names):
            L.append(f"      {name} = mdn_relu({_affine(b[j], W[:, j], prev)});")
        prev = names
    for head in HEADS:
        W, b = net.heads[head]
        for k, name in enumerate(heads[head]):
            L.append(f"      {name} = {_affine(b[k], W[:, k], prev)};")
    L.append(f"      {WEIGHTS_END}")
    # sigma head: ELU + 1 + eps
    for s in heads["sigma"]:
        L.append(f"      if ({s} >= 0.0)")
        L.append(f"        {s} = {s} + 1.0 + {_lit(EPS)};")
        L.append("      else")
        L.append(f"        {s} = 0.5 * (exp({s}) - 1.0) + 1.0 + {_lit(EPS)};")
    # alpha head: softmax with max shift
    al = heads["alpha"]
    L.append(f"      amax = {al[0]};")
    for a in al[1:]:
        L.append(f"      amax = max(amax, {a});")
    for a in al:
        L.append(f"      {a} = exp({a} - amax);")
    L.append("      den = " + " + ".join(al) + ";")
    for a in al:
        L.append(f"      {a} = {a} / den;")
    mu, sg = heads["mu"], heads["sigma"]
    sig_lit = _lit(BRACKET_SIGMAS)
    L.append(f"      lo = {mu[0]} - {sig_lit} * {sg[0]};")
    L.append(f"      hi = {mu[0]} + {sig_lit} * {sg[0]};")
    for m, s in zip(mu[1:], sg[1:]):
        L.append(f"      lo = min(lo, {m} - {sig_lit} * {s});")
        L.append(f"      hi = max(hi, {m} + {sig_lit} * {s});")
    L.append(f"      for (it = 0; it < {BISECTION_STEPS}; it = it + 1) begin")
    L.append("        mid = 0.5 * (lo + hi);")
    terms = [f"0.5 * {a} * (1.0 + mdn_erf((mid - {m}) / ({s} * {_lit(np.sqrt(2.0))})))"
             for a, m, s in zip(al, mu, sg)]
    L.append("        f = " + " + ".join(terms) + ";")
    L.append("        if (f < q)")
    L.append("          lo = mid;")
    L.append("        else")
    L.append("          hi = mid;")
    L.append("      end")
    L.append(f"      mdn_quantile = {_lit(net.target_offset)} + {_lit(net.target_scale)} * (0.5 * (lo + hi));")
    L.append("    end")
    L.append("  endfunction")
    return L


def emit_veriloga(bundle: ExportBundle) -> str:
    """Verilog-A source for ``bundle``; a pure function of the bundle."""
    bundle.validate()
    net, policy, rule = bundle.net, bundle.policy, bundle.rule()
    q_fixed = policy.fixed_q if policy.fixed_q is not None else 0.5
    L = []
    L.append(f"// {bundle.module_name}: stochastic heater-cryotron compact model")
    L.append("// Mixture density network evaluated per time step; the load voltage is drawn by")
    L.append("// inverse transform sampling of the predicted mixture at quantile q.")
    L.append(f"// schema_version {bundle.schema_version}; K={net.K}; hidden={list(net.hidden_sizes)}")
    L.append("`include \"constants.vams\"")
    L.append("`include \"disciplines.vams\"")
    L.append("")
    L.append(f"module {bundle.module_name}(gate, chp, chn);")
    L.append("  inout gate, chp, chn;")
    L.append("  electrical gate, chp, chn;")
    L.append("")
    L.append(f"  parameter integer seed = {int(bundle.seed)};")
    L.append(f"  parameter integer q_mode = {Q_MODE_CODES[policy.mode]} from [0:2];  // 0 fixed, 1 held per sweep, 2 fresh per step")
    L.append(f"  parameter real clip_low = {_lit(policy.clip_low)} from [0:1];")
    L.append(f"  parameter real clip_high = {_lit(policy.clip_high)} from [0:1];")
    L.append(f"  parameter real q_fixed = {_lit(q_fixed)} from (0:1);")
    L.append("")
    L.append(f"  {FUNCTIONS_BEGIN}")
    L += _relu_function()
    L.append("")
    L += _erf_function()
    L.append("")
    L += _vmid_function(rule)
    L.append("")
    L += _quantile_function(net)
    L.append(f"  {FUNCTIONS_END}")
    L.append("")
    L.append("  real ig, ib, st, q, v_l, vmid, ig_prev, dir, dir_prev;")
    L.append("  integer rng_seed;")
    L.append("")
    L.append("  analog begin")
    L.append("    @(initial_step) begin")
    L.append("      rng_seed = seed;")
    L.append("      st = 0.0;")
    L.append("      ig_prev = 0.0;")
    L.append("      dir_prev = 0.0;")
    L.append("      if (q_mode == 0)")
    L.append("        q = q_fixed;")
    L.append("      else")
    L.append("        q = $rdist_uniform(rng_seed, clip_low, clip_high);")
    L.append("    end")
    L.append("    ig = I(gate) * 1.0e6;")
    L.append("    ib = I(chp, chn) * 1.0e6;")
    L.append("    dir = 0.0;")
    L.append("    if (ig > ig_prev)")
    L.append("      dir = 1.0;")
    L.append("    else if (ig < ig_prev)")
    L.append("      dir = -1.0;")
    L.append("    if (q_mode == 2)")
    L.append("      q = $rdist_uniform(rng_seed, clip_low, clip_high);")
    L.append("    else if (q_mode == 1 && dir != 0.0 && dir_prev != 0.0 && dir != dir_prev)")
    L.append("      q = $rdist_uniform(rng_seed, clip_low, clip_high);")
    L.append("    if (dir != 0.0)")
    L.append("      dir_prev = dir;")
    L.append("    ig_prev = ig;")
    L.append("    v_l = mdn_quantile(ig, ib, st, q);")
    L.append("    vmid = mdn_vmid(ib);")
    L.append("    if (v_l > vmid)")
    L.append("      st = 1.0;")
    L.append("    else if (v_l < vmid)")
    L.append("      st = 0.0;")
    L.append("    V(gate) <+ 0.0;")
    L.append("    V(chp, chn) <+ v_l;")
    L.append("  end")
    L.append("endmodule")
    return "\n".join(L) + "\n"


def _functions_section(text: str) -> str:
    try:
        start = text.index(FUNCTIONS_BEGIN) + len(FUNCTIONS_BEGIN)
        stop = text.index(FUNCTIONS_END, start)
    except ValueError:
        raise InterpretError("text does not contain an emitted analog-function section") from None
    return text[start:stop]


_compiled_cache: dict = {}


def _compiled(text: str):
    fn = _compiled_cache.get(text)
    if fn is None:
        fn = compile_functions(_functions_section(text))
        if "mdn_quantile" not in fn.functions:
            raise InterpretError("emitted text lacks mdn_quantile")
        if len(_compiled_cache) > 8:
            _compiled_cache.clear()
        _compiled_cache[text] = fn
    return fn


def reference_interpret(text: str, inputs, q: float) -> float:
    """Load voltage the emitted module computes for ``inputs = (i_g, i_b, state)`` at quantile ``q``."""
    i_g, i_b, state = inputs
    return float(_compiled(text)("mdn_quantile", i_g, i_b, state, q))


def reference_vmid(text: str, i_b: float) -> float:
    return float(_compiled(text)("mdn_vmid", i_b))


def check_equivalence(bundle: ExportBundle, text: str, n: int = 100, seed: int = 0, tol: float = 1e-9) -> float:
    """Max ``|native - interpreted|`` over ``n`` random (input, q) pairs inside
    the training feature range; raises :class:`EquivalenceError` above ``tol``."""
    net = bundle.net
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_at = None
    for _ in range(n):
        i_g = rng.uniform(net.feature_min[0], net.feature_max[0])
        i_b = rng.uniform(net.feature_min[1], net.feature_max[1])
        st = float(rng.integers(0, 2))
        q = rng.uniform(0.001, 0.999)
        native = model_quantile(net, [i_g, i_b, st], q)
        try:
            interp = reference_interpret(text, (i_g, i_b, st), q)
        except InterpretError as exc:
            raise EquivalenceError(f"interpretation failed: {exc}") from None
        dev = abs(native - interp)
        if not dev <= worst:
            worst, worst_at = dev, (i_g, i_b, st, q)
    if not worst <= tol:
        raise EquivalenceError(f"max deviation {worst!r} V exceeds {tol!r} V at (i_g, i_b, state, q)={worst_at}")
    return worst
