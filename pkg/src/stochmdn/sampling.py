"""Drawing values from a Gaussian mixture.

Two samplers are provided.  :func:`standard_sample` picks a component by
walking the cumulative mixing weights and then draws from that normal; every
call is independent.  :func:`inverse_cdf` maps a quantile ``q`` through the
numerically inverted mixture CDF, so holding ``q`` fixed while the mixture
drifts yields a continuous output.  :class:`SampleContext` carries the
quantile-hold state for a simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixture import MixtureParams, cdf

__all__ = [
    "ConvergenceError",
    "QuantilePolicy",
    "SampleContext",
    "brent_root",
    "inverse_cdf",
    "next_quantile",
    "sample_with_policy",
    "standard_sample",
]

MODES = ("fresh_per_call", "held_per_sweep", "fixed")
EVENTS = ("step", "sweep_boundary")

BRENT_XTOL = 1e-13
BRENT_RTOL = 4 * np.finfo(float).eps
BRENT_MAXITER = 200
BRACKET_SIGMAS = 10.0
BRACKET_DOUBLINGS = 10


class ConvergenceError(ArithmeticError):
    """A root finder ran out of iterations or could not bracket a root."""


def _brent_vectorized(f, lo, hi, xtol=BRENT_XTOL, rtol=BRENT_RTOL, maxiter=BRENT_MAXITER):
    """Brent's method run elementwise over arrays of brackets.

    ``f(x, idx)`` evaluates the functions selected by index array ``idx`` at
    the points ``x``.  The step logic follows the classic brentq formulation:
    inverse quadratic or secant steps when they are short enough, bisection
    otherwise.
    """
    xpre = np.array(lo, dtype=float, copy=True).reshape(-1)
    xcur = np.array(hi, dtype=float, copy=True).reshape(-1)
    n = xpre.size
    all_idx = np.arange(n)
    fpre = np.asarray(f(xpre, all_idx), dtype=float)
    fcur = np.asarray(f(xcur, all_idx), dtype=float)
    if np.any(fpre * fcur > 0):
        bad = int(np.flatnonzero(fpre * fcur > 0)[0])
        raise ValueError(
            f"root not bracketed: f({xpre[bad]!r})={fpre[bad]!r}, f({xcur[bad]!r})={fcur[bad]!r}"
        )
    root = np.full(n, np.nan)
    done = np.zeros(n, dtype=bool)
    hit = fpre == 0
    root[hit], done[hit] = xpre[hit], True
    hit = (fcur == 0) & ~done
    root[hit], done[hit] = xcur[hit], True

    xblk = np.zeros(n)
    fblk = np.zeros(n)
    spre = np.zeros(n)
    scur = np.zeros(n)

    for _ in range(maxiter):
        act = ~done
        if not act.any():
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            sign_change = act & (fpre * fcur < 0)
            xblk = np.where(sign_change, xpre, xblk)
            fblk = np.where(sign_change, fpre, fblk)
            spre = np.where(sign_change, xcur - xpre, spre)
            scur = np.where(sign_change, xcur - xpre, scur)

            swap = act & (np.abs(fblk) < np.abs(fcur))
            xpre = np.where(swap, xcur, xpre)
            xcur = np.where(swap, xblk, xcur)
            xblk = np.where(swap, xpre, xblk)
            fpre = np.where(swap, fcur, fpre)
            fcur = np.where(swap, fblk, fcur)
            fblk = np.where(swap, fpre, fblk)

            delta = (xtol + rtol * np.abs(xcur)) / 2
            sbis = (xblk - xcur) / 2
            conv = act & ((fcur == 0) | (np.abs(sbis) < delta))
            root[conv] = xcur[conv]
            done |= conv
            act = ~done
            if not act.any():
                break

            interp = act & (np.abs(spre) > delta) & (np.abs(fcur) < np.abs(fpre))
            secant = -fcur * (xcur - xpre) / (fcur - fpre)
            dpre = (fpre - fcur) / (xpre - xcur)
            dblk = (fblk - fcur) / (xblk - xcur)
            quad = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            stry = np.where(xpre == xblk, secant, quad)
            accept = interp & (2 * np.abs(stry) < np.minimum(np.abs(spre), 3 * np.abs(sbis) - delta))
            new_spre = np.where(accept, scur, sbis)
            new_scur = np.where(accept, stry, sbis)
            spre = np.where(act, new_spre, spre)
            scur = np.where(act, new_scur, scur)

            xpre = np.where(act, xcur, xpre)
            fpre = np.where(act, fcur, fpre)
            step = np.where(np.abs(scur) > delta, scur, np.where(sbis > 0, delta, -delta))
            xcur = np.where(act, xcur + step, xcur)
        idx = np.flatnonzero(act)
        fcur[idx] = f(xcur[idx], idx)

    if not done.all():
        bad = int(np.flatnonzero(~done)[0])
        raise ConvergenceError(
            f"Brent iteration did not converge in {maxiter} iterations "
            f"(element {bad}, last bracket [{xcur[bad]!r}, {xblk[bad]!r}])"
        )
    return root


def brent_root(f, lo: float, hi: float, tol: float = BRENT_XTOL, maxiter: int = BRENT_MAXITER) -> float:
    """Root of scalar ``f`` inside ``[lo, hi]``; requires ``f(lo) * f(hi) <= 0``."""

    def fv(x, idx):
        return np.array([f(float(v)) for v in x])

    return float(_brent_vectorized(fv, [lo], [hi], xtol=tol, maxiter=maxiter)[0])


def _bracket(params: MixtureParams, q_min: float, q_max: float):
    lo = float(np.min(params.means - BRACKET_SIGMAS * params.sigmas))
    hi = float(np.max(params.means + BRACKET_SIGMAS * params.sigmas))
    for _ in range(BRACKET_DOUBLINGS + 1):
        if cdf(params, lo) <= q_min and cdf(params, hi) >= q_max:
            return lo, hi
        mid, half = 0.5 * (lo + hi), (hi - lo)
        lo, hi = mid - half, mid + half
    raise ConvergenceError(
        f"could not bracket quantiles [{q_min!r}, {q_max!r}] after {BRACKET_DOUBLINGS} doublings"
    )


def inverse_cdf(params: MixtureParams, q):
    """Quantile function of the mixture, solved with Brent's method.

    ``q`` may be a scalar or an array; every entry must lie strictly in (0, 1).
    """
    qa = np.asarray(q, dtype=float)
    flat = qa.reshape(-1)
    if flat.size == 0:
        return qa.copy()
    if not np.all((flat > 0) & (flat < 1)):
        raise ValueError("quantiles must lie strictly inside (0, 1)")
    lo, hi = _bracket(params, float(flat.min()), float(flat.max()))

    def f(x, idx):
        return cdf(params, x) - flat[idx]

    roots = _brent_vectorized(f, np.full(flat.size, lo), np.full(flat.size, hi))
    if qa.ndim == 0:
        return float(roots[0])
    return roots.reshape(qa.shape)


def standard_sample(params: MixtureParams, rng: np.random.Generator, size=None):
    """Component-selection sampling: pick k by cumulative weight, then draw N(mu_k, sigma_k)."""
    if size is None:
        q = 1.0 - rng.random()  # (0, 1] so zero-weight leading components are never picked
        total = 0.0
        k = params.K - 1
        for i, a in enumerate(params.alphas):
            total += a
            if total >= q:
                k = i
                break
        return float(rng.normal(params.means[k], params.sigmas[k]))
    q = 1.0 - rng.random(size)
    k = np.minimum(np.searchsorted(np.cumsum(params.alphas), q, side="left"), params.K - 1)
    return rng.normal(params.means[k], params.sigmas[k])


@dataclass(frozen=True)
class QuantilePolicy:
    """How quantiles are drawn and when they are refreshed.

    ``fresh_per_call`` draws a new quantile for every sample,
    ``held_per_sweep`` keeps one until a sweep boundary, ``fixed`` always uses
    ``fixed_q``.  Drawn quantiles are uniform on ``[clip_low, clip_high]``.
    """

    mode: str = "held_per_sweep"
    clip_low: float = 0.05
    clip_high: float = 0.95
    fixed_q: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (0.0 <= self.clip_low < self.clip_high <= 1.0):
            raise ValueError(
                f"need 0 <= clip_low < clip_high <= 1, got ({self.clip_low}, {self.clip_high})"
            )
        if self.mode == "fixed":
            if self.fixed_q is None:
                raise ValueError("fixed mode requires fixed_q")
            if not (self.clip_low <= self.fixed_q <= self.clip_high) or not (0 < self.fixed_q < 1):
                raise ValueError(f"fixed_q={self.fixed_q} outside clip bounds or (0, 1)")

    @classmethod
    def fixed(cls, q: float) -> "QuantilePolicy":
        return cls(mode="fixed", clip_low=0.0, clip_high=1.0, fixed_q=q)


@dataclass
class SampleContext:
    """Mutable quantile state for one simulation.  Not thread-shared."""

    policy: QuantilePolicy
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    current_q: float = field(init=False)
    regenerated: bool = field(init=False, default=False)

    def __post_init__(self):
        self.current_q = self._initial_q()

    def _initial_q(self) -> float:
        if self.policy.mode == "fixed":
            return float(self.policy.fixed_q)
        return self._draw()

    def _draw(self) -> float:
        lo, hi = self.policy.clip_low, self.policy.clip_high
        while True:
            q = lo + (hi - lo) * self.rng.random()
            if 0.0 < q < 1.0:
                return float(q)

    def advance(self, event: str) -> bool:
        """Apply ``event``; returns True when a new quantile was drawn."""
        if event not in EVENTS:
            raise ValueError(f"event must be one of {EVENTS}, got {event!r}")
        mode = self.policy.mode
        regen = mode == "fresh_per_call" or (mode == "held_per_sweep" and event == "sweep_boundary")
        if regen:
            self.current_q = self._draw()
        self.regenerated = regen
        return regen


def next_quantile(ctx: SampleContext, event: str = "step") -> float:
    """Advance ``ctx`` by ``event`` and return the quantile to sample at."""
    ctx.advance(event)
    return ctx.current_q


def sample_with_policy(params: MixtureParams, ctx: SampleContext, event: str = "step") -> float:
    """Inverse-transform sample of ``params`` at the quantile chosen by ``ctx``."""
    return inverse_cdf(params, next_quantile(ctx, event))
