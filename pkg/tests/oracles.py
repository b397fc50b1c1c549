"""Independent reference computations used by the tests.

Each oracle avoids the package code path it checks: mpmath series and
quadrature for erf/cdf, scipy for normal quantiles and KS tests, plain
bisection for roots, explicit Python loops for metrics.
"""

import math

import mpmath

mpmath.mp.dps = 40


def erf_series(x, terms=200):
    """Maclaurin series 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)) in high precision."""
    x = mpmath.mpf(x)
    total = mpmath.mpf(0)
    for n in range(terms):
        term = (-1) ** n * x ** (2 * n + 1) / (mpmath.factorial(n) * (2 * n + 1))
        total += term
        if abs(term) < mpmath.mpf(10) ** -35:
            break
    return float(2 / mpmath.sqrt(mpmath.pi) * total)


def mixture_pdf_mp(means, sigmas, alphas, x):
    x = mpmath.mpf(x)
    return sum(a * mpmath.exp(-((x - m) ** 2) / (2 * s**2)) / (s * mpmath.sqrt(2 * mpmath.pi))
               for m, s, a in zip(means, sigmas, alphas))


def mixture_cdf_quad(means, sigmas, alphas, x):
    """Cdf by adaptive quadrature of the density from -inf."""
    lo = min(m - 40 * s for m, s in zip(means, sigmas))
    pts = sorted({lo, *[m for m in means if lo < m < x], x})
    return float(mpmath.quad(lambda t: mixture_pdf_mp(means, sigmas, alphas, t), pts))


def mixture_mass_quad(means, sigmas, alphas, lo, hi):
    pts = sorted({lo, *[m for m in means if lo < m < hi], hi})
    return float(mpmath.quad(lambda t: mixture_pdf_mp(means, sigmas, alphas, t), pts))


def normal_quantile(q):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(q) - 1))


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mae_loop(pred, actual):
    total = 0.0
    for p, a in zip(pred, actual):
        total += abs(p - a)
    return total / len(pred)


def r2_loop(pred, actual):
    mean = sum(actual) / len(actual)
    ss_res = sum((p - a) ** 2 for p, a in zip(pred, actual))
    ss_tot = sum((a - mean) ** 2 for a in actual)
    return 1.0 - ss_res / ss_tot


def softmax_closed_form(logits):
    ex = [math.exp(v) for v in logits]
    s = sum(ex)
    return [e / s for e in ex]


def central_difference_grads(loss_fn, params, h=1e-5):
    """Central differences of ``loss_fn(params)`` w.r.t. every entry of every array in ``params``.

    ``params`` arrays are perturbed in place and restored.
    """
    out = []
    for p in params:
        g = [0.0] * p.size
        flat = p.reshape(-1)
        for i in range(p.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_fn()
            flat[i] = old - h
            down = loss_fn()
            flat[i] = old
            g[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def worst_relative_error(analytic, numeric, floor=1e-6):
    """Largest ``|a - n| / max(|a|, |n|, floor)``; the floor keeps round-off on
    near-zero entries (differences of ~1e-11) from dominating."""
    worst = 0.0
    for a_arr, n_arr in zip(analytic, numeric):
        for a, n in zip(list(a_arr.reshape(-1)), n_arr):
            worst = max(worst, abs(a - n) / max(abs(a), abs(n), floor))
    return worst
