"""Univariate Gaussian mixtures: density, CDF, negative log-likelihood and
its gradients with respect to the mixture parameters.

Scalar-facing functions take a :class:`MixtureParams`.  The ``*_arrays``
helpers work on stacked parameter arrays of shape ``(n, K)`` and are what
the network trains through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._erf import erf

__all__ = [
    "MixtureParams",
    "erf",
    "pdf",
    "cdf",
    "gnll_point",
    "gnll_batch",
    "gnll_gradients",
    "mixture_mean",
    "mixture_std",
    "log_component_densities",
    "gnll_arrays",
    "gnll_grad_arrays",
]

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
SQRT2 = np.sqrt(2.0)
ALPHA_SUM_TOL = 1e-12


@dataclass(frozen=True)
class MixtureParams:
    """Means, standard deviations and mixing weights of a K-component mixture."""

    means: np.ndarray
    sigmas: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        for name in ("means", "sigmas", "alphas"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k = self.means.size
        if k < 1 or self.sigmas.size != k or self.alphas.size != k:
            raise ValueError(
                f"means/sigmas/alphas must share a length K >= 1, got "
                f"{self.means.size}/{self.sigmas.size}/{self.alphas.size}"
            )
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.sigmas))
                and np.all(np.isfinite(self.alphas))):
            raise ValueError("mixture parameters must be finite")
        if np.any(self.sigmas <= 0):
            raise ValueError(f"sigmas must be strictly positive, got {self.sigmas}")
        if np.any(self.alphas < 0) or np.any(self.alphas > 1):
            raise ValueError(f"alphas must lie in [0, 1], got {self.alphas}")
        total = float(np.sum(self.alphas))
        if abs(total - 1.0) > ALPHA_SUM_TOL:
            raise ValueError(f"alphas must sum to 1 (got {total!r})")

    @property
    def K(self) -> int:
        return int(self.means.size)

    def scaled(self, scale: float, offset: float = 0.0) -> "MixtureParams":
        """The mixture of ``scale * X + offset`` for ``scale > 0``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        return MixtureParams(self.means * scale + offset, self.sigmas * scale, self.alphas)


def _as_array(x):
    return np.asarray(x, dtype=float)


def _ret(out):
    return float(out) if np.ndim(out) == 0 else out


def log_component_densities(means, sigmas, alphas, x):
    """``log(alpha_k * N(x | mu_k, sigma_k))`` broadcast over the last axis."""
    z = (x - means) / sigmas
    with np.errstate(divide="ignore"):
        log_alpha = np.log(alphas)
    return log_alpha - np.log(sigmas) - LOG_SQRT_2PI - 0.5 * z * z


def pdf(params: MixtureParams, x):
    """Mixture density at ``x`` (scalar or array)."""
    xa = _as_array(x)[..., None]
    z = (xa - params.means) / params.sigmas
    dens = params.alphas / (np.sqrt(2.0 * np.pi) * params.sigmas) * np.exp(-0.5 * z * z)
    return _ret(np.sum(dens, axis=-1))


def cdf(params: MixtureParams, x):
    """Mixture CDF as the alpha-weighted sum of normal CDFs written with erf."""
    xa = _as_array(x)[..., None]
    u = (xa - params.means) / (params.sigmas * SQRT2)
    terms = 0.5 * params.alphas * (1.0 + erf(u))
    out = np.clip(np.sum(terms, axis=-1), 0.0, 1.0)
    return _ret(out)


def mixture_mean(params: MixtureParams) -> float:
    return float(np.dot(params.alphas, params.means))


def mixture_std(params: MixtureParams) -> float:
    mean = mixture_mean(params)
    second = np.dot(params.alphas, params.sigmas**2 + params.means**2)
    return float(np.sqrt(max(second - mean * mean, 0.0)))


def _logsumexp(a, axis=-1):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def gnll_arrays(means, sigmas, alphas, x):
    """Per-row negative log-likelihood; parameter arrays are ``(n, K)``, ``x`` is ``(n,)``."""
    logp = log_component_densities(means, sigmas, alphas, np.asarray(x, dtype=float)[..., None])
    return -_logsumexp(logp, axis=-1)


def gnll_grad_arrays(means, sigmas, alphas, x):
    """Loss and its partials w.r.t. ``means``, ``sigmas`` and (unconstrained) ``alphas``.

    Also returns the posterior responsibilities, which the softmax chain rule
    needs.  All arrays keep the ``(n, K)`` layout of the inputs.
    """
    xa = np.asarray(x, dtype=float)[..., None]
    logp = log_component_densities(means, sigmas, alphas, xa)
    lse = _logsumexp(logp, axis=-1)
    resp = np.exp(logp - lse[..., None])
    diff = xa - means
    var = sigmas * sigmas
    d_mu = -resp * diff / var
    d_sigma = resp * (1.0 - diff * diff / var) / sigmas
    with np.errstate(divide="ignore", invalid="ignore"):
        d_alpha = np.where(alphas > 0, -resp / alphas, 0.0)
    return -lse, d_mu, d_sigma, d_alpha, resp


def gnll_point(params: MixtureParams, x) -> float:
    """``-log pdf(x)`` evaluated in the log domain."""
    return _ret(gnll_arrays(params.means, params.sigmas, params.alphas, _as_array(x)))


def gnll_batch(params_list, targets) -> float:
    """Mean negative log-likelihood over paired mixtures and targets."""
    params_list = list(params_list)
    targets = list(targets)
    if not params_list:
        raise ValueError("gnll_batch needs at least one (params, target) pair")
    if len(params_list) != len(targets):
        raise ValueError(f"{len(params_list)} mixtures but {len(targets)} targets")
    return float(np.mean([gnll_point(p, t) for p, t in zip(params_list, targets)]))


def gnll_gradients(params: MixtureParams, x: float):
    """Partials of the point loss w.r.t. each mean, sigma and alpha.

    Alphas are treated as free coordinates; composing with the softmax is the
    caller's job.
    """
    _, d_mu, d_sigma, d_alpha, _ = gnll_grad_arrays(
        params.means, params.sigmas, params.alphas, float(x)
    )
    return d_mu, d_sigma, d_alpha
