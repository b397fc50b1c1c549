"""Model validation: switching-probability curves, regression metrics,
predicted-density vs histogram tables and Kolmogorov-Smirnov statistics.

Nothing here mutates a model or a dataset.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .device import DeviceState, GroundTruthConfig, IVDataset, VMidRule, iv_model_predict, predict_batch
from .mixture import SQRT2, erf, pdf
from .network import MdnNetwork

__all__ = [
    "SwitchingCurve",
    "distribution_report",
    "empirical_switching_probability",
    "ground_truth_switching_curve",
    "ks_2samp_statistic",
    "ks_critical_value",
    "ks_statistic",
    "mae",
    "model_switching_curve",
    "model_switching_probability",
    "r_squared",
    "switching_report",
    "default_gate_grid",
]

MIN_HIST_SAMPLES = 30
GRID_ATOL = 1e-9


def default_gate_grid(start=0.0, stop=3.0, step=0.05) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, n)


@dataclass(frozen=True)
class SwitchingCurve:
    i_g: np.ndarray
    probabilities: np.ndarray
    i_b: float
    source: str

    def __post_init__(self):
        g = np.asarray(self.i_g, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if g.shape != p.shape:
            raise ValueError("grid and probabilities must align")
        if np.any(np.diff(g) <= 0):
            raise ValueError("gate grid must be strictly increasing")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "i_g", g)
        object.__setattr__(self, "probabilities", p)


def model_switching_probability(net: MdnNetwork, i_g, i_b: float, v_mid: float):
    """Mixture mass above ``v_mid`` on the superconducting (ramp-up) branch.

    Vectorized over ``i_g``; a scalar gate current returns a float.
    """
    g = np.atleast_1d(np.asarray(i_g, dtype=float))
    raw = np.column_stack([g, np.full(g.size, float(i_b)), np.full(g.size, float(DeviceState.SUPERCONDUCTING))])
    mu, sigma, alpha = predict_batch(net, raw)
    below = np.sum(0.5 * alpha * (1.0 + erf((v_mid - mu) / (sigma * SQRT2))), axis=1)
    p = np.clip(1.0 - below, 0.0, 1.0)
    return float(p[0]) if np.ndim(i_g) == 0 else p


def model_switching_curve(net: MdnNetwork, grid, i_b: float, v_mid: float) -> SwitchingCurve:
    return SwitchingCurve(grid, model_switching_probability(net, np.asarray(grid), i_b, v_mid), i_b, "model")


def empirical_switching_probability(dataset: IVDataset, grid, i_b: float, v_mid: float) -> SwitchingCurve:
    """Fraction of ramp-up records above ``v_mid`` at each gate current of ``grid``."""
    grid = np.asarray(grid, dtype=float)
    at_bias = np.isclose(dataset.i_b, i_b, rtol=0, atol=GRID_ATOL) & (dataset.state == DeviceState.SUPERCONDUCTING)
    if not at_bias.any():
        raise ValueError(f"dataset has no ramp-up records at I_B={i_b} uA")
    g = dataset.i_g[at_bias]
    v = dataset.v_l[at_bias]
    probs = np.empty(grid.size)
    for j, x in enumerate(grid):
        sel = np.abs(g - x) <= GRID_ATOL
        if not sel.any():
            raise ValueError(f"dataset has no records at I_G={x} uA, I_B={i_b} uA")
        probs[j] = np.mean(v[sel] > v_mid)
    return SwitchingCurve(grid, probs, i_b, "empirical")


def ground_truth_switching_curve(cfg: GroundTruthConfig, grid, i_b: float) -> SwitchingCurve:
    grid = np.asarray(grid, dtype=float)
    return SwitchingCurve(grid, np.asarray(cfg.switching_probability(grid, i_b)), i_b, "ground_truth")


def _paired(pred, actual):
    pred = np.asarray(pred, dtype=float).reshape(-1)
    actual = np.asarray(actual, dtype=float).reshape(-1)
    if pred.size != actual.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {actual.size} actuals")
    if pred.size == 0:
        raise ValueError("need at least one pair")
    return pred, actual


def mae(pred, actual) -> float:
    """Mean absolute error (same units as the inputs; x100 for percentage points)."""
    pred, actual = _paired(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def r_squared(pred, actual) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    pred, actual = _paired(pred, actual)
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("R^2 is undefined when the actual values have zero variance")
    return 1.0 - float(np.sum((pred - actual) ** 2)) / ss_tot


def ks_statistic(samples, cdf_fn) -> float:
    """One-sample KS distance between the empirical CDF of ``samples`` and ``cdf_fn``."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    F = np.asarray(cdf_fn(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_2samp_statistic(a, b) -> float:
    """Two-sample KS distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(b, dtype=float).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical_value(n: int, alpha: float = 0.01, m: int | None = None) -> float:
    """Asymptotic KS critical value ``c(alpha) * sqrt(1/n [+ 1/m])``; ``c(0.01) ~ 1.628``."""
    c = np.sqrt(-0.5 * np.log(alpha / 2.0))
    eff = 1.0 / n if m is None else 1.0 / n + 1.0 / m
    return float(c * np.sqrt(eff))


def distribution_report(net: MdnNetwork, dataset: IVDataset, i_g_values, i_b: float):
    """Predicted load-voltage density next to the empirical histogram.

    One row per histogram bin (Freedman-Diaconis width) at each requested
    gate current on the ramp-up branch.  The model density is evaluated at
    bin centers.  Points with fewer than 30 samples are flagged and a
    warning is issued.
    """
    rows = []
    at_bias = np.isclose(dataset.i_b, i_b, rtol=0, atol=GRID_ATOL) & (dataset.state == DeviceState.SUPERCONDUCTING)
    for x in np.atleast_1d(np.asarray(i_g_values, dtype=float)):
        v = dataset.v_l[at_bias & (np.abs(dataset.i_g - x) <= GRID_ATOL)]
        low = v.size < MIN_HIST_SAMPLES
        if low:
            warnings.warn(f"only {v.size} samples at I_G={x} uA, I_B={i_b} uA", RuntimeWarning, stacklevel=2)
        if v.size == 0:
            continue
        if v.size > 1 and np.ptp(v) > 0:
            dens, edges = np.histogram(v, bins="fd", density=True)
        else:
            dens, edges = np.array([1.0]), np.array([v[0] - 0.5, v[0] + 0.5])
        centers = 0.5 * (edges[:-1] + edges[1:])
        model = pdf(iv_model_predict(net, x, i_b, DeviceState.SUPERCONDUCTING), centers)
        for lo_e, hi_e, c, d, m in zip(edges[:-1], edges[1:], centers, dens, np.atleast_1d(model)):
            rows.append({
                "i_g_uA": float(x), "i_b_uA": float(i_b), "bin_left_V": float(lo_e), "bin_right_V": float(hi_e),
                "bin_center_V": float(c), "hist_density": float(d), "model_pdf": float(m),
                "n_samples": int(v.size), "low_sample_flag": int(low),
            })
    return rows


def switching_report(net: MdnNetwork, dataset: IVDataset, grid, bias_levels, rule: VMidRule,
                     truth: GroundTruthConfig | None = None):
    """Switching curves at each bias and the per-bias MAE (percentage points) and R^2.

    Metrics compare the model against the empirical curve; when ``truth`` is
    given, metrics against the analytic law are reported too.  Returns
    ``(curve_rows, summary)``.
    """
    grid = np.asarray(grid, dtype=float)
    rows = []
    summary = {"per_bias": {}}
    vs_truth = {}
    for b in bias_levels:
        v_mid = rule(b)
        model = model_switching_curve(net, grid, b, v_mid)
        emp = empirical_switching_probability(dataset, grid, b, v_mid)
        gt = ground_truth_switching_curve(truth, grid, b) if truth is not None else None
        for j, x in enumerate(grid):
            row = {"i_b_uA": float(b), "i_g_uA": float(x), "v_mid_V": float(v_mid),
                   "p_model": float(model.probabilities[j]), "p_empirical": float(emp.probabilities[j])}
            if gt is not None:
                row["p_ground_truth"] = float(gt.probabilities[j])
            rows.append(row)
        key = repr(float(b))
        summary["per_bias"][key] = {
            "mae_pct": 100.0 * mae(model.probabilities, emp.probabilities),
            "r2": r_squared(model.probabilities, emp.probabilities),
        }
        if gt is not None:
            vs_truth[key] = {
                "mae_pct": 100.0 * mae(model.probabilities, gt.probabilities),
                "r2": r_squared(model.probabilities, gt.probabilities),
            }
    per = summary["per_bias"].values()
    summary["mean_mae_pct"] = float(np.mean([m["mae_pct"] for m in per]))
    summary["mean_r2"] = float(np.mean([m["r2"] for m in per]))
    if truth is not None:
        summary["vs_ground_truth"] = {
            "per_bias": vs_truth,
            "mean_mae_pct": float(np.mean([m["mae_pct"] for m in vs_truth.values()])),
            "mean_r2": float(np.mean([m["r2"] for m in vs_truth.values()])),
        }
    return rows, summary


def write_rows_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_summary_json(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
