"""Heater-cryotron domain layer.

A phenomenological stochastic oracle stands in for measured devices: each
gate sweep draws a critical current and a retrapping current from
bias-dependent normal laws, and the load voltage is noisy around 0 V
(superconducting) or around ``I_B * R_load`` (resistive).

Currents are in microamperes and voltages in volts throughout.

The ``state`` feature of a record is the device state at the start of the
ramp segment the record belongs to: superconducting for the ramp-up branch
of a sweep that starts superconducting, resistive for the ramp-down branch
after a switch.  Conditioning on the branch rather than on the instantaneous
state is what lets the I-V model carry the switching statistics: on the
superconducting branch, the mixture weight sitting at the resistive voltage
level is the cumulative switching probability.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .mixture import MixtureParams, cdf
from .network import MdnNetwork, TrainConfig, forward_batch, init_network, train
from .sampling import QuantilePolicy, SampleContext, inverse_cdf

logger = logging.getLogger(__name__)

IV_HEADER = ["i_g_uA", "i_b_uA", "state", "v_l_V"]
SWITCHING_HEADER = ["i_b_uA", "state", "i_switch_uA"]
TRACE_HEADER = ["t_s", "i_g_uA", "i_b_uA", "state", "v_l_V", "q_event"]
WAVEFORM_HEADER = ["t_s", "i_g_uA", "i_b_uA"]

UA = 1e-6


class SchemaError(ValueError):
    """A CSV file does not follow the expected schema."""


class ExtrapolationWarning(UserWarning):
    """Model inputs fall outside the normalization range seen in training."""


class DeviceState(IntEnum):
    SUPERCONDUCTING = 0
    RESISTIVE = 1


@dataclass(frozen=True)
class GroundTruthConfig:
    """Linear-in-bias laws for the synthetic device (currents in uA, volts in V).

    Critical current ``N(c0 - c1*I_B, s0 + s1*I_B)``, retrapping current
    ``N(r0 - r1*I_B, rs0 + rs1*I_B)``.  The resistive load voltage is the
    bias current through the load, times ``v_res_scale``.
    """

    c0: float = 3.0
    c1: float = 0.066
    s0: float = 0.03
    s1: float = 0.001
    r0: float = 1.2
    r1: float = 0.0264
    rs0: float = 0.012
    rs1: float = 0.0004
    sigma_v_sc: float = 2e-4
    sigma_v_res: float = 5e-4
    load_resistance: float = 1000.0
    v_res_scale: float = 1.0

    def mu_c(self, i_b):
        return self.c0 - self.c1 * np.asarray(i_b, dtype=float)

    def sigma_c(self, i_b):
        return self.s0 + self.s1 * np.asarray(i_b, dtype=float)

    def mu_r(self, i_b):
        return self.r0 - self.r1 * np.asarray(i_b, dtype=float)

    def sigma_r(self, i_b):
        return self.rs0 + self.rs1 * np.asarray(i_b, dtype=float)

    def v_res(self, i_b):
        return self.v_res_scale * np.asarray(i_b, dtype=float) * UA * self.load_resistance

    def check(self, i_b) -> None:
        """Raise ``ValueError`` if the laws are inconsistent at any bias in ``i_b``."""
        i_b = np.atleast_1d(np.asarray(i_b, dtype=float))
        if np.any(i_b < 0):
            raise ValueError("bias currents must be non-negative")
        for name in ("sigma_c", "sigma_r"):
            if np.any(getattr(self, name)(i_b) <= 0):
                raise ValueError(f"{name} must be positive over the bias range")
        if self.sigma_v_sc <= 0 or self.sigma_v_res <= 0:
            raise ValueError("load-voltage noise levels must be positive")
        if np.any(self.mu_r(i_b) >= self.mu_c(i_b)):
            bad = i_b[self.mu_r(i_b) >= self.mu_c(i_b)][0]
            raise ValueError(f"retrapping mean must stay below critical mean (violated at I_B={bad} uA)")
        if np.any(self.v_res(i_b) <= 0):
            raise ValueError("resistive load voltage must be positive")

    def switching_probability(self, i_g, i_b):
        """Probability that a ramp-up sweep has switched by gate current ``i_g``."""
        mix = MixtureParams([float(self.mu_c(i_b))], [float(self.sigma_c(i_b))], [1.0])
        return cdf(mix, i_g)


@dataclass(frozen=True)
class SweepProtocol:
    """Gate ramp 0 -> ``gate_max_uA`` in ``gate_steps`` points at each bias level."""

    gate_max_uA: float = 3.0
    gate_steps: int = 61
    bias_levels_uA: tuple = (14.0, 16.5, 23.5, 28.0, 33.0)
    repeats: int = 1000
    ramp_down: bool = True

    def __post_init__(self):
        object.__setattr__(self, "bias_levels_uA", tuple(float(b) for b in self.bias_levels_uA))
        if self.gate_steps < 2 or self.gate_max_uA <= 0:
            raise ValueError("gate ramp needs at least two points and a positive maximum")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.bias_levels_uA:
            raise ValueError("bias_levels_uA must not be empty")

    def gate_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.gate_max_uA, self.gate_steps)

    def records_per_sweep(self) -> int:
        return self.gate_steps * (2 if self.ramp_down else 1)

    def iv_rows(self) -> int:
        return len(self.bias_levels_uA) * self.repeats * self.records_per_sweep()

    def switching_rows(self) -> int:
        return len(self.bias_levels_uA) * self.repeats * (2 if self.ramp_down else 1)


@dataclass
class SweepResult:
    """One realized gate sweep: ramp-up points followed by ramp-down points."""

    i_g: np.ndarray
    branch: np.ndarray
    state: np.ndarray
    v_l: np.ndarray
    i_c: float
    i_r: float


def ground_truth_sweep(cfg: GroundTruthConfig, i_b: float, rng: np.random.Generator,
                       gate_grid=None, ramp_down: bool = True) -> SweepResult:
    """Simulate one gate sweep at bias ``i_b`` on the synthetic device.

    The channel switches to resistive once the gate current exceeds the
    sweep's critical current, and back once it falls below the retrapping
    current on the way down.
    """
    cfg.check(i_b)
    grid = SweepProtocol().gate_grid() if gate_grid is None else np.asarray(gate_grid, dtype=float)
    i_c = float(rng.normal(cfg.mu_c(i_b), cfg.sigma_c(i_b)))
    i_r = float(rng.normal(cfg.mu_r(i_b), cfg.sigma_r(i_b)))

    up_state = (grid > i_c).astype(int)
    up_branch = np.zeros_like(up_state)
    parts_g, parts_branch, parts_state = [grid], [up_branch], [up_state]
    if ramp_down:
        down = grid[::-1]
        start = int(up_state[-1])
        if start == DeviceState.RESISTIVE:
            down_state = (down >= i_r).astype(int)
        else:
            down_state = np.zeros(down.size, dtype=int)
        parts_g.append(down)
        parts_branch.append(np.full(down.size, start))
        parts_state.append(down_state)
    i_g = np.concatenate(parts_g)
    branch = np.concatenate(parts_branch)
    state = np.concatenate(parts_state)
    noise_sc = rng.normal(0.0, cfg.sigma_v_sc, i_g.size)
    noise_res = rng.normal(0.0, cfg.sigma_v_res, i_g.size)
    v_l = np.where(state == DeviceState.RESISTIVE, float(cfg.v_res(i_b)) + noise_res, noise_sc)
    return SweepResult(i_g, branch, state, v_l, i_c, i_r)


@dataclass
class IVDataset:
    """Per-step records: gate and bias current (uA), branch state, load voltage (V)."""

    i_g: np.ndarray
    i_b: np.ndarray
    state: np.ndarray
    v_l: np.ndarray

    def __post_init__(self):
        self.i_g = np.asarray(self.i_g, dtype=float)
        self.i_b = np.asarray(self.i_b, dtype=float)
        self.state = np.asarray(self.state, dtype=int)
        self.v_l = np.asarray(self.v_l, dtype=float)
        n = self.i_g.size
        if not (self.i_b.size == self.state.size == self.v_l.size == n):
            raise ValueError("I-V dataset columns must have equal length")

    def __len__(self):
        return int(self.i_g.size)

    def features(self) -> np.ndarray:
        return np.column_stack([self.i_g, self.i_b, self.state.astype(float)])


@dataclass
class SwitchingDataset:
    """Per-sweep switching currents (uA): critical when ``state`` is 0, retrapping when 1."""

    i_b: np.ndarray
    state: np.ndarray
    i_switch: np.ndarray

    def __post_init__(self):
        self.i_b = np.asarray(self.i_b, dtype=float)
        self.state = np.asarray(self.state, dtype=int)
        self.i_switch = np.asarray(self.i_switch, dtype=float)
        if not (self.i_b.size == self.state.size == self.i_switch.size):
            raise ValueError("switching dataset columns must have equal length")

    def __len__(self):
        return int(self.i_b.size)

    def features(self) -> np.ndarray:
        return np.column_stack([self.i_b, self.state.astype(float)])


def generate_dataset(cfg: GroundTruthConfig, protocol: SweepProtocol, seed: int):
    """Run ``protocol`` on the synthetic device; returns ``(IVDataset, SwitchingDataset)``.

    Each bias level gets its own RNG stream spawned from ``seed``, so the
    output depends only on ``(cfg, protocol, seed)``.
    """
    cfg.check(protocol.bias_levels_uA)
    grid = protocol.gate_grid()
    streams = np.random.SeedSequence(seed).spawn(len(protocol.bias_levels_uA))
    iv_cols = {k: [] for k in ("i_g", "i_b", "state", "v_l")}
    sw_cols = {k: [] for k in ("i_b", "state", "i_switch")}
    for i_b, ss in zip(protocol.bias_levels_uA, streams):
        rng = np.random.default_rng(ss)
        for _ in range(protocol.repeats):
            sweep = ground_truth_sweep(cfg, i_b, rng, grid, protocol.ramp_down)
            iv_cols["i_g"].append(sweep.i_g)
            iv_cols["i_b"].append(np.full(sweep.i_g.size, i_b))
            iv_cols["state"].append(sweep.branch)
            iv_cols["v_l"].append(sweep.v_l)
            sw_cols["i_b"].append(i_b)
            sw_cols["state"].append(int(DeviceState.SUPERCONDUCTING))
            sw_cols["i_switch"].append(sweep.i_c)
            if protocol.ramp_down:
                sw_cols["i_b"].append(i_b)
                sw_cols["state"].append(int(DeviceState.RESISTIVE))
                sw_cols["i_switch"].append(sweep.i_r)
    iv = IVDataset(*(np.concatenate(iv_cols[k]) for k in ("i_g", "i_b", "state", "v_l")))
    sw = SwitchingDataset(*(np.asarray(sw_cols[k]) for k in ("i_b", "state", "i_switch")))
    return iv, sw


# --- CSV persistence -------------------------------------------------------

def _write_csv(path, header, columns, formats):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        rows = zip(*columns)
        fh.writelines(",".join(fmt(v) for fmt, v in zip(formats, row)) + "\n" for row in rows)


def _fmt_float(v) -> str:
    return repr(float(v))


def _fmt_int(v) -> str:
    return str(int(v))


def _read_csv(path, header, parsers):
    path = Path(path)
    cols = [[] for _ in header]
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(header)}") from None
        if [h.strip() for h in got] != header:
            raise SchemaError(
                f"{path}:1: header {','.join(got)!r} does not match expected {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for col, parse, name, text in zip(cols, parsers, header, row):
                try:
                    col.append(parse(text))
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: bad value {text!r} for {name}") from None
    return cols


def _parse_state(text: str) -> int:
    v = int(text)
    if v not in (0, 1):
        raise ValueError(text)
    return v


def _parse_finite(text: str) -> float:
    v = float(text)
    if not np.isfinite(v):
        raise ValueError(text)
    return v


def _parse_current(text: str) -> float:
    v = _parse_finite(text)
    if v < 0:
        raise ValueError(text)
    return v


def write_iv_csv(dataset: IVDataset, path) -> None:
    _write_csv(path, IV_HEADER, [dataset.i_g, dataset.i_b, dataset.state, dataset.v_l],
               [_fmt_float, _fmt_float, _fmt_int, _fmt_float])


def read_iv_csv(path) -> IVDataset:
    cols = _read_csv(path, IV_HEADER, [_parse_current, _parse_current, _parse_state, _parse_finite])
    return IVDataset(*cols)


def write_switching_csv(dataset: SwitchingDataset, path) -> None:
    _write_csv(path, SWITCHING_HEADER, [dataset.i_b, dataset.state, dataset.i_switch],
               [_fmt_float, _fmt_int, _fmt_float])


def read_switching_csv(path) -> SwitchingDataset:
    cols = _read_csv(path, SWITCHING_HEADER, [_parse_current, _parse_state, _parse_current])
    return SwitchingDataset(*cols)


# --- midpoint voltage rule -------------------------------------------------

def _two_level_split(v: np.ndarray, iters: int = 50):
    """Medians of the low and high clusters of a 1-D sample (two-means split)."""
    lo_c, hi_c = float(v.min()), float(v.max())
    if lo_c == hi_c:
        return lo_c, hi_c
    for _ in range(iters):
        thr = 0.5 * (lo_c + hi_c)
        low, high = v[v <= thr], v[v > thr]
        new = (float(low.mean()), float(high.mean()))
        if new == (lo_c, hi_c):
            break
        lo_c, hi_c = new
    thr = 0.5 * (lo_c + hi_c)
    return float(np.median(v[v <= thr])), float(np.median(v[v > thr]))


@dataclass(frozen=True)
class VMidRule:
    """Per-bias voltage halfway between the superconducting and resistive levels,
    linearly interpolated in bias (clamped outside the tabulated range)."""

    bias_uA: tuple
    v_mid_V: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.bias_uA)
        v = tuple(float(x) for x in self.v_mid_V)
        if len(b) != len(v) or not b:
            raise ValueError("v_mid rule needs matching, non-empty bias and voltage tables")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("v_mid rule bias levels must be strictly increasing")
        object.__setattr__(self, "bias_uA", b)
        object.__setattr__(self, "v_mid_V", v)

    def __call__(self, i_b):
        out = np.interp(i_b, self.bias_uA, self.v_mid_V)
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def from_dataset(cls, dataset: IVDataset) -> "VMidRule":
        levels = np.unique(dataset.i_b)
        mids = []
        for b in levels:
            low, high = _two_level_split(dataset.v_l[dataset.i_b == b])
            mids.append(0.5 * (low + high))
        return cls(tuple(levels), tuple(mids))

    def to_dict(self) -> dict:
        return {"bias_uA": list(self.bias_uA), "v_mid_V": list(self.v_mid_V)}

    @classmethod
    def from_dict(cls, d: dict) -> "VMidRule":
        return cls(tuple(d["bias_uA"]), tuple(d["v_mid_V"]))


# --- model variants ----------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Network shape and target scaling for one model variant.

    ``target_scale`` is the physical size of one model output unit; it should
    sit at or below the smallest noise level so the sigma floor of 0.5 units
    does not bind.
    """

    hidden_sizes: tuple = (32, 32)
    K: int = 3
    target_scale: float = 2e-4
    init_seed: int = 0
    extrapolation_margin: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.K < 1 or not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("K and every hidden size must be positive")
        if not self.target_scale > 0:
            raise ValueError("target_scale must be positive")


IV_MODEL = ModelConfig(target_scale=2e-4)
SWITCHING_MODEL = ModelConfig(target_scale=0.01)


def _prepare(net_cfg: ModelConfig, raw_x: np.ndarray, y: np.ndarray, variant: str):
    rng = np.random.default_rng(net_cfg.init_seed)
    net = init_network(raw_x.shape[1], net_cfg.hidden_sizes, net_cfg.K, rng)
    net.feature_min = raw_x.min(axis=0)
    net.feature_max = raw_x.max(axis=0)
    net.target_offset = 0.5 * float(y.min() + y.max())
    net.target_scale = float(net_cfg.target_scale)
    z = (y - net.target_offset) / net.target_scale
    # Spread the component means over the target quantiles so every component
    # starts inside the data instead of at zero.
    W, b = net.heads["mu"]
    b[:] = np.quantile(z, (np.arange(net.K) + 0.5) / net.K)
    net.metadata = {"variant": variant, "extrapolation_margin": net_cfg.extrapolation_margin}
    return net, net.normalize_features(raw_x), z


def fit_iv_model(dataset: IVDataset, net_cfg: ModelConfig = IV_MODEL, train_cfg: TrainConfig = TrainConfig()):
    """Train the direct I-V model (inputs I_G, I_B, state -> V_L)."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    net, X, z = _prepare(net_cfg, dataset.features(), dataset.v_l, "iv")
    net.metadata["v_mid_rule"] = VMidRule.from_dataset(dataset).to_dict()
    trained, history = train(net, (X, z), train_cfg)
    return trained, history


def fit_switching_model(dataset: SwitchingDataset, net_cfg: ModelConfig = SWITCHING_MODEL,
                        train_cfg: TrainConfig = TrainConfig()):
    """Train the switching-current model (inputs I_B, state -> I_c or I_r)."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    net, X, z = _prepare(net_cfg, dataset.features(), dataset.i_switch, "switching")
    return train(net, (X, z), train_cfg)


def _check_range(net: MdnNetwork, raw: np.ndarray) -> None:
    margin = float(net.metadata.get("extrapolation_margin", 0.1))
    span = net.feature_max - net.feature_min
    lo = net.feature_min - margin * span
    hi = net.feature_max + margin * span
    if np.any(raw < lo) or np.any(raw > hi):
        warnings.warn(
            f"inputs outside training range (+-{margin:.0%} margin): "
            f"min {net.feature_min.tolist()}, max {net.feature_max.tolist()}",
            ExtrapolationWarning,
            stacklevel=3,
        )


def predict_batch(net: MdnNetwork, raw_features):
    """Physical-unit mixture parameters ``(mu, sigma, alpha)`` for raw feature rows."""
    raw = np.atleast_2d(np.asarray(raw_features, dtype=float))
    _check_range(net, raw)
    mu, sigma, alpha, _ = forward_batch(net, net.normalize_features(raw))
    return net.target_offset + net.target_scale * mu, net.target_scale * sigma, alpha


def _to_params(net: MdnNetwork, raw) -> MixtureParams:
    mu, sigma, alpha = predict_batch(net, raw)
    return MixtureParams(mu[0], sigma[0], alpha[0])


def iv_model_predict(net: MdnNetwork, i_g: float, i_b: float, state) -> MixtureParams:
    """Distribution of the load voltage (V) for the given drive and branch state."""
    if net.input_dim != 3:
        raise ValueError(f"I-V model needs input_dim 3, got {net.input_dim}")
    return _to_params(net, [[i_g, i_b, int(state)]])


def switching_model_predict(net: MdnNetwork, i_b: float, state) -> MixtureParams:
    """Distribution of the critical (state 0) or retrapping (state 1) gate current (uA)."""
    if net.input_dim != 2:
        raise ValueError(f"switching model needs input_dim 2, got {net.input_dim}")
    return _to_params(net, [[i_b, int(state)]])


def model_quantile(net: MdnNetwork, raw_features, q: float) -> float:
    """Inverse-transform sample in physical units for one feature row at quantile ``q``.

    The root is found in model units and mapped back affinely, which keeps
    the CDF residual tolerance meaningful regardless of the physical scale.
    """
    raw = np.atleast_2d(np.asarray(raw_features, dtype=float))
    _check_range(net, raw)
    mu, sigma, alpha, _ = forward_batch(net, net.normalize_features(raw))
    z = inverse_cdf(MixtureParams(mu[0], sigma[0], alpha[0]), q)
    return net.target_offset + net.target_scale * z


def v_mid_rule_of(net: MdnNetwork) -> VMidRule:
    try:
        return VMidRule.from_dict(net.metadata["v_mid_rule"])
    except KeyError:
        raise ValueError("network carries no v_mid rule (not an I-V model?)") from None


# --- transient simulation ----------------------------------------------------

REGEN_INPUTS = ("gate", "bias", "either")


def derivative_sign_changes(x) -> np.ndarray:
    """Indices ``k`` where the step ``x[k] - x[k-1]`` reverses the last nonzero direction."""
    x = np.asarray(x, dtype=float)
    out = []
    last = 0.0
    for k in range(1, x.size):
        s = np.sign(x[k] - x[k - 1])
        if s == 0:
            continue
        if last != 0 and s != last:
            out.append(k)
        last = s
    return np.asarray(out, dtype=int)


@dataclass
class TransientTrace:
    t: np.ndarray
    i_g: np.ndarray
    i_b: np.ndarray
    state: np.ndarray
    v_l: np.ndarray
    q_events: np.ndarray
    q: np.ndarray = field(default=None)

    def q_event_mask(self) -> np.ndarray:
        mask = np.zeros(self.t.size, dtype=int)
        mask[self.q_events] = 1
        return mask


def transient_simulate(net: MdnNetwork, t, i_g, i_b, policy: QuantilePolicy,
                       v_mid_rule: VMidRule | None = None, seed: int = 0,
                       regen_input: str = "gate",
                       initial_state=DeviceState.SUPERCONDUCTING) -> TransientTrace:
    """Step the I-V model through a drive waveform.

    At each step the model is evaluated with the state left by the previous
    step, a load voltage is drawn at the policy's quantile, and the state
    becomes resistive above the midpoint voltage and superconducting below.
    A ``sweep_boundary`` event is raised whenever the designated drive's
    time derivative changes sign.  ``state`` in the trace is the state after
    each step's update.
    """
    if regen_input not in REGEN_INPUTS:
        raise ValueError(f"regen_input must be one of {REGEN_INPUTS}")
    t = np.asarray(t, dtype=float)
    i_g = np.asarray(i_g, dtype=float)
    i_b = np.asarray(i_b, dtype=float)
    if not (t.size == i_g.size == i_b.size) or t.size == 0:
        raise ValueError("drive series must be non-empty and of equal length")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(i_g)) and np.all(np.isfinite(i_b))):
        raise ValueError("drive series must be finite")
    rule = v_mid_rule if v_mid_rule is not None else v_mid_rule_of(net)

    boundaries = set()
    if regen_input in ("gate", "either"):
        boundaries |= set(derivative_sign_changes(i_g).tolist())
    if regen_input in ("bias", "either"):
        boundaries |= set(derivative_sign_changes(i_b).tolist())

    ctx = SampleContext(policy, np.random.default_rng(seed))
    state = int(initial_state)
    states = np.empty(t.size, dtype=int)
    v_l = np.empty(t.size)
    qs = np.empty(t.size)
    events = []
    for k in range(t.size):
        event = "sweep_boundary" if k in boundaries else "step"
        if ctx.advance(event):
            events.append(k)
        qs[k] = ctx.current_q
        v = model_quantile(net, [i_g[k], i_b[k], state], ctx.current_q)
        v_mid = rule(i_b[k])
        if v > v_mid:
            state = int(DeviceState.RESISTIVE)
        elif v < v_mid:
            state = int(DeviceState.SUPERCONDUCTING)
        v_l[k] = v
        states[k] = state
    return TransientTrace(t, i_g, i_b, states, v_l, np.asarray(events, dtype=int), qs)


def triangle_waveform(periods: int, points_per_period: int, i_g_max: float, i_b: float,
                      dt: float = 1e-9, phase: float = 0.25):
    """Triangular gate drive between 0 and ``i_g_max`` at constant bias.

    ``phase`` is the fraction of a period elapsed at ``t = 0``; the default
    starts mid-rise so the record holds exactly two direction reversals per
    period.  Returns ``(t, i_g, i_b)``.
    """
    n = periods * points_per_period
    k = np.arange(n)
    frac = (k / points_per_period + phase) % 1.0
    tri = np.where(frac < 0.5, 2.0 * frac, 2.0 - 2.0 * frac)
    return k * dt, i_g_max * tri, np.full(n, float(i_b))


def write_trace_csv(trace: TransientTrace, path) -> None:
    _write_csv(path, TRACE_HEADER,
               [trace.t, trace.i_g, trace.i_b, trace.state, trace.v_l, trace.q_event_mask()],
               [_fmt_float, _fmt_float, _fmt_float, _fmt_int, _fmt_float, _fmt_int])


def write_waveform_csv(t, i_g, i_b, path) -> None:
    _write_csv(path, WAVEFORM_HEADER, [t, i_g, i_b], [_fmt_float] * 3)


def read_waveform_csv(path):
    t, i_g, i_b = _read_csv(path, WAVEFORM_HEADER, [_parse_finite, _parse_current, _parse_current])
    if not t:
        raise SchemaError(f"{path}: waveform has no samples")
    return np.asarray(t), np.asarray(i_g), np.asarray(i_b)
