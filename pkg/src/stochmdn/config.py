"""Run configuration: one JSON document covering every pipeline stage."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .device import GroundTruthConfig, ModelConfig, SweepProtocol, IV_MODEL, SWITCHING_MODEL, REGEN_INPUTS
from .network import TrainConfig
from .sampling import QuantilePolicy

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Invalid or incomplete run configuration; the message names the field."""


@dataclass(frozen=True)
class EvaluationConfig:
    grid_start_uA: float = 0.0
    grid_stop_uA: float = 3.0
    grid_step_uA: float = 0.05
    distribution_gate_uA: tuple = (1.35, 1.4, 1.45, 1.5, 1.55, 1.6)
    distribution_bias_uA: float = 23.5

    def __post_init__(self):
        if not self.grid_step_uA > 0 or self.grid_stop_uA <= self.grid_start_uA:
            raise ValueError("grid needs a positive step and stop > start")


@dataclass(frozen=True)
class TransientConfig:
    """Default drive when no waveform CSV is given: triangular gate current at constant bias."""

    periods: int = 2
    points_per_period: int = 400
    i_g_max_uA: float = 3.0
    i_b_uA: float = 23.5
    dt_s: float = 1e-9
    quantiles: tuple = (0.05, 0.5, 0.95)

    def __post_init__(self):
        if self.periods < 1 or self.points_per_period < 4:
            raise ValueError("need at least one period of four points")
        if not all(0 < q < 1 for q in self.quantiles):
            raise ValueError("quantiles must lie in (0, 1)")


@dataclass(frozen=True)
class SamplingConfig:
    mode: str = "held_per_sweep"
    clip_low: float = 0.05
    clip_high: float = 0.95
    fixed_q: float | None = None
    regen_input: str = "gate"

    def __post_init__(self):
        self.policy()
        if self.regen_input not in REGEN_INPUTS:
            raise ValueError(f"regen_input must be one of {REGEN_INPUTS}")

    def policy(self) -> QuantilePolicy:
        return QuantilePolicy(self.mode, self.clip_low, self.clip_high, self.fixed_q)


@dataclass(frozen=True)
class ExportConfig:
    module_name: str = "hcryotron_mdn"
    seed: int = 1
    max_K: int = 16
    max_width: int = 128
    equivalence_samples: int = 100
    equivalence_tol_V: float = 1e-9


@dataclass(frozen=True)
class RunConfig:
    seed: int
    protocol: SweepProtocol
    output_dir: str = "runs"
    ground_truth: GroundTruthConfig = GroundTruthConfig()
    models: dict = field(default_factory=lambda: {"iv": IV_MODEL, "switching": SWITCHING_MODEL})
    training: dict = field(default_factory=lambda: {"iv": TrainConfig(), "switching": TrainConfig()})
    sampling: SamplingConfig = SamplingConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    transient: TransientConfig = TransientConfig()
    export: ExportConfig = ExportConfig()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def run_dir(self, out: str | None = None) -> Path:
        return Path(out if out is not None else self.output_dir) / f"run-{self.config_hash()[:12]}"

    def train_config(self, variant: str) -> TrainConfig:
        return self.training[variant]


def _check_type(value, annotation, path):
    ann = str(annotation)
    if ann in ("int",) and (not isinstance(value, int) or isinstance(value, bool)):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if ann in ("float",) and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if ann == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if ann == "str" and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if ann == "tuple":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _build(cls, data, path, required=()):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")
    for name in required:
        if name not in data:
            raise ConfigError(f"{path}.{name}: required field is missing")
    kwargs = {k: _check_type(v, names[k].type, f"{path}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(doc: dict, seed_override: int | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"config: unknown section(s) {', '.join(unknown)}")
    seed = seed_override if seed_override is not None else doc.get("seed")
    if seed is None:
        raise ConfigError("seed: required (set it in the config or pass --seed)")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
    if "protocol" not in doc:
        raise ConfigError("protocol: required section is missing")
    protocol = _build(SweepProtocol, doc["protocol"], "protocol", required=("bias_levels_uA",))
    models = {}
    training = {}
    for variant, default in (("iv", IV_MODEL), ("switching", SWITCHING_MODEL)):
        mdoc = dict(dataclasses.asdict(default))
        mdoc["init_seed"] = seed
        given = (doc.get("models") or {}).get(variant, {})
        if not isinstance(given, dict):
            raise ConfigError(f"models.{variant}: expected an object")
        mdoc.update(given)
        mdoc["hidden_sizes"] = list(mdoc["hidden_sizes"])
        models[variant] = _build(ModelConfig, mdoc, f"models.{variant}")
        tdoc = {"rng_seed": seed}
        tgiven = (doc.get("training") or {}).get(variant, {})
        if not isinstance(tgiven, dict):
            raise ConfigError(f"training.{variant}: expected an object")
        tdoc.update(tgiven)
        training[variant] = _build(TrainConfig, tdoc, f"training.{variant}")
    for section in ("models", "training"):
        extra = sorted(set(doc.get(section) or {}) - {"iv", "switching"})
        if extra:
            raise ConfigError(f"{section}: unknown variant(s) {', '.join(extra)}")
    truth = _build(GroundTruthConfig, doc.get("ground_truth"), "ground_truth")
    try:
        truth.check(protocol.bias_levels_uA)
    except ValueError as exc:
        raise ConfigError(f"ground_truth: {exc}") from None
    out = doc.get("output_dir", "runs")
    if not isinstance(out, str):
        raise ConfigError("output_dir: expected a string")
    return RunConfig(
        seed=seed,
        protocol=protocol,
        output_dir=out,
        ground_truth=truth,
        models=models,
        training=training,
        sampling=_build(SamplingConfig, doc.get("sampling"), "sampling"),
        evaluation=_build(EvaluationConfig, doc.get("evaluation"), "evaluation"),
        transient=_build(TransientConfig, doc.get("transient"), "transient"),
        export=_build(ExportConfig, doc.get("export"), "export"),
    )


def load_config(path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return config_from_dict(doc, seed_override)
