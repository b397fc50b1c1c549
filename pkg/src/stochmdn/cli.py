"""Command-line pipeline: ``generate``, ``train``, ``eval``, ``transient``, ``export``.

Every command takes ``--config``; outputs land in ``<out>/run-<hash>`` where
the hash covers the resolved config (including any ``--seed`` override), so
the stages of one run find each other's files without extra flags.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import device, evalsuite, export
from .config import ConfigError, RunConfig, load_config
from .device import SchemaError
from .network import TrainingError, WeightFileError, load_weights, save_weights
from .sampling import ConvergenceError, QuantilePolicy

logger = logging.getLogger("stochmdn")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

IV_CSV = "iv_dataset.csv"
SWITCHING_CSV = "switching_dataset.csv"


class CommandError(ValueError):
    """A missing input artifact or similar user-facing problem."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(run_dir: Path, stage: str, cfg: RunConfig, **extra) -> Path:
    doc = {"stage": stage, "seed": cfg.seed, "config_hash": cfg.config_hash(), **extra}
    path = run_dir / f"manifest_{stage}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _run_dir(cfg: RunConfig, out) -> Path:
    run_dir = cfg.run_dir(out)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        probe = run_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CommandError(f"output directory {run_dir} is not writable: {exc}") from None
    return run_dir


def _require(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise CommandError(f"missing {what}: {path}")
    return Path(path)


def cmd_generate(cfg: RunConfig, run_dir: Path) -> dict:
    iv, sw = device.generate_dataset(cfg.ground_truth, cfg.protocol, cfg.seed)
    device.write_iv_csv(iv, run_dir / IV_CSV)
    device.write_switching_csv(sw, run_dir / SWITCHING_CSV)
    rows = {"iv": len(iv), "switching": len(sw)}
    _write_manifest(run_dir, "generate", cfg, rows=rows,
                    expected_rows={"iv": cfg.protocol.iv_rows(), "switching": cfg.protocol.switching_rows()},
                    files={IV_CSV: _sha256(run_dir / IV_CSV), SWITCHING_CSV: _sha256(run_dir / SWITCHING_CSV)})
    print(f"generated {rows['iv']} I-V rows and {rows['switching']} switching rows in {run_dir}")
    return rows


def cmd_train(cfg: RunConfig, run_dir: Path, variant: str, dataset_path=None):
    tcfg = cfg.train_config(variant)
    mcfg = cfg.models[variant]
    if variant == "iv":
        path = _require(dataset_path or run_dir / IV_CSV, "I-V dataset")
        net, history = device.fit_iv_model(device.read_iv_csv(path), mcfg, tcfg)
    else:
        path = _require(dataset_path or run_dir / SWITCHING_CSV, "switching dataset")
        net, history = device.fit_switching_model(device.read_switching_csv(path), mcfg, tcfg)
    weights = run_dir / f"weights_{variant}.json"
    weights.write_bytes(save_weights(net))
    loss_path = run_dir / f"loss_{variant}.csv"
    with loss_path.open("w") as fh:
        fh.write("epoch,mean_gnll\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v!r}\n")
    # paths inside the run directory are recorded relative to it so manifests do not depend on --out
    shown = path.name if path.resolve().parent == run_dir.resolve() else str(path)
    _write_manifest(run_dir, f"train_{variant}", cfg, dataset=shown, dataset_sha256=_sha256(path),
                    weights_sha256=_sha256(weights), epochs=len(history), final_loss=history[-1])
    print(f"trained {variant} model: initial loss {history[0]:.6f}, final loss {history[-1]:.6f} -> {weights}")
    return net, history


def _load_net(path: Path):
    return load_weights(_require(path, "weight file").read_bytes())


def cmd_eval(cfg: RunConfig, run_dir: Path, weights_path=None, dataset_path=None) -> dict:
    net = _load_net(weights_path or run_dir / "weights_iv.json")
    dataset = device.read_iv_csv(_require(dataset_path or run_dir / IV_CSV, "I-V dataset"))
    ev = cfg.evaluation
    grid = evalsuite.default_gate_grid(ev.grid_start_uA, ev.grid_stop_uA, ev.grid_step_uA)
    rule = device.v_mid_rule_of(net)
    rows, summary = evalsuite.switching_report(net, dataset, grid, cfg.protocol.bias_levels_uA, rule,
                                               cfg.ground_truth)
    report = run_dir / "report"
    report.mkdir(exist_ok=True)
    evalsuite.write_rows_csv(rows, report / "switching_curves.csv")
    table = [{"i_b_uA": float(b), **summary["per_bias"][repr(float(b))]} for b in cfg.protocol.bias_levels_uA]
    evalsuite.write_rows_csv(table, report / "table1.csv")
    dist = evalsuite.distribution_report(net, dataset, ev.distribution_gate_uA, ev.distribution_bias_uA)
    evalsuite.write_rows_csv(dist, report / "distributions.csv")

    sw_weights = run_dir / "weights_switching.json"
    sw_data = Path(run_dir / SWITCHING_CSV)
    if sw_weights.exists() and sw_data.exists():
        sw_rows = _switching_band_rows(load_weights(sw_weights.read_bytes()), device.read_switching_csv(sw_data),
                                       cfg.protocol.bias_levels_uA)
        evalsuite.write_rows_csv(sw_rows, report / "switching_model.csv")
    evalsuite.write_summary_json(summary, report / "summary.json")
    for b in cfg.protocol.bias_levels_uA:
        m = summary["per_bias"][repr(float(b))]
        print(f"I_B={b:6.2f} uA  MAE={m['mae_pct']:.3f}%  R2={m['r2']:.4f}")
    print(f"mean MAE={summary['mean_mae_pct']:.3f}%  mean R2={summary['mean_r2']:.4f}")
    return summary


def _switching_band_rows(net, dataset, bias_levels):
    from .mixture import mixture_mean, mixture_std

    rows = []
    for b in bias_levels:
        for state in (device.DeviceState.SUPERCONDUCTING, device.DeviceState.RESISTIVE):
            sel = (dataset.i_b == b) & (dataset.state == state)
            if not sel.any():
                continue
            p = device.switching_model_predict(net, b, state)
            mu, sd = mixture_mean(p), mixture_std(p)
            x = dataset.i_switch[sel]
            rows.append({"i_b_uA": float(b), "state": int(state), "mu_uA": mu, "mu_minus_2sigma_uA": mu - 2 * sd,
                         "mu_plus_2sigma_uA": mu + 2 * sd,
                         "coverage": float(np.mean((x >= mu - 2 * sd) & (x <= mu + 2 * sd)))})
    return rows


def cmd_transient(cfg: RunConfig, run_dir: Path, weights_path=None, waveform_path=None) -> dict:
    net = _load_net(weights_path or run_dir / "weights_iv.json")
    if waveform_path is not None:
        t, i_g, i_b = device.read_waveform_csv(_require(Path(waveform_path), "waveform CSV"))
    else:
        tc = cfg.transient
        t, i_g, i_b = device.triangle_waveform(tc.periods, tc.points_per_period, tc.i_g_max_uA, tc.i_b_uA, tc.dt_s)
        device.write_waveform_csv(t, i_g, i_b, run_dir / "waveform.csv")
    rule = device.v_mid_rule_of(net)
    regen = cfg.sampling.regen_input
    counts = {}
    for q in cfg.transient.quantiles:
        trace = device.transient_simulate(net, t, i_g, i_b, QuantilePolicy.fixed(q), rule, cfg.seed, regen)
        name = f"trace_q{q!r}.csv"
        device.write_trace_csv(trace, run_dir / name)
        counts[name] = int(trace.q_events.size)
    trace = device.transient_simulate(net, t, i_g, i_b, cfg.sampling.policy(), rule, cfg.seed, regen)
    device.write_trace_csv(trace, run_dir / "trace_policy.csv")
    counts["trace_policy.csv"] = int(trace.q_events.size)
    print(f"transient traces written to {run_dir}; q events: {counts}")
    return counts


def cmd_export(cfg: RunConfig, run_dir: Path, weights_path=None) -> float:
    net = _load_net(weights_path or run_dir / "weights_iv.json")
    ec = cfg.export
    bundle = export.ExportBundle(net, cfg.sampling.policy(), None, ec.module_name, ec.seed,
                                 max_K=ec.max_K, max_width=ec.max_width)
    text = export.emit_veriloga(bundle)
    worst = export.check_equivalence(bundle, text, ec.equivalence_samples, cfg.seed, ec.equivalence_tol_V)
    path = run_dir / f"{ec.module_name}.va"
    path.write_text(text)
    print(f"exported {path} (max native/interpreted deviation {worst:.3e} V)")
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochmdn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="root directory for run outputs")

    common(sub.add_parser("generate", help="synthesize I-V and switching datasets"))
    p = sub.add_parser("train", help="train a model variant")
    common(p)
    p.add_argument("--variant", choices=("iv", "switching"), default="iv")
    p.add_argument("--dataset", default=None)
    p = sub.add_parser("eval", help="switching-probability and distribution reports")
    common(p)
    p.add_argument("--weights", default=None)
    p.add_argument("--dataset", default=None)
    p = sub.add_parser("transient", help="transient traces at fixed and policy quantiles")
    common(p)
    p.add_argument("--weights", default=None)
    p.add_argument("--waveform", default=None, help="CSV with t_s,i_g_uA,i_b_uA")
    p = sub.add_parser("export", help="emit the Verilog-A compact model")
    common(p)
    p.add_argument("--weights", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        run_dir = _run_dir(cfg, args.out)
        opt = lambda name: Path(getattr(args, name)) if getattr(args, name, None) else None  # noqa: E731
        if args.command == "generate":
            cmd_generate(cfg, run_dir)
        elif args.command == "train":
            cmd_train(cfg, run_dir, args.variant, opt("dataset"))
        elif args.command == "eval":
            cmd_eval(cfg, run_dir, opt("weights"), opt("dataset"))
        elif args.command == "transient":
            cmd_transient(cfg, run_dir, opt("weights"), opt("waveform"))
        elif args.command == "export":
            cmd_export(cfg, run_dir, opt("weights"))
    except (ConvergenceError, TrainingError, export.EquivalenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, SchemaError, WeightFileError, export.ExportError, CommandError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
