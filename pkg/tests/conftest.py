import json
import time
from pathlib import Path

import numpy as np
import pytest

from stochmdn import cli
from stochmdn.config import load_config
from stochmdn.device import (
    GroundTruthConfig,
    ModelConfig,
    SweepProtocol,
    fit_iv_model,
    fit_switching_model,
    generate_dataset,
)
from stochmdn.network import TrainConfig

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "configs" / "default.json"
SMALL_CONFIG = ROOT / "configs" / "small.json"

SMALL_PROTOCOL = SweepProtocol(repeats=150)


@pytest.fixture(scope="session")
def truth():
    return GroundTruthConfig()


@pytest.fixture(scope="session")
def small_data(truth):
    return generate_dataset(truth, SMALL_PROTOCOL, seed=101)


@pytest.fixture(scope="session")
def small_iv_model(small_data):
    iv, _ = small_data
    net, hist = fit_iv_model(iv, ModelConfig(hidden_sizes=(16, 16), K=3, target_scale=2e-4),
                             TrainConfig(epochs=8, batch_size=512, learning_rate=3e-3, rng_seed=1))
    return net, hist


@pytest.fixture(scope="session")
def small_switching_model(small_data):
    _, sw = small_data
    net, hist = fit_switching_model(sw, ModelConfig(hidden_sizes=(16, 16), K=2, target_scale=0.01),
                                    TrainConfig(epochs=300, batch_size=64, learning_rate=3e-3, rng_seed=1))
    return net, hist


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """Full generate -> train (both variants) -> eval -> transient -> export run on the default config."""
    out = tmp_path_factory.mktemp("pipeline")
    cfg = load_config(DEFAULT_CONFIG)
    timings = {}
    start = time.perf_counter()
    for argv in (["generate"], ["train", "--variant", "iv"], ["train", "--variant", "switching"],
                 ["eval"], ["transient"], ["export"]):
        t0 = time.perf_counter()
        code = cli.main(argv + ["--config", str(DEFAULT_CONFIG), "--out", str(out)])
        timings[" ".join(argv)] = time.perf_counter() - t0
        assert code == 0, f"stage {argv} exited with {code}"
    run_dir = cfg.run_dir(out)
    return {
        "config": cfg,
        "run_dir": run_dir,
        "elapsed_s": time.perf_counter() - start,
        "timings": timings,
        "summary": json.loads((run_dir / "report" / "summary.json").read_text()),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
