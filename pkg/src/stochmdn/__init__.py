"""Stochastic mixture-density device models for superconducting heater cryotrons.

Gaussian-mixture math, a hand-written MLP with AdamW, quantile sampling,
a synthetic device simulator, validation metrics and a Verilog-A exporter.
"""

from .mixture import MixtureParams, cdf, gnll_batch, gnll_point, pdf
from .network import MdnNetwork, TrainConfig, forward, init_network, load_weights, save_weights, train
from .sampling import ConvergenceError, QuantilePolicy, SampleContext, inverse_cdf, standard_sample

__all__ = [
    "ConvergenceError",
    "MdnNetwork",
    "MixtureParams",
    "QuantilePolicy",
    "SampleContext",
    "TrainConfig",
    "cdf",
    "forward",
    "gnll_batch",
    "gnll_point",
    "init_network",
    "inverse_cdf",
    "load_weights",
    "pdf",
    "save_weights",
    "standard_sample",
    "train",
]

__version__ = "0.1.0"
