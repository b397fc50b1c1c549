"""Mixture density network: a ReLU MLP with three heads (mean, sigma, weight).

Forward and backward passes are written out by hand on numpy arrays so the
exported compact model can replay exactly the same arithmetic.  Training
uses mini-batch AdamW with decoupled weight decay.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .mixture import MixtureParams, gnll_grad_arrays

__all__ = [
    "HEADS",
    "MdnNetwork",
    "OptimizerState",
    "TrainConfig",
    "TrainingError",
    "WeightFileError",
    "activation_alpha",
    "activation_relu",
    "activation_sigma",
    "adamw_step",
    "backward",
    "backward_batch",
    "forward",
    "forward_batch",
    "init_network",
    "load_weights",
    "save_weights",
    "train",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HEADS = ("mu", "sigma", "alpha")
EPS = float(np.finfo(float).eps)


class TrainingError(ArithmeticError):
    """Training produced a non-finite loss or gradient."""


class WeightFileError(ValueError):
    """A weight file could not be parsed or violates the network invariants."""


def activation_relu(x):
    return np.maximum(x, 0.0)


def activation_sigma(x):
    """ELU shifted by ``1 + eps``: always above 0.5, continuous at 0."""
    x = np.asarray(x, dtype=float)
    neg = 0.5 * np.expm1(np.minimum(x, 0.0)) + 1.0 + EPS
    out = np.where(x >= 0, x + 1.0 + EPS, neg)
    return float(out) if out.ndim == 0 else out


def _activation_sigma_grad(x):
    return np.where(x >= 0, 1.0, 0.5 * np.exp(np.minimum(x, 0.0)))


def activation_alpha(logits):
    """Softmax over the last axis, shifted by the max for stability."""
    z = np.asarray(logits, dtype=float)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class MdnNetwork:
    """Weights of an MDN plus the affine maps between physical and model units.

    ``layers`` holds ``(W, b)`` pairs with ``W`` shaped ``(fan_in, fan_out)``;
    ``heads`` maps each of ``mu``, ``sigma``, ``alpha`` to its ``(W, b)``.
    Features are scaled to [-1, 1] with ``feature_min``/``feature_max``;
    targets satisfy ``physical = target_offset + target_scale * model``.
    """

    input_dim: int
    hidden_sizes: tuple
    K: int
    layers: list
    heads: dict
    feature_min: np.ndarray = None
    feature_max: np.ndarray = None
    target_offset: float = 0.0
    target_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.feature_min is None:
            self.feature_min = -np.ones(self.input_dim)
        if self.feature_max is None:
            self.feature_max = np.ones(self.input_dim)
        self.feature_min = np.asarray(self.feature_min, dtype=float)
        self.feature_max = np.asarray(self.feature_max, dtype=float)
        self.validate()

    def validate(self):
        if self.input_dim < 1 or self.K < 1 or any(h < 1 for h in self.hidden_sizes):
            raise WeightFileError("input_dim, K and hidden sizes must be positive")
        if len(self.layers) != len(self.hidden_sizes):
            raise WeightFileError(
                f"{len(self.layers)} layers for hidden_sizes {list(self.hidden_sizes)}"
            )
        fan_in = self.input_dim
        for i, ((W, b), width) in enumerate(zip(self.layers, self.hidden_sizes)):
            if W.shape != (fan_in, width) or b.shape != (width,):
                raise WeightFileError(
                    f"layer {i}: expected W {(fan_in, width)} and b {(width,)}, "
                    f"got {W.shape} and {b.shape}"
                )
            fan_in = width
        if set(self.heads) != set(HEADS):
            raise WeightFileError(f"heads must be exactly {HEADS}, got {sorted(self.heads)}")
        for name in HEADS:
            W, b = self.heads[name]
            if W.shape != (fan_in, self.K) or b.shape != (self.K,):
                raise WeightFileError(
                    f"head {name!r}: expected W {(fan_in, self.K)} and b {(self.K,)} for K={self.K}, "
                    f"got {W.shape} and {b.shape}"
                )
        if self.feature_min.shape != (self.input_dim,) or self.feature_max.shape != (self.input_dim,):
            raise WeightFileError("normalization min/max must have one entry per input feature")
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise WeightFileError("network parameters must be finite")
        if not self.target_scale > 0:
            raise WeightFileError("target_scale must be positive")

    def params(self) -> list:
        """All parameter arrays in canonical order (layers, then mu, sigma, alpha heads)."""
        out = []
        for W, b in self.layers:
            out += [W, b]
        for name in HEADS:
            out += list(self.heads[name])
        return out

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params()))

    def with_params(self, flat_params: list) -> "MdnNetwork":
        """Copy of this network with parameters replaced (same canonical order)."""
        it = iter(flat_params)
        layers = [(np.array(next(it)), np.array(next(it))) for _ in self.layers]
        heads = {name: (np.array(next(it)), np.array(next(it))) for name in HEADS}
        return MdnNetwork(
            self.input_dim, self.hidden_sizes, self.K, layers, heads,
            self.feature_min.copy(), self.feature_max.copy(),
            self.target_offset, self.target_scale, copy.deepcopy(self.metadata),
        )

    def copy(self) -> "MdnNetwork":
        return self.with_params(self.params())

    def normalize_features(self, raw):
        """Affine map of raw features onto [-1, 1]; constant features map to 0."""
        raw = np.asarray(raw, dtype=float)
        span = self.feature_max - self.feature_min
        safe = np.where(span > 0, span, 1.0)
        out = 2.0 * (raw - self.feature_min) / safe - 1.0
        return np.where(span > 0, out, 0.0)


def init_network(input_dim: int, hidden_sizes, K: int, rng: np.random.Generator) -> MdnNetwork:
    """Fan-in scaled uniform init: ``U(-sqrt(6/fan_in), +)`` for ReLU layers,
    ``U(-sqrt(1/fan_in), +)`` for the heads; biases start at zero."""
    layers = []
    fan_in = input_dim
    for width in hidden_sizes:
        bound = np.sqrt(6.0 / fan_in)
        layers.append((rng.uniform(-bound, bound, (fan_in, width)), np.zeros(width)))
        fan_in = width
    heads = {}
    bound = np.sqrt(1.0 / fan_in)
    for name in HEADS:
        heads[name] = (rng.uniform(-bound, bound, (fan_in, K)), np.zeros(K))
    return MdnNetwork(input_dim, tuple(hidden_sizes), K, layers, heads)


def forward_batch(net: MdnNetwork, X):
    """Batched forward pass on normalized features ``X`` of shape ``(n, input_dim)``.

    Returns ``(mu, sigma, alpha, cache)`` with each head shaped ``(n, K)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"expected inputs of shape (n, {net.input_dim}), got {X.shape}")
    acts = [X]
    pre = []
    h = X
    for W, b in net.layers:
        a = h @ W + b
        pre.append(a)
        h = activation_relu(a)
        acts.append(h)
    W, b = net.heads["mu"]
    mu = h @ W + b
    W, b = net.heads["sigma"]
    s_raw = h @ W + b
    sigma = activation_sigma(s_raw)
    W, b = net.heads["alpha"]
    alpha = activation_alpha(h @ W + b)
    return mu, sigma, alpha, (acts, pre, s_raw)


def forward(net: MdnNetwork, x) -> MixtureParams:
    """Mixture predicted for one normalized feature vector (model units)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.input_dim:
        raise ValueError(f"expected {net.input_dim} features, got {x.size}")
    mu, sigma, alpha, _ = forward_batch(net, x[None, :])
    return MixtureParams(mu[0], sigma[0], alpha[0])


def backward_batch(net: MdnNetwork, X, y):
    """Mean loss over the batch and its gradient for every parameter.

    Gradients come back as a list in :meth:`MdnNetwork.params` order.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    mu, sigma, alpha, (acts, pre, s_raw) = forward_batch(net, X)
    n = y.size
    loss, d_mu, d_sigma, _, resp = gnll_grad_arrays(mu, sigma, alpha, y)
    # Softmax Jacobian collapses to alpha - responsibility for the NLL.
    g_mu = d_mu / n
    g_s = d_sigma * _activation_sigma_grad(s_raw) / n
    g_a = (alpha - resp) / n

    h = acts[-1]
    head_grads = {}
    dh = np.zeros_like(h)
    for name, g in (("mu", g_mu), ("sigma", g_s), ("alpha", g_a)):
        W, _ = net.heads[name]
        head_grads[name] = (h.T @ g, g.sum(axis=0))
        dh += g @ W.T

    layer_grads = []
    for i in range(len(net.layers) - 1, -1, -1):
        da = dh * (pre[i] > 0)
        W, _ = net.layers[i]
        layer_grads.append((acts[i].T @ da, da.sum(axis=0)))
        if i > 0:
            dh = da @ W.T
    layer_grads.reverse()

    grads = []
    for gW, gb in layer_grads:
        grads += [gW, gb]
    for name in HEADS:
        grads += list(head_grads[name])
    return float(np.mean(loss)), grads


def backward(net: MdnNetwork, x, target: float) -> list:
    """Gradient of the single-point loss w.r.t. every weight and bias."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return backward_batch(net, x, [target])[1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_opt: float = 1e-8
    weight_decay: float = 1e-4
    epochs: int = 200
    batch_size: int = 256
    rng_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon_opt > 0:
            raise ValueError("epsilon_opt must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class OptimizerState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, net: MdnNetwork) -> "OptimizerState":
        ps = net.params()
        return cls([np.zeros_like(p) for p in ps], [np.zeros_like(p) for p in ps], 0)


def adamw_step(net: MdnNetwork, state: OptimizerState, grads: list, cfg: TrainConfig):
    """One AdamW update in place; returns ``(net, state)``.

    ``p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)``
    """
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(net.params(), grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + cfg.epsilon_opt) + cfg.weight_decay * p
        p -= cfg.learning_rate * update
    return net, state


def train(net: MdnNetwork, dataset, cfg: TrainConfig):
    """Mini-batch AdamW on ``dataset = (X, y)`` in model units.

    Returns ``(trained_net, history)`` where ``history`` holds the mean loss
    of each epoch as seen during that epoch.  The input network is not
    modified.
    """
    X, y = dataset
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if X.shape[0] != n:
        raise ValueError(f"{X.shape[0]} feature rows but {n} targets")
    net = net.copy()
    state = OptimizerState.zeros_like(net)
    rng = np.random.default_rng(cfg.rng_seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = backward_batch(net, X[idx], y[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start} (loss={loss!r})"
                )
            adamw_step(net, state, grads, cfg)
            total += loss * idx.size
        history.append(total / n)
        logger.debug("epoch %d loss %.6f", epoch, history[-1])
    return net, history


def _pair_to_json(W, b):
    return {"W": W.tolist(), "b": b.tolist()}


def save_weights(net: MdnNetwork) -> bytes:
    """Serialize to the JSON weight-file format (floats use shortest round-trip repr)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "input_dim": net.input_dim,
        "hidden_sizes": list(net.hidden_sizes),
        "K": net.K,
        "normalization": {
            "min": net.feature_min.tolist(),
            "max": net.feature_max.tolist(),
            "target_offset": float(net.target_offset),
            "target_scale": float(net.target_scale),
        },
        "layers": [_pair_to_json(W, b) for W, b in net.layers],
        "heads": {name: _pair_to_json(*net.heads[name]) for name in HEADS},
        "metadata": net.metadata,
    }
    return (json.dumps(doc, indent=1, allow_nan=False) + "\n").encode("utf-8")


def _pair_from_json(obj, where):
    try:
        W = np.array(obj["W"], dtype=float)
        b = np.array(obj["b"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFileError(f"{where}: malformed W/b ({exc})") from None
    return W, b


def load_weights(data) -> MdnNetwork:
    """Parse a weight file produced by :func:`save_weights`."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WeightFileError(
            f"malformed weight file at line {exc.lineno}, column {exc.colno} (offset {exc.pos}): {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise WeightFileError("weight file must contain a JSON object")
    try:
        if doc["schema_version"] != SCHEMA_VERSION:
            raise WeightFileError(f"unsupported schema_version {doc['schema_version']!r}")
        norm = doc["normalization"]
        layers = [_pair_from_json(p, f"layers[{i}]") for i, p in enumerate(doc["layers"])]
        heads = {name: _pair_from_json(doc["heads"][name], f"heads.{name}") for name in HEADS}
        return MdnNetwork(
            int(doc["input_dim"]), tuple(doc["hidden_sizes"]), int(doc["K"]), layers, heads,
            np.array(norm["min"], dtype=float), np.array(norm["max"], dtype=float),
            float(norm.get("target_offset", 0.0)), float(norm.get("target_scale", 1.0)),
            doc.get("metadata", {}),
        )
    except KeyError as exc:
        raise WeightFileError(f"weight file missing field {exc.args[0]!r}") from None
