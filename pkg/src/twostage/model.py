"""Dense rectifier network with a body/head split, trained with RMSprop.

The body maps inputs to features (the activations fed to the classifier
head). The head is one hidden rectifier layer followed by softmax. All
arithmetic is float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, make_rng

FORMAT_VERSION = 1
LOG_CLAMP = 1e-15

ALL_PARAMS = "all"
HEAD_ONLY = "head"


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    body_dims: tuple[int, ...] = (64, 32)
    head_hidden: int = 32
    num_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "body_dims", tuple(int(d) for d in self.body_dims))
        if not self.body_dims:
            raise ValueError("body_dims must not be empty")
        dims = (self.input_dim, *self.body_dims, self.head_hidden, self.num_classes)
        if min(dims) < 1:
            raise ValueError(f"all layer sizes must be >= 1, got {dims}")

    @property
    def feature_dim(self) -> int:
        return self.body_dims[-1]

    def layer_shapes(self) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        widths = (self.input_dim, *self.body_dims)
        body = list(zip(widths[:-1], widths[1:]))
        head = [(self.feature_dim, self.head_hidden), (self.head_hidden, self.num_classes)]
        return body, head


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-4
    rho: float = 0.9
    epsilon: float = 1e-7
    seed: int = 0
    scope: str = ALL_PARAMS

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.scope not in (ALL_PARAMS, HEAD_ONLY):
            raise ValueError(f"scope must be {ALL_PARAMS!r} or {HEAD_ONLY!r}")


@dataclass
class Network:
    """Parameters as flat lists ``[W0, b0, W1, b1, ...]``."""

    config: NetConfig
    body_params: list[np.ndarray]
    head_params: list[np.ndarray] = field(default_factory=list)

    def copy(self) -> "Network":
        return Network(
            self.config,
            [p.copy() for p in self.body_params],
            [p.copy() for p in self.head_params],
        )


def init(cfg: NetConfig, rng: np.random.Generator) -> Network:
    """He-normal weights (variance 2 / fan_in), zero biases."""
    body_shapes, head_shapes = cfg.layer_shapes()

    def build(shapes):
        params = []
        for fan_in, fan_out in shapes:
            params.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        return params

    body = build(body_shapes)
    head = build(head_shapes)
    return Network(cfg, body, head)


def _relu(z):
    return np.maximum(z, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(X, width):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError(f"expected a batch x {width} matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinite values")
    return X


def _body_forward(params, X):
    acts = [X]
    pre = []
    for W, b in zip(params[0::2], params[1::2]):
        z = acts[-1] @ W + b
        pre.append(z)
        acts.append(_relu(z))
    return acts, pre


def _head_forward(params, feats):
    Wh, bh, Wo, bo = params
    zh = feats @ Wh + bh
    h = _relu(zh)
    logits = h @ Wo + bo
    return softmax(logits), {"feats": feats, "zh": zh, "h": h}


def extract_features(net: Network, X) -> np.ndarray:
    """Post-rectifier output of the last body layer."""
    X = _check_input(X, net.config.input_dim)
    acts, _ = _body_forward(net.body_params, X)
    return acts[-1]


def head_forward(net: Network, feats) -> np.ndarray:
    feats = _check_input(feats, net.config.feature_dim)
    return _head_forward(net.head_params, feats)[0]


def forward(net: Network, X):
    """Class probabilities and the activations needed for backprop."""
    X = _check_input(X, net.config.input_dim)
    acts, pre = _body_forward(net.body_params, X)
    probs, head_cache = _head_forward(net.head_params, acts[-1])
    return probs, {"acts": acts, "pre": pre, **head_cache}


def predict(net: Network, X) -> np.ndarray:
    probs, _ = forward(net, X)
    return np.argmax(probs, axis=1)  # first maximum wins ties


def predict_from_features(net: Network, feats) -> np.ndarray:
    return np.argmax(head_forward(net, feats), axis=1)


def _xent(probs, y):
    picked = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(picked, LOG_CLAMP))))


def loss_and_grads(net: Network, X, y, scope: str = ALL_PARAMS, on_features: bool = False):
    """Mean categorical cross-entropy and its gradients.

    Returns ``(loss, body_grads, head_grads)``. With ``scope="head"`` the
    body gradients are an empty list and the features are constants. With
    ``on_features=True`` the rows of ``X`` are already body features.
    """
    y = np.asarray(y, dtype=np.int64)
    if len(y) < 1:
        raise ValueError("empty batch")
    if on_features:
        if scope != HEAD_ONLY:
            raise ValueError("feature-space inputs only support head-only gradients")
        feats = _check_input(X, net.config.feature_dim)
        acts, pre = None, None
    else:
        X = _check_input(X, net.config.input_dim)
        acts, pre = _body_forward(net.body_params, X)
        feats = acts[-1]
    probs, cache = _head_forward(net.head_params, feats)
    loss = _xent(probs, y)

    B = len(y)
    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    Wh, _, Wo, _ = net.head_params
    dWo = cache["h"].T @ dlogits
    dbo = dlogits.sum(axis=0)
    dzh = (dlogits @ Wo.T) * (cache["zh"] > 0)
    dWh = feats.T @ dzh
    dbh = dzh.sum(axis=0)
    head_grads = [dWh, dbh, dWo, dbo]
    if scope == HEAD_ONLY:
        return loss, [], head_grads

    body_grads: list[np.ndarray] = [None] * len(net.body_params)
    delta = dzh @ Wh.T
    for layer in reversed(range(len(pre))):
        delta = delta * (pre[layer] > 0)
        body_grads[2 * layer] = acts[layer].T @ delta
        body_grads[2 * layer + 1] = delta.sum(axis=0)
        if layer:
            delta = delta @ net.body_params[2 * layer].T
    return loss, body_grads, head_grads


def rmsprop_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: Sequence[np.ndarray], cfg: TrainConfig):
    """One RMSprop update; returns new ``(params, state)`` lists.

    s <- rho * s + (1 - rho) * g**2;  theta <- theta - lr * g / (sqrt(s) + eps)
    """
    if not (len(params) == len(grads) == len(state)):
        raise ValueError("params, grads and state must have the same length")
    new_params, new_state = [], []
    for i, (p, g, s) in enumerate(zip(params, grads, state)):
        if p.shape != g.shape or p.shape != s.shape:
            raise ValueError(f"shape mismatch at parameter {i}: {p.shape}, {g.shape}, {s.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise FloatingPointError(f"non-finite gradient in parameter {i} ({bad} entries)")
        s = cfg.rho * s + (1.0 - cfg.rho) * g * g
        denom = np.sqrt(s) + cfg.epsilon
        step = np.divide(cfg.learning_rate * g, denom, out=np.zeros_like(g), where=denom > 0)
        new_params.append(p - step)
        new_state.append(s)
    return new_params, new_state


def train(net: Network, ds: Dataset, cfg: TrainConfig, on_features: bool = False) -> Network:
    """Train a copy of ``net``; the input network is left untouched.

    ``epochs * ceil(N / batch_size)`` updates with a fresh per-epoch
    shuffle drawn from ``cfg.seed``. Head-only training never touches the
    body parameters; features are computed once up front.
    """
    if len(ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    if ds.labels.max() >= net.config.num_classes:
        raise ValueError("labels exceed the network's number of classes")
    net = net.copy()
    head_only = cfg.scope == HEAD_ONLY
    X = ds.features
    if head_only and not on_features:
        X = extract_features(net, X)
        on_features = True
    elif on_features and not head_only:
        raise ValueError("feature-space training requires scope='head'")
    y = ds.labels
    rng = make_rng(cfg.seed)
    head_state = [np.zeros_like(p) for p in net.head_params]
    body_state = [np.zeros_like(p) for p in net.body_params]
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            _, gb, gh = loss_and_grads(net, X[batch], y[batch], cfg.scope, on_features)
            net.head_params, head_state = rmsprop_step(net.head_params, gh, head_state, cfg)
            if not head_only:
                net.body_params, body_state = rmsprop_step(net.body_params, gb, body_state, cfg)
    return net


def mean_loss(net: Network, ds: Dataset) -> float:
    probs, _ = forward(net, ds.features)
    return _xent(probs, ds.labels)


def save_network(net: Network, path: str | Path) -> None:
    """Write ``net`` as an ``.npz`` archive (float64 arrays, JSON header)."""
    cfg = net.config
    header = {
        "format": "twostage-network",
        "version": FORMAT_VERSION,
        "input_dim": cfg.input_dim,
        "body_dims": list(cfg.body_dims),
        "head_hidden": cfg.head_hidden,
        "num_classes": cfg.num_classes,
    }
    arrays = {"header": np.array(json.dumps(header))}
    for i, p in enumerate(net.body_params):
        arrays[f"body_{i}"] = np.asarray(p, dtype="<f8")
    for i, p in enumerate(net.head_params):
        arrays[f"head_{i}"] = np.asarray(p, dtype="<f8")
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_network(path: str | Path) -> Network:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != "twostage-network" or header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported network file")
        cfg = NetConfig(header["input_dim"], tuple(header["body_dims"]), header["head_hidden"], header["num_classes"])
        body = [data[f"body_{i}"].astype(np.float64) for i in range(2 * len(cfg.body_dims))]
        head = [data[f"head_{i}"].astype(np.float64) for i in range(4)]
    body_shapes, head_shapes = cfg.layer_shapes()
    expected = [s for shape in body_shapes for s in (shape, shape[1:])]
    if [p.shape for p in body] != expected:
        raise ValueError(f"{path}: body parameter shapes do not match the header")
    return Network(cfg, body, head)


def with_scope(cfg: TrainConfig, scope: str, seed: int | None = None) -> TrainConfig:
    return replace(cfg, scope=scope, seed=cfg.seed if seed is None else seed)
