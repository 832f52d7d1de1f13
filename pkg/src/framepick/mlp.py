"""Small fully connected classifier, trained with plain numpy.

Fixed shape of the trained network: two ReLU hidden layers and a softmax
output over two classes (good / bad frame pair). Optimized with mini-batch
Adam on the mean cross-entropy; the returned model is the epoch snapshot
with the best validation accuracy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAYER_DIMS = (12, 64, 32, 2)
_RELU, _SOFTMAX = 0, 1


@dataclass
class MlpModel:
    """Weights/biases per layer; activations are ReLU except the last (softmax)."""

    weights: list[np.ndarray]  # layer k maps (fan_in,) -> (fan_out,), stored (fan_in, fan_out)
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and parallel")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"bad shapes in layer {k}")
            if k > 0 and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"dimension chain broken at layer {k}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameters in layer {k}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 300
    seed: int = 0
    val_fraction: float = 0.2
    layer_dims: tuple[int, ...] = DEFAULT_LAYER_DIMS

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = -1.0


@dataclass(frozen=True)
class Prediction:
    label: int  # 1 = good pair, 0 = bad
    prob_good: float


def init_model(seed, layer_dims=DEFAULT_LAYER_DIMS) -> MlpModel:
    """Glorot-uniform weights, zero biases, float64 throughout."""
    if len(layer_dims) < 2 or any(s < 1 for s in layer_dims):
        raise ValueError(f"bad layer_dims: {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def _check_x(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.weights[0].shape[0]:
        raise ValueError(f"input must have {model.weights[0].shape[0]} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x, single


def _forward_cached(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if k < last:
            h = np.maximum(z, 0.0)
        else:
            z = z - z.max(axis=1, keepdims=True)
            e = np.exp(z)
            h = e / e.sum(axis=1, keepdims=True)
        acts.append(h)
    return acts


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities: (n, n_classes) for a batch, (n_classes,) for one
    input vector. Rows sum to 1."""
    xb, single = _check_x(model, x)
    probs = _forward_cached(model, xb)[-1]
    return probs[0] if single else probs


def predict(model: MlpModel, w) -> Prediction:
    """Single-vector prediction; label 1 iff prob_good >= 0.5."""
    probs = forward(model, w)
    if probs.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    p = float(probs[1])
    return Prediction(1 if p >= 0.5 else 0, p)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class (clipped at 1e-12)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    p = np.clip(probs[np.arange(labels.shape[0]), labels], 1e-12, 1.0)
    return float(-np.mean(np.log(p)))


def accuracy(model: MlpModel, x, y) -> float:
    """Fraction of correct threshold-rule labels over a batch."""
    y = np.asarray(y)
    probs = forward(model, np.asarray(x, dtype=np.float64))
    labels = (probs[:, 1] >= 0.5).astype(np.int64)
    return float(np.mean(labels == y))


def loss_and_grad(model: MlpModel, x, y) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Mean cross-entropy over the batch and its exact parameter gradients."""
    xb, _ = _check_x(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (xb.shape[0],) or xb.shape[0] < 1:
        raise ValueError(f"labels shape {y.shape} does not match batch of {xb.shape[0]}")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("labels must be in {0, 1}")
    acts = _forward_cached(model, xb)
    n = xb.shape[0]
    loss = cross_entropy(acts[-1], y)
    onehot = np.zeros_like(acts[-1])
    onehot[np.arange(n), y] = 1.0
    delta = (acts[-1] - onehot) / n
    gw: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    gb: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for k in range(len(model.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * (acts[k] > 0.0)
    return loss, (gw, gb)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "AdamState":
        params = model.weights + model.biases
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(model: MlpModel, grads, state: AdamState, t: int, config: TrainConfig):
    """One Adam update (bias-corrected, epsilon outside the square root).

    Mutates model parameters and state in place; t counts from 1.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    gw, gb = grads
    params = model.weights + model.biases
    gs = list(gw) + list(gb)
    c1 = 1.0 - config.adam_beta1**t
    c2 = 1.0 - config.adam_beta2**t
    for k, (theta, g) in enumerate(zip(params, gs)):
        state.m[k] = config.adam_beta1 * state.m[k] + (1.0 - config.adam_beta1) * g
        state.v[k] = config.adam_beta2 * state.v[k] + (1.0 - config.adam_beta2) * g**2
        theta -= config.learning_rate * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + config.adam_eps)
    return model, state


def _as_xy(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2:
        x, y = dataset
    else:
        x = [getattr(f, "w", f) for f, _ in dataset]
        y = [label for _, label in dataset]
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)


def train(dataset, config: TrainConfig | None = None) -> tuple[MlpModel, TrainHistory]:
    """Train on labeled feature vectors with a held-out validation split.

    ``dataset`` is a list of (FeatureVector or array, label) or an (x, y)
    array pair. The data is shuffled once and split with
    n_val = floor(n * val_fraction); batches are reshuffled every epoch.
    Returns the snapshot with the highest validation accuracy (earliest
    epoch on ties) and the per-epoch history.
    """
    config = config or TrainConfig()
    x, y = _as_xy(dataset)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError(f"bad training shapes: x {x.shape}, y {y.shape}")
    if x.shape[1] != config.layer_dims[0]:
        raise ValueError(f"layer_dims {config.layer_dims} incompatible with {x.shape[1]} features")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("labels must be in {0, 1}")
    n_good = int(np.sum(y == 1))
    n_bad = int(np.sum(y == 0))
    if n_good == 0 or n_bad == 0:
        raise ValueError("dataset contains a single class")
    if min(n_good, n_bad) < 10:
        raise ValueError(f"need at least 10 examples per class, got {n_good} good / {n_bad} bad")
    n = x.shape[0]
    n_val = int(n * config.val_fraction)
    if n_val < 1 or n - n_val < 1:
        raise ValueError(f"cannot split {n} samples with val_fraction={config.val_fraction}")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    xt, yt = x[train_idx], y[train_idx]
    xv, yv = x[val_idx], y[val_idx]

    model = init_model(rng, config.layer_dims)
    state = AdamState.zeros_like(model)
    t = 0
    best = model.copy()
    history = TrainHistory()

    for epoch in range(config.epochs):
        order = rng.permutation(xt.shape[0])
        for start in range(0, xt.shape[0], config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads = loss_and_grad(model, xt[batch], yt[batch])
            t += 1
            adam_step(model, grads, state, t, config)
        history.train_loss.append(cross_entropy(forward(model, xt), yt))
        history.train_accuracy.append(accuracy(model, xt, yt))
        history.val_loss.append(cross_entropy(forward(model, xv), yv))
        val_acc = accuracy(model, xv, yv)
        history.val_accuracy.append(val_acc)
        if val_acc > history.best_val_accuracy:
            history.best_val_accuracy = val_acc
            history.best_epoch = epoch
            best = model.copy()

    return best, history


# ---------------------------------------------------------------------------
# File format

_MLP_MAGIC = b"MLP1"


def save_model(path, model: MlpModel) -> None:
    """Write an MLP1 file: per layer, dims, row-major f64 weights, biases,
    and a trailing activation code (0 = ReLU, 1 = softmax)."""
    last = len(model.weights) - 1
    with open(path, "wb") as fh:
        fh.write(_MLP_MAGIC)
        fh.write(struct.pack("<I", len(model.weights)))
        for k, (w, b) in enumerate(zip(model.weights, model.biases)):
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
            fh.write(w.astype("<f8").tobytes(order="C"))
            fh.write(b.astype("<f8").tobytes())
            fh.write(struct.pack("<B", _SOFTMAX if k == last else _RELU))


def load_model(path) -> MlpModel:
    """Read an MLP1 file; exact inverse of save_model."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MLP_MAGIC:
            raise ValueError(f"bad magic in {path}: expected {_MLP_MAGIC!r}, got {magic!r}")
        raw = fh.read(4)
        if len(raw) != 4:
            raise ValueError(f"truncated layer count in {path}")
        (n_layers,) = struct.unpack("<I", raw)
        if not 1 <= n_layers <= 64:
            raise ValueError(f"implausible layer count {n_layers} in {path}")
        weights, biases = [], []
        for k in range(n_layers):
            head = fh.read(8)
            if len(head) != 8:
                raise ValueError(f"truncated layer {k} header in {path}")
            rows, cols = struct.unpack("<II", head)
            need = 8 * (rows * cols + cols)
            raw = fh.read(need)
            if len(raw) != need:
                raise ValueError(f"truncated layer {k} data in {path}")
            weights.append(np.frombuffer(raw[: 8 * rows * cols], dtype="<f8").reshape(rows, cols).copy())
            biases.append(np.frombuffer(raw[8 * rows * cols :], dtype="<f8").copy())
            act = fh.read(1)
            expected = _SOFTMAX if k == n_layers - 1 else _RELU
            if len(act) != 1 or act[0] != expected:
                raise ValueError(f"bad activation code for layer {k} in {path}")
    return MlpModel(weights, biases)
