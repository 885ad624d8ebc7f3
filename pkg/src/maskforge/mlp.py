"""Feed-forward sigmoid network trained with per-example gradient descent.

Every layer computes sigmoid(Wx + b); the output layer's bias is pinned at
zero. The network maps a flattened mixture-magnitude window to a same-sized
vector of per-element vocal probabilities. Training is plain SGD, one update
per example, one seeded shuffle per epoch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .patching import (
    KIND_PREDICTION,
    PatchSet,
    flatten_set,
    unflatten_rows,
)

_MODEL_MAGIC = b"MFG1"

LOSS_CROSS_ENTROPY = "cross_entropy"
LOSS_MSE = "mse"
_LOSS_CODES = {LOSS_CROSS_ENTROPY: kernels._LOSS_BCE, LOSS_MSE: kernels._LOSS_MSE}


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]       # weights[l]: (sizes[l+1], sizes[l])
    biases: list[np.ndarray]        # biases[l]: (sizes[l+1],); last stays zero
    seed: int = 0

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output layers")
        if any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be positive")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer transition")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[l + 1], sizes[l]):
                raise ValueError(
                    f"layer {l}: weight shape {W.shape} != ({sizes[l + 1]}, {sizes[l]})"
                )
            if b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l}: bias shape {b.shape}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: non-finite parameters")
        self.layer_sizes = sizes

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            seed=self.seed,
        )


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    loss: str = LOSS_CROSS_ENTROPY
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate >= 0.0:
            raise ValueError("learning rate must be non-negative")
        if self.loss not in _LOSS_CODES:
            raise ValueError(f"loss must be one of {sorted(_LOSS_CODES)}")


def init_model(layer_sizes: list[int], seed: int = 0) -> MlpModel:
    """Uniform(-a, a) weights with a = sqrt(6/(fan_in+fan_out)), zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("need at least input and output layers")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, seed=seed)


def _forward_acts(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """All layer activations plus the output pre-activation (for the loss)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_size,):
        raise ValueError(f"input length {x.shape} != ({model.input_size},)")
    acts = [x]
    z = x
    for W, b in zip(model.weights, model.biases):
        z = W @ acts[-1] + b
        if not np.all(np.isfinite(z)):
            raise FloatingPointError("non-finite pre-activation")
        acts.append(kernels.sigmoid_stable(z))
    return acts, z


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    acts, _ = _forward_acts(model, x)
    return acts[-1]


def forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Row-per-example forward pass; same arithmetic, one matmul per layer."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != model.input_size:
        raise ValueError(f"expected (n, {model.input_size}) inputs, got {A.shape}")
    for W, b in zip(model.weights, model.biases):
        A = kernels.sigmoid_stable(A @ W.T + b)
    return A


def loss_value(z_out: np.ndarray, p: np.ndarray, y: np.ndarray, loss: str) -> float:
    """Per-example loss, summed over output units."""
    if loss == LOSS_CROSS_ENTROPY:
        return float(np.sum(kernels.softplus_stable(z_out) - y * z_out))
    return float(0.5 * np.sum((p - y) ** 2))


def loss_and_gradient(model: MlpModel, x: np.ndarray, y: np.ndarray,
                      loss: str = LOSS_CROSS_ENTROPY):
    """Backpropagated gradients; returns (loss, [(dW, db) per layer]).

    The output layer's bias gradient is reported as zero to match the frozen
    parameter.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.output_size,):
        raise ValueError(f"target length {y.shape} != ({model.output_size},)")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("targets must be binary")
    if loss not in _LOSS_CODES:
        raise ValueError(f"loss must be one of {sorted(_LOSS_CODES)}")
    acts, z_out = _forward_acts(model, x)
    p = acts[-1]
    value = loss_value(z_out, p, y, loss)
    if loss == LOSS_CROSS_ENTROPY:
        delta = p - y
    else:
        delta = (p - y) * p * (1.0 - p)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        a_prev = acts[l]
        dW = np.outer(delta, a_prev)
        db = delta.copy() if l < model.n_layers - 1 else np.zeros_like(delta)
        grads[l] = (dW, db)
        if l > 0:
            delta = (model.weights[l].T @ delta) * a_prev * (1.0 - a_prev)
    return value, grads


def train_sgd(model: MlpModel, inputs: np.ndarray, targets: np.ndarray,
              cfg: TrainConfig) -> tuple[MlpModel, np.ndarray]:
    """Per-example SGD over shuffled sweeps; returns (trained copy, loss trace)."""
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    Y = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("inputs/targets must be matching (n, d) matrices")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if X.shape[1] != model.input_size or Y.shape[1] != model.output_size:
        raise ValueError(
            f"example shapes {X.shape[1]}/{Y.shape[1]} do not match model "
            f"{model.input_size}/{model.output_size}"
        )
    trained = model.copy()
    rng = np.random.default_rng(cfg.shuffle_seed)
    loss_code = _LOSS_CODES[cfg.loss]
    trace = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(X.shape[0]).astype(np.int64)
        mean_loss = kernels.sgd_epoch(
            trained.weights, trained.biases, X, Y, order,
            cfg.learning_rate, loss_code, True,
        )
        if not np.isfinite(mean_loss):
            raise FloatingPointError(
                f"training diverged: non-finite loss at epoch {epoch}"
            )
        trace[epoch] = mean_loss
    return trained, trace


def predict_masks(model: MlpModel, patches: PatchSet) -> PatchSet:
    """Flatten, forward, unflatten every patch; output kind is prediction."""
    F, T = patches.patch_shape
    if F * T != model.input_size:
        raise ValueError(
            f"patch size {F}x{T} does not match model input {model.input_size}"
        )
    rows = forward_batch(model, flatten_set(patches))
    grids = unflatten_rows(rows, F, T)
    return PatchSet(grids, patches.offsets.copy(),
                    total_frames=patches.total_frames, kind=KIND_PREDICTION)


# ---------------------------------------------------------------------------
# model file: magic "MFG1", u32 layer count, u32 sizes, i64 seed, then per
# layer the row-major float64 weights followed by the bias vector, all
# little-endian
# ---------------------------------------------------------------------------

def save_model(model: MlpModel, path: str | Path) -> None:
    parts = [_MODEL_MAGIC, struct.pack("<I", len(model.layer_sizes))]
    parts.append(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
    parts.append(struct.pack("<q", model.seed))
    for W, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> MlpModel:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    (n_sizes,) = struct.unpack_from("<I", raw, 4)
    off = 8
    if len(raw) < off + 4 * n_sizes + 8:
        raise ValueError(f"{path}: truncated header")
    sizes = list(struct.unpack_from(f"<{n_sizes}I", raw, off))
    off += 4 * n_sizes
    (seed,) = struct.unpack_from("<q", raw, off)
    off += 8
    expected = sum(
        8 * (o * i + o) for i, o in zip(sizes[:-1], sizes[1:])
    )
    if len(raw) != off + expected:
        raise ValueError(f"{path}: parameter payload size mismatch")
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        n = fan_out * fan_in
        W = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(fan_out, fan_in)
        off += 8 * n
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(W.astype(np.float64))
        biases.append(b.astype(np.float64))
    return MlpModel(sizes, weights, biases, seed=seed)
