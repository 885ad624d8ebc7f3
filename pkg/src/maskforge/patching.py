"""Sliding-window patch extraction, flattening, and mean-prediction repacking.

A spectrogram is cut into F x T windows along the time axis. Training uses
non-overlapping windows (stride = T); at separation time the window slides one
frame at a time, so every interior element receives T overlapping predictions
whose arithmetic mean becomes the element's confidence value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import repack_accumulate
from .stft import MagnitudeSpectrogram

KIND_MIXTURE = "mixture_input"
KIND_TARGET = "mask_target"
KIND_PREDICTION = "prediction"


@dataclass(frozen=True)
class PatchConfig:
    width: int = 20
    train_stride: int = 20
    test_stride: int = 1

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("patch width must be >= 1")
        if self.train_stride < 1 or self.test_stride < 1:
            raise ValueError("strides must be >= 1")


@dataclass
class PatchSet:
    """Stack of F x T grids with the frame offsets they were cut from."""

    patches: np.ndarray            # (P, F, T)
    offsets: np.ndarray            # (P,) start frames
    total_frames: int              # N before padding
    kind: str = KIND_MIXTURE

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        if self.patches.ndim != 3:
            raise ValueError("patches must be a (P, F, T) array")
        if len(self.offsets) != self.patches.shape[0]:
            raise ValueError("one offset per patch required")
        if self.kind == KIND_PREDICTION and self.patches.size:
            lo, hi = self.patches.min(), self.patches.max()
            if lo < 0.0 or hi > 1.0:
                raise ValueError(f"prediction values outside [0,1]: [{lo}, {hi}]")

    @property
    def n_patches(self) -> int:
        return self.patches.shape[0]

    @property
    def patch_shape(self) -> tuple[int, int]:
        return self.patches.shape[1], self.patches.shape[2]


@dataclass
class MeanPrediction:
    """Per-element mean of all sliding-window predictions covering it."""

    values: np.ndarray   # (F, N) in [0, 1]
    counts: np.ndarray   # (F, N) contribution counts, >= 1


def normalize_unit_scale(mag: MagnitudeSpectrogram) -> tuple[MagnitudeSpectrogram, float]:
    """Rescale so max element is 1; returns (scaled, original max)."""
    peak = float(np.max(mag.values))
    if peak == 0.0:
        raise ValueError("all-zero spectrogram has no unit scale")
    return MagnitudeSpectrogram(mag.values / peak), peak


def patch_offsets(n_frames: int, width: int, stride: int) -> np.ndarray:
    """Start offsets 0, stride, 2*stride, ... until the windows cover N frames."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    if n_frames <= width:
        return np.array([0], dtype=np.int64)
    count = int(np.ceil((n_frames - width) / stride)) + 1
    return stride * np.arange(count, dtype=np.int64)


def extract_patches(mag: MagnitudeSpectrogram, cfg: PatchConfig,
                    stride: int, kind: str = KIND_MIXTURE) -> PatchSet:
    """Cut F x width windows at the given stride, zero-padding the tail."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    grid = mag.values
    F, N = grid.shape
    T = cfg.width
    offsets = patch_offsets(N, T, stride)
    padded = int(offsets[-1]) + T
    if padded > N:
        grid = np.concatenate([grid, np.zeros((F, padded - N))], axis=1)
    patches = np.stack([grid[:, o:o + T] for o in offsets])
    return PatchSet(patches, offsets, total_frames=N, kind=kind)


def flatten(patch: np.ndarray) -> np.ndarray:
    """Unpack an F x T grid to a length F*T vector, frame by frame."""
    return np.asarray(patch).reshape(-1, order="F")


def unflatten(vector: np.ndarray, n_bins: int, width: int) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.size != n_bins * width:
        raise ValueError(f"vector length {vector.size} != {n_bins}*{width}")
    return vector.reshape(n_bins, width, order="F")


def flatten_set(patches: PatchSet) -> np.ndarray:
    """All patches flattened into an (P, F*T) matrix, row per patch."""
    P, F, T = patches.patches.shape
    return patches.patches.transpose(0, 2, 1).reshape(P, F * T)


def unflatten_rows(rows: np.ndarray, n_bins: int, width: int) -> np.ndarray:
    """Inverse of flatten_set: (P, F*T) rows back to (P, F, T) grids."""
    P = rows.shape[0]
    return rows.reshape(P, width, n_bins).transpose(0, 2, 1)


def repack_mean(predictions: PatchSet) -> MeanPrediction:
    """Average overlapping patch values per element; padded frames dropped.

    Patches are accumulated in offset order, matching a brute-force
    per-element summation exactly.
    """
    if predictions.kind != KIND_PREDICTION:
        raise ValueError(f"repack_mean expects prediction patches, got {predictions.kind!r}")
    if predictions.n_patches == 0:
        raise ValueError("empty patch set")
    F, T = predictions.patch_shape
    N = predictions.total_frames
    padded = int(predictions.offsets[-1]) + T
    acc, counts = repack_accumulate(
        np.ascontiguousarray(predictions.patches), predictions.offsets, padded
    )
    counts_grid = np.broadcast_to(counts[None, :N], (F, N)).copy()
    values = acc[:, :N] / counts_grid
    return MeanPrediction(values=values, counts=counts_grid)


# ---------------------------------------------------------------------------
# training-set dump: u32 F, u32 T, u32 count, then per pair the input vector
# and target vector as little-endian float32
# ---------------------------------------------------------------------------

def dump_training_set(path: str | Path, inputs: np.ndarray, targets: np.ndarray,
                      n_bins: int, width: int) -> None:
    if inputs.shape != targets.shape or inputs.ndim != 2:
        raise ValueError("inputs/targets must be matching (count, F*T) matrices")
    if inputs.shape[1] != n_bins * width:
        raise ValueError("vector length does not match F*T")
    count = inputs.shape[0]
    interleaved = np.empty((count, 2, inputs.shape[1]), dtype="<f4")
    interleaved[:, 0, :] = inputs
    interleaved[:, 1, :] = targets
    header = struct.pack("<III", n_bins, width, count)
    Path(path).write_bytes(header + interleaved.tobytes())


def load_training_set(path: str | Path) -> tuple[np.ndarray, np.ndarray, int, int]:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated training-set file")
    n_bins, width, count = struct.unpack_from("<III", raw, 0)
    body = np.frombuffer(raw, dtype="<f4", offset=12)
    expected = count * 2 * n_bins * width
    if body.size != expected:
        raise ValueError(f"{path}: payload size mismatch")
    body = body.reshape(count, 2, n_bins * width).astype(np.float64)
    return body[:, 0, :], body[:, 1, :], n_bins, width
