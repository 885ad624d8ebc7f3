"""Binary and soft time-frequency masks.

The training target is the ideal binary mask (vocal wins an element when its
magnitude exceeds the accompaniment's). At separation time, mean network
predictions are thresholded into two independent masks: the vocal mask keeps
elements with mean confidence above alpha, the non-vocal mask keeps elements
below 1 - alpha. For alpha > 0.5 some elements belong to neither mask; for
alpha < 0.5 the masks overlap.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import NON_VOCAL, VOCAL
from .patching import MeanPrediction
from .stft import ComplexSpectrogram, MagnitudeSpectrogram

_MASK_MAGIC = b"MFGM"
_KIND_BINARY = 1
_KIND_SOFT = 2


@dataclass
class BinaryMask:
    values: np.ndarray           # (F, N) in {0, 1}
    source_tag: str = VOCAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("mask must be a 2-D grid")
        if not np.all((self.values == 0.0) | (self.values == 1.0)):
            raise ValueError("binary mask values must be exactly 0 or 1")
        if self.source_tag not in (VOCAL, NON_VOCAL):
            raise ValueError(f"unknown source tag {self.source_tag!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class SoftMask:
    values: np.ndarray           # (F, N) in [0, 1]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("mask must be a 2-D grid")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("soft mask values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return alpha


def ideal_binary_mask(mag_vocal: MagnitudeSpectrogram,
                      mag_nonvocal: MagnitudeSpectrogram) -> BinaryMask:
    """1 where the vocal magnitude strictly exceeds the accompaniment, else 0."""
    if mag_vocal.values.shape != mag_nonvocal.values.shape:
        raise ValueError("magnitude shapes differ")
    values = (mag_vocal.values > mag_nonvocal.values).astype(np.float64)
    return BinaryMask(values, source_tag=VOCAL)


def vocal_mask_from_confidence(mean_pred: MeanPrediction, alpha: float) -> BinaryMask:
    """Keep elements whose mean prediction is strictly above alpha."""
    alpha = _check_alpha(alpha)
    return BinaryMask((mean_pred.values > alpha).astype(np.float64), source_tag=VOCAL)


def nonvocal_mask_from_confidence(mean_pred: MeanPrediction, alpha: float) -> BinaryMask:
    """Keep elements whose mean prediction is strictly below 1 - alpha."""
    alpha = _check_alpha(alpha)
    values = (mean_pred.values < 1.0 - alpha).astype(np.float64)
    return BinaryMask(values, source_tag=NON_VOCAL)


def soft_mask(v_vocal: MagnitudeSpectrogram, v_nonvocal: MagnitudeSpectrogram) -> SoftMask:
    """Elementwise V_v / (V_v + V_nv); a 0/0 element becomes 0.5."""
    a = v_vocal.values
    b = v_nonvocal.values
    if a.shape != b.shape:
        raise ValueError("magnitude shapes differ")
    if a.min(initial=0.0) < 0.0 or b.min(initial=0.0) < 0.0:
        raise ValueError("magnitudes must be non-negative")
    total = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0.0, a / np.where(total > 0.0, total, 1.0), 0.5)
    return SoftMask(ratio)


def threshold_soft_mask(mask: SoftMask, alpha: float) -> tuple[BinaryMask, BinaryMask]:
    """Binarize a soft mask and its complement at the same threshold."""
    alpha = _check_alpha(alpha)
    s_v = mask.values
    s_nv = 1.0 - s_v
    b_v = BinaryMask((s_v > alpha).astype(np.float64), source_tag=VOCAL)
    b_nv = BinaryMask((s_nv > alpha).astype(np.float64), source_tag=NON_VOCAL)
    return b_v, b_nv


def apply_mask(mix: ComplexSpectrogram, mask: BinaryMask | SoftMask) -> ComplexSpectrogram:
    """Elementwise product; the mixture's phase survives wherever mask > 0."""
    if mix.bins.shape != mask.values.shape:
        raise ValueError(
            f"mask shape {mask.values.shape} != spectrogram shape {mix.bins.shape}"
        )
    return ComplexSpectrogram(
        mix.bins * mask.values,
        mix.config,
        original_len=mix.original_len,
        sample_rate=mix.sample_rate,
    )


# ---------------------------------------------------------------------------
# mask dump: magic, u32 F, u32 N, u8 kind, then the grid in column order
# (frame by frame); binary masks use one byte per element, soft masks
# little-endian float32
# ---------------------------------------------------------------------------

def dump_mask(path: str | Path, mask: BinaryMask | SoftMask) -> None:
    F, N = mask.values.shape
    header = _MASK_MAGIC + struct.pack("<II", F, N)
    if isinstance(mask, BinaryMask):
        body = mask.values.astype(np.uint8).tobytes(order="F")
        kind = _KIND_BINARY
    else:
        body = mask.values.astype("<f4").tobytes(order="F")
        kind = _KIND_SOFT
    Path(path).write_bytes(header + struct.pack("<B", kind) + body)


def load_mask(path: str | Path) -> BinaryMask | SoftMask:
    raw = Path(path).read_bytes()
    if len(raw) < 13 or raw[:4] != _MASK_MAGIC:
        raise ValueError(f"{path}: not a mask file")
    F, N = struct.unpack_from("<II", raw, 4)
    kind = raw[12]
    if kind == _KIND_BINARY:
        body = np.frombuffer(raw, dtype=np.uint8, offset=13)
        if body.size != F * N:
            raise ValueError(f"{path}: payload size mismatch")
        return BinaryMask(body.reshape(F, N, order="F").astype(np.float64))
    if kind == _KIND_SOFT:
        body = np.frombuffer(raw, dtype="<f4", offset=13)
        if body.size != F * N:
            raise ValueError(f"{path}: payload size mismatch")
        return SoftMask(body.reshape(F, N, order="F").astype(np.float64))
    raise ValueError(f"{path}: unknown mask kind {kind}")
