"""Non-negative matrix factorization baseline with KL multiplicative updates.

Training factorizes a matrix whose columns are flattened class-spectrogram
windows, once per class, keeping only the dictionaries. Separation freezes
the stacked dictionaries and fits activations to the mixture windows; the
per-class reconstructions then feed the soft mask.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import KL_EPS, kl_divergence_sum
from .masking import SoftMask
from .patching import KIND_PREDICTION, MeanPrediction, PatchSet, repack_mean

_NMF_MAGIC = b"MFGN"


@dataclass
class NmfModel:
    w_vocal: np.ndarray        # (F*T, r_v)
    w_nonvocal: np.ndarray     # (F*T, r_nv)
    n_bins: int
    width: int

    def __post_init__(self):
        self.w_vocal = np.asarray(self.w_vocal, dtype=np.float64)
        self.w_nonvocal = np.asarray(self.w_nonvocal, dtype=np.float64)
        d = self.n_bins * self.width
        for name, W in (("vocal", self.w_vocal), ("non-vocal", self.w_nonvocal)):
            if W.ndim != 2 or W.shape[0] != d:
                raise ValueError(f"{name} dictionary must be ({d}, r), got {W.shape}")
            if W.min(initial=0.0) < 0.0:
                raise ValueError(f"{name} dictionary has negative entries")
            if np.any(W.sum(axis=0) == 0.0):
                raise ValueError(f"{name} dictionary has an all-zero column")

    @property
    def rank_vocal(self) -> int:
        return self.w_vocal.shape[1]

    @property
    def rank_nonvocal(self) -> int:
        return self.w_nonvocal.shape[1]


@dataclass
class Factorization:
    W: np.ndarray
    H: np.ndarray
    trace: np.ndarray          # KL divergence after each iteration


def kl_divergence(V: np.ndarray, V_hat: np.ndarray) -> float:
    """Generalized KL: sum(V*log(V/V_hat) - V + V_hat), 0*log0 = 0."""
    V = np.asarray(V, dtype=np.float64)
    V_hat = np.asarray(V_hat, dtype=np.float64)
    if V.shape != V_hat.shape:
        raise ValueError("shapes differ")
    if V.min(initial=0.0) < 0.0 or V_hat.min(initial=0.0) < 0.0:
        raise ValueError("divergence needs non-negative matrices")
    return kl_divergence_sum(np.ascontiguousarray(V), np.ascontiguousarray(V_hat))


def _update_h(V, W, H):
    ratio = V / np.maximum(W @ H, KL_EPS)
    H *= (W.T @ ratio) / np.maximum(W.sum(axis=0)[:, None], KL_EPS)


def _update_w(V, W, H):
    ratio = V / np.maximum(W @ H, KL_EPS)
    W *= (ratio @ H.T) / np.maximum(H.sum(axis=1)[None, :], KL_EPS)


def nmf_factorize(V: np.ndarray, r: int, iterations: int = 200,
                  seed: int = 0) -> Factorization:
    """Alternating multiplicative updates from a seeded uniform(0,1] start."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("V must be a matrix")
    if V.min(initial=0.0) < 0.0:
        raise ValueError("V must be non-negative")
    if r < 1:
        raise ValueError("rank must be >= 1")
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if r > min(V.shape):
        warnings.warn(f"rank {r} exceeds min dimension {min(V.shape)}", stacklevel=2)
    rng = np.random.default_rng(seed)
    W = 1.0 - rng.random((V.shape[0], r))
    H = 1.0 - rng.random((r, V.shape[1]))
    trace = np.empty(iterations)
    for it in range(iterations):
        _update_h(V, W, H)
        _update_w(V, W, H)
        trace[it] = kl_divergence_sum(V, W @ H)
        if not np.isfinite(trace[it]):
            raise FloatingPointError(f"divergence became non-finite at iteration {it}")
    return Factorization(W, H, trace)


def infer_activations(V: np.ndarray, W: np.ndarray, iterations: int = 200,
                      seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Fit H for fixed W; returns (H, divergence trace)."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if V.shape[0] != W.shape[0]:
        raise ValueError(f"V rows {V.shape[0]} != dictionary rows {W.shape[0]}")
    rng = np.random.default_rng(seed)
    H = 1.0 - rng.random((W.shape[1], V.shape[1]))
    trace = np.empty(iterations)
    col_sums = np.maximum(W.sum(axis=0)[:, None], KL_EPS)
    for it in range(iterations):
        ratio = V / np.maximum(W @ H, KL_EPS)
        H *= (W.T @ ratio) / col_sums
        trace[it] = kl_divergence_sum(V, W @ H)
        if not np.isfinite(trace[it]):
            raise FloatingPointError(f"divergence became non-finite at iteration {it}")
    return H, trace


def nmf_train_class(V_class: np.ndarray, r: int, iterations: int = 200,
                    seed: int = 0) -> np.ndarray:
    """Dictionary for one class, columns rescaled to unit sum."""
    V_class = np.asarray(V_class, dtype=np.float64)
    if V_class.ndim != 2 or V_class.shape[1] == 0:
        raise ValueError("class patch matrix is empty")
    fac = nmf_factorize(V_class, r, iterations, seed)
    sums = fac.W.sum(axis=0)
    if np.any(sums == 0.0):
        raise FloatingPointError("training produced an all-zero dictionary column")
    return fac.W / sums[None, :]


def nmf_separate(V_u: np.ndarray, model: NmfModel, iterations: int = 200,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class reconstructions of mixture windows with dictionaries frozen."""
    W_u = np.concatenate([model.w_vocal, model.w_nonvocal], axis=1)
    H_u, _ = infer_activations(V_u, W_u, iterations, seed)
    r_v = model.rank_vocal
    V_v_hat = model.w_vocal @ H_u[:r_v]
    V_nv_hat = model.w_nonvocal @ H_u[r_v:]
    return V_v_hat, V_nv_hat


def soft_mask_patches(V_v_hat: np.ndarray, V_nv_hat: np.ndarray,
                      n_bins: int, width: int) -> np.ndarray:
    """Per-window soft masks as a (P, F, T) stack from column-stacked windows."""
    if V_v_hat.shape != V_nv_hat.shape:
        raise ValueError("reconstruction shapes differ")
    d, P = V_v_hat.shape
    if d != n_bins * width:
        raise ValueError(f"window length {d} != {n_bins}*{width}")
    # columns are frame-major flattened windows; undo to (P, F, T)
    v = V_v_hat.T.reshape(P, width, n_bins).transpose(0, 2, 1)
    nv = V_nv_hat.T.reshape(P, width, n_bins).transpose(0, 2, 1)
    total = v + nv
    return np.where(total > 0.0, v / np.where(total > 0.0, total, 1.0), 0.5)


def repack_soft_mask(V_v_hat: np.ndarray, V_nv_hat: np.ndarray, n_bins: int,
                     width: int, offsets: np.ndarray, total_frames: int) -> SoftMask:
    """Window-wise soft masks averaged back onto the full spectrogram grid."""
    masks = soft_mask_patches(V_v_hat, V_nv_hat, n_bins, width)
    patch_set = PatchSet(masks, np.asarray(offsets, dtype=np.int64),
                         total_frames=total_frames, kind=KIND_PREDICTION)
    mean = repack_mean(patch_set)
    return SoftMask(mean.values)


def mean_prediction_from_soft(V_v_hat, V_nv_hat, n_bins, width, offsets,
                              total_frames) -> MeanPrediction:
    """Same averaging as repack_soft_mask but keeping the counts grid."""
    masks = soft_mask_patches(V_v_hat, V_nv_hat, n_bins, width)
    patch_set = PatchSet(masks, np.asarray(offsets, dtype=np.int64),
                         total_frames=total_frames, kind=KIND_PREDICTION)
    return repack_mean(patch_set)


# ---------------------------------------------------------------------------
# dictionary file: magic "MFGN", u32 F, T, r_v, r_nv, then W_v and W_nv as
# little-endian float64 in column order
# ---------------------------------------------------------------------------

def save_nmf(model: NmfModel, path: str | Path) -> None:
    header = _NMF_MAGIC + struct.pack(
        "<IIII", model.n_bins, model.width, model.rank_vocal, model.rank_nonvocal
    )
    body = (
        np.asfortranarray(model.w_vocal, dtype="<f8").tobytes(order="F")
        + np.asfortranarray(model.w_nonvocal, dtype="<f8").tobytes(order="F")
    )
    Path(path).write_bytes(header + body)


def load_nmf(path: str | Path) -> NmfModel:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != _NMF_MAGIC:
        raise ValueError(f"{path}: not a dictionary file (bad magic)")
    F, T, r_v, r_nv = struct.unpack_from("<IIII", raw, 4)
    d = F * T
    expected = 20 + 8 * d * (r_v + r_nv)
    if len(raw) != expected:
        raise ValueError(f"{path}: payload size mismatch")
    flat = np.frombuffer(raw, dtype="<f8", offset=20)
    w_v = flat[: d * r_v].reshape(d, r_v, order="F").astype(np.float64)
    w_nv = flat[d * r_v:].reshape(d, r_nv, order="F").astype(np.float64)
    return NmfModel(w_v, w_nv, n_bins=F, width=T)
