"""Hot numeric kernels, each with a numba-jitted and a pure-numpy twin.

The jitted path is used when numba imports cleanly and the environment
variable MASKFORGE_NO_NUMBA is unset (or "0"). Setting MASKFORGE_NO_NUMBA=1
before import selects the numpy fallbacks; numba's own NUMBA_DISABLE_JIT is
also honored. Both twins of a kernel perform the same arithmetic in the same
order, so results match closely (bitwise for the pure accumulation kernels).

benchmarks/bench_kernels.py times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("MASKFORGE_NO_NUMBA", "").strip().lower()
_DISABLED = _flag not in ("", "0", "false")

try:
    from numba import njit
    from numba.typed import List as NumbaList

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False
    NumbaList = None

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco


NUMBA_ENABLED = _HAVE_NUMBA and not _DISABLED

_LOSS_BCE = 0
_LOSS_MSE = 1


# ---------------------------------------------------------------------------
# sigmoid helpers (scalar form shared by both SGD twins)
# ---------------------------------------------------------------------------

def sigmoid_stable(z: np.ndarray) -> np.ndarray:
    """Logistic function, safe against overflow for any finite input."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus_stable(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) without overflow; used for cross-entropy from logits."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


# ---------------------------------------------------------------------------
# per-example SGD epoch (the dominant training cost)
# ---------------------------------------------------------------------------

def sgd_epoch_numpy(Ws, bs, X, Y, order, lr, loss_code, out_bias_frozen=True):
    """One full sweep of per-example SGD updates. Mutates Ws/bs in place.

    Ws: list of (out, in) float64 weight matrices, bs: list of (out,) biases.
    X, Y: (n, d_in) / (n, d_out) example matrices. order: visit permutation.
    Returns the mean per-example loss measured at visit time.
    """
    n = order.shape[0]
    n_layers = len(Ws)
    total = 0.0
    for idx in range(n):
        i = order[idx]
        x = X[i]
        y = Y[i]
        acts = [x]
        z_out = None
        for l in range(n_layers):
            z = Ws[l] @ acts[l] + bs[l]
            acts.append(sigmoid_stable(z))
            z_out = z
        p = acts[-1]
        if loss_code == _LOSS_BCE:
            total += float(np.sum(softplus_stable(z_out) - y * z_out))
            delta = p - y
        else:
            total += float(0.5 * np.sum((p - y) ** 2))
            delta = (p - y) * p * (1.0 - p)
        for l in range(n_layers - 1, -1, -1):
            a_prev = acts[l]
            if l > 0:
                delta_prev = (Ws[l].T @ delta) * a_prev * (1.0 - a_prev)
            else:
                delta_prev = None
            g = lr * delta
            Ws[l] -= np.outer(g, a_prev)
            if l < n_layers - 1 or not out_bias_frozen:
                bs[l] -= g
            delta = delta_prev
    return total / n


@njit(cache=True)
def _sgd_epoch_jit(Ws, bs, X, Y, order, lr, loss_code, out_bias_frozen):
    n = order.shape[0]
    n_layers = len(Ws)
    total = 0.0
    for idx in range(n):
        i = order[idx]
        x = X[i]
        y = Y[i]
        acts = [x]
        z_out = np.empty(1, dtype=np.float64)
        for l in range(n_layers):
            z = np.dot(Ws[l], acts[l]) + bs[l]
            a = np.empty_like(z)
            for j in range(z.shape[0]):
                v = z[j]
                if v >= 0.0:
                    a[j] = 1.0 / (1.0 + np.exp(-v))
                else:
                    ev = np.exp(v)
                    a[j] = ev / (1.0 + ev)
            acts.append(a)
            z_out = z
        p = acts[-1]
        n_out = p.shape[0]
        loss_i = 0.0
        delta = np.empty(n_out, dtype=np.float64)
        if loss_code == 0:
            for j in range(n_out):
                zj = z_out[j]
                sp = max(zj, 0.0) + np.log1p(np.exp(-abs(zj)))
                loss_i += sp - Y[i, j] * zj
                delta[j] = p[j] - Y[i, j]
        else:
            for j in range(n_out):
                e = p[j] - Y[i, j]
                loss_i += 0.5 * e * e
                delta[j] = e * p[j] * (1.0 - p[j])
        total += loss_i
        for l in range(n_layers - 1, -1, -1):
            a_prev = acts[l]
            if l > 0:
                dp = np.dot(Ws[l].T, delta)
                for j in range(dp.shape[0]):
                    dp[j] *= a_prev[j] * (1.0 - a_prev[j])
            else:
                dp = delta
            W = Ws[l]
            rows = W.shape[0]
            cols = W.shape[1]
            update_bias = l < n_layers - 1 or not out_bias_frozen
            for j in range(rows):
                gj = lr * delta[j]
                for k in range(cols):
                    W[j, k] -= gj * a_prev[k]
                if update_bias:
                    bs[l][j] -= gj
            delta = dp
    return total / n


def sgd_epoch_numba(Ws, bs, X, Y, order, lr, loss_code, out_bias_frozen=True):
    tw = NumbaList(Ws)
    tb = NumbaList(bs)
    loss = _sgd_epoch_jit(tw, tb, X, Y, order, lr, loss_code, out_bias_frozen)
    for l in range(len(Ws)):
        Ws[l][...] = tw[l]
        bs[l][...] = tb[l]
    return loss


# ---------------------------------------------------------------------------
# overlap-add accumulation for ISTFT
# ---------------------------------------------------------------------------

def ola_accumulate_numpy(frames, window, hop, out_len):
    """Sum windowed time-domain frames into (signal, squared-window envelope)."""
    acc = np.zeros(out_len, dtype=np.float64)
    env = np.zeros(out_len, dtype=np.float64)
    w2 = window * window
    n_frames, frame_len = frames.shape
    for m in range(n_frames):
        start = m * hop
        acc[start:start + frame_len] += frames[m] * window
        env[start:start + frame_len] += w2
    return acc, env


@njit(cache=True)
def _ola_accumulate_jit(frames, window, hop, out_len):
    acc = np.zeros(out_len, dtype=np.float64)
    env = np.zeros(out_len, dtype=np.float64)
    n_frames, frame_len = frames.shape
    for m in range(n_frames):
        start = m * hop
        for k in range(frame_len):
            w = window[k]
            acc[start + k] += frames[m, k] * w
            env[start + k] += w * w
    return acc, env


def ola_accumulate_numba(frames, window, hop, out_len):
    return _ola_accumulate_jit(frames, window, hop, out_len)


# ---------------------------------------------------------------------------
# sliding-window prediction repacking
# ---------------------------------------------------------------------------

def repack_accumulate_numpy(patches, offsets, n_frames_padded):
    """Accumulate patch grids at their frame offsets.

    patches: (P, F, T); returns (sum grid F x Np, per-frame counts Np).
    Patches are added in offset order, so per-element summation order is fixed.
    """
    n_patches, F, T = patches.shape
    acc = np.zeros((F, n_frames_padded), dtype=np.float64)
    counts = np.zeros(n_frames_padded, dtype=np.int64)
    for p in range(n_patches):
        o = offsets[p]
        acc[:, o:o + T] += patches[p]
        counts[o:o + T] += 1
    return acc, counts


@njit(cache=True)
def _repack_accumulate_jit(patches, offsets, n_frames_padded):
    n_patches, F, T = patches.shape
    acc = np.zeros((F, n_frames_padded), dtype=np.float64)
    counts = np.zeros(n_frames_padded, dtype=np.int64)
    for p in range(n_patches):
        o = offsets[p]
        for f in range(F):
            for t in range(T):
                acc[f, o + t] += patches[p, f, t]
        for t in range(T):
            counts[o + t] += 1
    return acc, counts


def repack_accumulate_numba(patches, offsets, n_frames_padded):
    return _repack_accumulate_jit(patches, offsets, n_frames_padded)


# ---------------------------------------------------------------------------
# generalized KL divergence (evaluated once per NMF iteration)
# ---------------------------------------------------------------------------

KL_EPS = 1e-12


def kl_divergence_numpy(V, V_hat):
    """sum(V*log(V/V_hat) - V + V_hat), 0*log(0/x) = 0, V_hat floored at eps."""
    Vf = np.maximum(V_hat, KL_EPS)
    pos = V > 0
    terms = Vf - V
    logs = np.zeros_like(V)
    logs[pos] = V[pos] * np.log(V[pos] / Vf[pos])
    return float(np.sum(terms + logs))


@njit(cache=True)
def _kl_divergence_jit(V, V_hat):
    total = 0.0
    for i in range(V.shape[0]):
        for j in range(V.shape[1]):
            v = V[i, j]
            vf = V_hat[i, j]
            if vf < KL_EPS:
                vf = KL_EPS
            t = vf - v
            if v > 0.0:
                t += v * np.log(v / vf)
            total += t
    return total


def kl_divergence_numba(V, V_hat):
    return float(_kl_divergence_jit(V, V_hat))


# ---------------------------------------------------------------------------
# dispatchers
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    sgd_epoch = sgd_epoch_numba
    ola_accumulate = ola_accumulate_numba
    repack_accumulate = repack_accumulate_numba
    kl_divergence_sum = kl_divergence_numba
else:
    sgd_epoch = sgd_epoch_numpy
    ola_accumulate = ola_accumulate_numpy
    repack_accumulate = repack_accumulate_numpy
    kl_divergence_sum = kl_divergence_numpy
