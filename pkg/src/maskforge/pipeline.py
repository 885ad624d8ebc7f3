"""End-to-end orchestration: corpus -> training sets -> models -> sweep CSVs.

The alpha sweep evaluates every requested separation method on every test
song across a confidence grid. Thresholding is cheap next to model inference,
so each song's mean-confidence grid is computed once per method and re-cut
for every alpha. Rows are aggregated across songs with Student-t confidence
intervals and written in a canonical sort order, making repeat runs with the
same seeds byte-identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .audio_io import (
    NON_VOCAL,
    VOCAL,
    AudioBuffer,
    ManifestSong,
    StemSet,
    load_manifest,
    load_song,
    pool_and_mix,
)
from .bss_eval import PairMetrics, SeparationMetrics, evaluate_source
from .masking import (
    BinaryMask,
    apply_mask,
    ideal_binary_mask,
    nonvocal_mask_from_confidence,
    vocal_mask_from_confidence,
)
from .mlp import MlpModel, TrainConfig, init_model, predict_masks, train_sgd
from .nmf import NmfModel, mean_prediction_from_soft, nmf_separate, nmf_train_class
from .patching import (
    KIND_MIXTURE,
    KIND_TARGET,
    MeanPrediction,
    PatchConfig,
    extract_patches,
    flatten_set,
    normalize_unit_scale,
    repack_mean,
)
from .stft import (
    ComplexSpectrogram,
    MagnitudeSpectrogram,
    StftConfig,
    istft,
    split,
    stft,
)

METHOD_DNN = "dnn"
METHOD_NMF = "nmf"
METHOD_IDEAL = "ideal"
METHOD_MIXTURE = "mixture"

_SOURCE_ORDER = (VOCAL, NON_VOCAL, "mean")

FIG2_HEADER = "alpha,method,source,sdr_db,sir_db,sar_db,ci95"
FIG3_HEADER = "alpha,method,scope,sir_db,sar_db"
PER_SONG_HEADER = "song_id,method,alpha,source,sdr_db,sir_db,sar_db"


@dataclass
class ExperimentConfig:
    """Desk-scale defaults, sized for minutes-long runs.

    The epoch/learning-rate pair is calibrated: longer or hotter training
    saturates predictions toward {0,1}, which flattens the confidence sweep
    (the masks stop responding to alpha) even though raw SIR keeps climbing.
    """

    stft: StftConfig = field(default_factory=lambda: StftConfig(frame_len=512, hop=128))
    patch: PatchConfig = field(default_factory=lambda: PatchConfig(
        width=10, train_stride=10, test_stride=1))
    alphas: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))
    hidden: tuple[int, ...] = (1024,)
    epochs: int = 4
    learning_rate: float = 0.002
    loss: str = "cross_entropy"
    nmf_rank: int = 40
    nmf_train_iters: int = 200
    nmf_infer_iters: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.alphas:
            raise ValueError("need at least one alpha")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("alphas must lie strictly inside (0, 1)")

    @property
    def layer_sizes(self) -> list[int]:
        d = self.stft.n_bins * self.patch.width
        return [d, *self.hidden, d]


def _thread_count(n_jobs: int) -> int:
    env = os.environ.get("MASKFORGE_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


# ---------------------------------------------------------------------------
# training-set construction
# ---------------------------------------------------------------------------

def song_training_pairs(stems: StemSet, stft_cfg: StftConfig,
                        patch_cfg: PatchConfig) -> tuple[np.ndarray, np.ndarray]:
    """(mixture window, oracle mask window) vector pairs for one song."""
    vocal_mix, nonvocal_mix, full_mix = pool_and_mix(stems)
    mag_v, _ = split(stft(vocal_mix, stft_cfg))
    mag_nv, _ = split(stft(nonvocal_mix, stft_cfg))
    mag_mix, _ = split(stft(full_mix, stft_cfg))
    ibm = ideal_binary_mask(mag_v, mag_nv)
    norm_mix, _ = normalize_unit_scale(mag_mix)
    mix_patches = extract_patches(norm_mix, patch_cfg, patch_cfg.train_stride,
                                  kind=KIND_MIXTURE)
    target_patches = extract_patches(MagnitudeSpectrogram(ibm.values), patch_cfg,
                                     patch_cfg.train_stride, kind=KIND_TARGET)
    return flatten_set(mix_patches), flatten_set(target_patches)


def build_training_set(songs: list[ManifestSong], stft_cfg: StftConfig,
                       patch_cfg: PatchConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stack training pairs over every manifest song."""
    if not songs:
        raise ValueError("empty manifest")
    xs, ys = [], []
    for song in songs:
        X, Y = song_training_pairs(load_song(song), stft_cfg, patch_cfg)
        xs.append(X)
        ys.append(Y)
    return np.concatenate(xs), np.concatenate(ys)


def build_class_matrices(songs: list[ManifestSong], stft_cfg: StftConfig,
                         patch_cfg: PatchConfig) -> tuple[np.ndarray, np.ndarray]:
    """Column-stacked per-class source windows for dictionary training."""
    if not songs:
        raise ValueError("empty manifest")
    v_cols, nv_cols = [], []
    for song in songs:
        stems = load_song(song)
        vocal_mix, nonvocal_mix, _ = pool_and_mix(stems)
        for target, mix in ((v_cols, vocal_mix), (nv_cols, nonvocal_mix)):
            mag, _ = split(stft(mix, stft_cfg))
            norm, _ = normalize_unit_scale(mag)
            patches = extract_patches(norm, patch_cfg, patch_cfg.train_stride)
            target.append(flatten_set(patches).T)
    return np.concatenate(v_cols, axis=1), np.concatenate(nv_cols, axis=1)


def train_dnn(songs: list[ManifestSong], cfg: ExperimentConfig) -> tuple[MlpModel, np.ndarray]:
    X, Y = build_training_set(songs, cfg.stft, cfg.patch)
    model = init_model(cfg.layer_sizes, seed=cfg.seed)
    train_cfg = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                            loss=cfg.loss, shuffle_seed=cfg.seed)
    return train_sgd(model, X, Y, train_cfg)


def train_nmf(songs: list[ManifestSong], cfg: ExperimentConfig) -> NmfModel:
    V_v, V_nv = build_class_matrices(songs, cfg.stft, cfg.patch)
    w_v = nmf_train_class(V_v, cfg.nmf_rank, cfg.nmf_train_iters, seed=cfg.seed)
    w_nv = nmf_train_class(V_nv, cfg.nmf_rank, cfg.nmf_train_iters, seed=cfg.seed + 1)
    return NmfModel(w_v, w_nv, n_bins=cfg.stft.n_bins, width=cfg.patch.width)


# ---------------------------------------------------------------------------
# separation
# ---------------------------------------------------------------------------

def confidence_grid(mix: AudioBuffer, model: MlpModel | NmfModel,
                    cfg: ExperimentConfig,
                    infer_seed: int = 0) -> tuple[MeanPrediction, ComplexSpectrogram]:
    """Mean per-element vocal confidence for a mixture, plus its spectrogram.

    All alpha thresholds derive from this one grid, so a sweep reuses it.
    """
    spec = stft(mix, cfg.stft)
    mag, _ = split(spec)
    norm, _ = normalize_unit_scale(mag)
    patches = extract_patches(norm, cfg.patch, cfg.patch.test_stride,
                              kind=KIND_MIXTURE)
    if isinstance(model, MlpModel):
        mean = repack_mean(predict_masks(model, patches))
    elif isinstance(model, NmfModel):
        V_u = flatten_set(patches).T
        v_hat, nv_hat = nmf_separate(V_u, model, cfg.nmf_infer_iters, seed=infer_seed)
        mean = mean_prediction_from_soft(
            v_hat, nv_hat, model.n_bins, model.width,
            patches.offsets, patches.total_frames,
        )
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return mean, spec


def threshold_and_invert(mean: MeanPrediction, spec: ComplexSpectrogram,
                         alpha: float) -> tuple[AudioBuffer, AudioBuffer]:
    """Confidence grid -> two masks -> masked inversions."""
    m_v = vocal_mask_from_confidence(mean, alpha)
    m_nv = nonvocal_mask_from_confidence(mean, alpha)
    return istft(apply_mask(spec, m_v)), istft(apply_mask(spec, m_nv))


def separate_song(mix: AudioBuffer, model: MlpModel | NmfModel, alpha: float,
                  cfg: ExperimentConfig,
                  infer_seed: int = 0) -> tuple[AudioBuffer, AudioBuffer]:
    """One mixture, one model, one alpha -> (vocal estimate, accompaniment)."""
    mean, spec = confidence_grid(mix, model, cfg, infer_seed=infer_seed)
    return threshold_and_invert(mean, spec, alpha)


def ideal_mask_separate(stems: StemSet,
                        stft_cfg: StftConfig) -> tuple[AudioBuffer, AudioBuffer]:
    """Oracle separation: the true-source mask applied to the true mixture."""
    vocal_mix, nonvocal_mix, full_mix = pool_and_mix(stems)
    mag_v, _ = split(stft(vocal_mix, stft_cfg))
    mag_nv, _ = split(stft(nonvocal_mix, stft_cfg))
    spec = stft(full_mix, stft_cfg)
    ibm = ideal_binary_mask(mag_v, mag_nv)
    complement = BinaryMask(1.0 - ibm.values, source_tag=NON_VOCAL)
    return istft(apply_mask(spec, ibm)), istft(apply_mask(spec, complement))


# ---------------------------------------------------------------------------
# alpha sweep and CSV emission
# ---------------------------------------------------------------------------

def _metrics_or_floor(est: np.ndarray, refs: list[np.ndarray],
                      target_index: int) -> SeparationMetrics:
    """A silent estimate (possible at high alpha: no element claimed) has no
    defined decomposition; score it as -inf on every axis."""
    if not np.any(est):
        neg = float("-inf")
        return SeparationMetrics(neg, neg, neg)
    return evaluate_source(est, refs, target_index)


def _score_pair(est_v: np.ndarray, est_nv: np.ndarray, ref_v: np.ndarray,
                ref_nv: np.ndarray) -> PairMetrics:
    refs = [ref_v, ref_nv]
    m_v = _metrics_or_floor(est_v, refs, 0)
    m_nv = _metrics_or_floor(est_nv, refs, 1)
    mean = SeparationMetrics(
        (m_v.sdr_db + m_nv.sdr_db) / 2.0,
        (m_v.sir_db + m_nv.sir_db) / 2.0,
        (m_v.sar_db + m_nv.sar_db) / 2.0,
    )
    return PairMetrics(vocal=m_v, nonvocal=m_nv, mean=mean)


@dataclass
class SongResult:
    song_id: str
    # per method: alpha -> PairMetrics; alpha-independent methods use key None
    metrics: dict[str, dict[float | None, PairMetrics]]


@dataclass
class SweepResult:
    songs: list[SongResult]
    alphas: tuple[float, ...]
    methods: tuple[str, ...]


def _evaluate_song(song: ManifestSong, models: dict[str, MlpModel | NmfModel],
                   cfg: ExperimentConfig, song_index: int) -> SongResult:
    stems = load_song(song)
    vocal_mix, nonvocal_mix, full_mix = pool_and_mix(stems)
    ref_v, ref_nv = vocal_mix.samples, nonvocal_mix.samples
    out: dict[str, dict[float | None, PairMetrics]] = {}

    for method, model in models.items():
        mean, spec = confidence_grid(full_mix, model, cfg,
                                     infer_seed=cfg.seed + 7000 + song_index)
        per_alpha: dict[float | None, PairMetrics] = {}
        for alpha in cfg.alphas:
            est_v, est_nv = threshold_and_invert(mean, spec, alpha)
            per_alpha[alpha] = _score_pair(est_v.samples, est_nv.samples,
                                           ref_v, ref_nv)
        out[method] = per_alpha

    est_v, est_nv = ideal_mask_separate(stems, cfg.stft)
    out[METHOD_IDEAL] = {None: _score_pair(est_v.samples, est_nv.samples,
                                           ref_v, ref_nv)}
    out[METHOD_MIXTURE] = {None: _score_pair(full_mix.samples, full_mix.samples,
                                             ref_v, ref_nv)}
    return SongResult(song.song_id, out)


def sweep_alpha(songs: list[ManifestSong], models: dict[str, MlpModel | NmfModel],
                cfg: ExperimentConfig) -> SweepResult:
    """Evaluate every model on every test song across the alpha grid.

    Songs run in parallel (MASKFORGE_THREADS caps the pool); results are
    keyed by manifest order, so the output is independent of scheduling.
    """
    if not songs:
        raise ValueError("no test songs")
    with ThreadPoolExecutor(max_workers=_thread_count(len(songs))) as pool:
        results = list(pool.map(
            lambda pair: _evaluate_song(pair[1], models, cfg, pair[0]),
            enumerate(songs),
        ))
    methods = (*models.keys(), METHOD_IDEAL, METHOD_MIXTURE)
    return SweepResult(songs=results, alphas=cfg.alphas, methods=methods)


def _fmt(x: float) -> str:
    return "%.6f" % x


def _mean_and_ci(values: list[float]) -> tuple[float, str]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(arr))
    if len(arr) < 2 or not np.all(np.isfinite(arr)):
        return mean, ""
    sem = float(np.std(arr, ddof=1)) / np.sqrt(len(arr))
    half = float(stats.t.ppf(0.975, len(arr) - 1)) * sem
    return mean, _fmt(half)


def _collect(sweep: SweepResult, method: str, alpha: float,
             source: str) -> list[float]:
    """Per-song (sdr, sir, sar) triples for one (method, alpha, source) cell."""
    rows = []
    for song in sweep.songs:
        per_alpha = song.metrics[method]
        pm = per_alpha.get(alpha, per_alpha.get(None))
        m = {VOCAL: pm.vocal, NON_VOCAL: pm.nonvocal, "mean": pm.mean}[source]
        rows.append(m.as_tuple())
    return rows


def fig2_rows(sweep: SweepResult) -> list[str]:
    """alpha,method,source,sdr_db,sir_db,sar_db,ci95 (ci95 is the SDR CI)."""
    lines = [FIG2_HEADER]
    for alpha in sweep.alphas:
        for method in sorted(sweep.methods):
            for source in _SOURCE_ORDER:
                triples = _collect(sweep, method, alpha, source)
                sdr_mean, ci = _mean_and_ci([t[0] for t in triples])
                sir_mean = float(np.mean([t[1] for t in triples]))
                sar_mean = float(np.mean([t[2] for t in triples]))
                lines.append(",".join([
                    "%g" % alpha, method, source,
                    _fmt(sdr_mean), _fmt(sir_mean), _fmt(sar_mean), ci,
                ]))
    return lines


def fig3_rows(sweep: SweepResult) -> list[str]:
    """alpha,method,scope,sir_db,sar_db for the SAR-vs-SIR trajectory."""
    lines = [FIG3_HEADER]
    for alpha in sweep.alphas:
        for method in sorted(sweep.methods):
            for scope in _SOURCE_ORDER:
                triples = _collect(sweep, method, alpha, scope)
                sir_mean = float(np.mean([t[1] for t in triples]))
                sar_mean = float(np.mean([t[2] for t in triples]))
                lines.append(",".join([
                    "%g" % alpha, method, scope, _fmt(sir_mean), _fmt(sar_mean),
                ]))
    return lines


def per_song_rows(sweep: SweepResult) -> list[str]:
    """song_id,method,alpha,source,sdr_db,sir_db,sar_db with one row per cell."""
    lines = [PER_SONG_HEADER]
    for song in sorted(sweep.songs, key=lambda s: s.song_id):
        for method in sorted(sweep.methods):
            per_alpha = song.metrics[method]
            for alpha in sweep.alphas:
                pm = per_alpha.get(alpha, per_alpha.get(None))
                for source in _SOURCE_ORDER:
                    m = {VOCAL: pm.vocal, NON_VOCAL: pm.nonvocal,
                         "mean": pm.mean}[source]
                    lines.append(",".join([
                        song.song_id, method, "%g" % alpha, source,
                        _fmt(m.sdr_db), _fmt(m.sir_db), _fmt(m.sar_db),
                    ]))
    return lines


def write_csv(path: str | Path, lines: list[str]) -> None:
    Path(path).write_text("\n".join(lines) + "\n")


def run_sweep_to_csv(songs: list[ManifestSong],
                     models: dict[str, MlpModel | NmfModel],
                     cfg: ExperimentConfig, fig2_path: str | Path,
                     fig3_path: str | Path | None = None,
                     per_song_path: str | Path | None = None) -> SweepResult:
    sweep = sweep_alpha(songs, models, cfg)
    write_csv(fig2_path, fig2_rows(sweep))
    if fig3_path is not None:
        write_csv(fig3_path, fig3_rows(sweep))
    if per_song_path is not None:
        write_csv(per_song_path, per_song_rows(sweep))
    return sweep
