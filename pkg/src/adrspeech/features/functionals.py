"""Statistical functionals turning LLD trajectories into the 88-dim frame vector.

Conventions, applied uniformly so every output is finite:
  - mean over an empty/undefined set -> 0
  - coefficient of variation = population std / |mean|, 0 when |mean| < 1e-12
  - voiced-only descriptors use voiced sub-windows (NaN entries dropped);
    a frame with no usable values gets 0 for those entries
  - segment lengths are measured in sub-window hops converted to seconds

Mean/CV pairs are computed column-batched over stacked descriptor matrices;
per-column Python loops over 98-point arrays would dominate the runtime.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from .lld import LLDSeries
from .names import FEATURE_COUNT, FEATURE_NAMES


def _masked_mean_cv(cols: np.ndarray, row_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise mean and coefficient of variation over masked finite entries."""
    mask = np.isfinite(cols) & row_mask[:, None]
    cnt = mask.sum(axis=0)
    safe = np.maximum(cnt, 1)
    vals = np.where(mask, cols, 0.0)
    mean = vals.sum(axis=0) / safe
    sq = (vals * vals).sum(axis=0) / safe
    std = np.sqrt(np.maximum(sq - mean * mean, 0.0))
    cv = np.divide(std, np.abs(mean), out=np.zeros_like(std),
                   where=np.abs(mean) > 1e-12)
    present = cnt > 0
    return np.where(present, mean, 0.0), np.where(present, cv, 0.0)


def _percentiles(vals: np.ndarray) -> tuple[float, float, float, float]:
    if vals.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    p20, p50, p80 = np.percentile(vals, [20.0, 50.0, 80.0])
    return float(p20), float(p50), float(p80), float(p80 - p20)


def _run_slopes(contour: np.ndarray, hop_s: float) -> tuple[list[float], list[float]]:
    """Slopes of maximal strictly rising / falling runs, in units per second."""
    rising: list[float] = []
    falling: list[float] = []
    if len(contour) < 2:
        return rising, falling
    sign = np.sign(np.diff(contour))
    i = 0
    n = len(sign)
    while i < n:
        s = sign[i]
        if s == 0:
            i += 1
            continue
        j = i
        while j < n and sign[j] == s:
            j += 1
        slope = (contour[j] - contour[i]) / ((j - i) * hop_s)
        (rising if s > 0 else falling).append(float(slope))
        i = j
    return rising, falling


def _slope_stats(rising: list[float], falling: list[float]) -> list[float]:
    out = []
    for xs in (rising, falling):
        if xs:
            arr = np.asarray(xs)
            out.extend((float(arr.mean()), float(arr.std())))
        else:
            out.extend((0.0, 0.0))
    return out


def _bool_runs(mask: np.ndarray) -> list[int]:
    """Lengths of maximal True runs."""
    runs: list[int] = []
    count = 0
    for flag in mask:
        if flag:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    if count:
        runs.append(count)
    return runs


def apply_functionals(llds: LLDSeries) -> np.ndarray:
    """Summarize one frame's LLD series into the fixed 88-entry vector."""
    v = llds.voiced
    uv = ~v
    hop_s = llds.hop_seconds
    out: list[float] = []

    ones = np.ones(llds.n_subwindows, dtype=bool)
    all_cols = np.column_stack((llds.spectral_flux, llds.mfcc))
    all_mean, all_cv = _masked_mean_cv(all_cols, ones)
    voiced_cols = np.column_stack((
        llds.jitter_local, llds.shimmer_db, llds.hnr_db,
        llds.h1_h2_db, llds.h1_a3_db,
        llds.formant_freq[:, 0], llds.formant_bw[:, 0], llds.formant_amp_db[:, 0],
        llds.formant_freq[:, 1], llds.formant_bw[:, 1], llds.formant_amp_db[:, 1],
        llds.formant_freq[:, 2], llds.formant_bw[:, 2], llds.formant_amp_db[:, 2],
        llds.alpha_ratio_db, llds.hammarberg_db,
        llds.slope_0_500, llds.slope_500_1500,
        llds.spectral_flux, llds.mfcc,
    ))
    v_mean, v_cv = _masked_mean_cv(voiced_cols, v)
    uv_cols = np.column_stack((
        llds.alpha_ratio_db, llds.hammarberg_db,
        llds.slope_0_500, llds.slope_500_1500, llds.spectral_flux,
    ))
    uv_mean, _ = _masked_mean_cv(uv_cols, uv)

    # f0 (voiced-only): mean, cv, percentiles, range, rising/falling slopes
    f0v = llds.f0_semitone[v]
    f0_mean, f0_cv = _masked_mean_cv(f0v[:, None], np.ones(len(f0v), dtype=bool))
    out.extend((float(f0_mean[0]), float(f0_cv[0])))
    out.extend(_percentiles(f0v))
    # slopes are taken inside contiguous voiced stretches only
    rising: list[float] = []
    falling: list[float] = []
    pos = np.flatnonzero(v)
    if pos.size:
        splits = np.flatnonzero(np.diff(pos) > 1) + 1
        for seg in np.split(pos, splits):
            r, f = _run_slopes(llds.f0_semitone[seg], hop_s)
            rising.extend(r)
            falling.extend(f)
    out.extend(_slope_stats(rising, falling))

    # loudness (all sub-windows)
    loud = llds.loudness
    l_mean, l_cv = _masked_mean_cv(loud[:, None], ones)
    out.extend((float(l_mean[0]), float(l_cv[0])))
    out.extend(_percentiles(loud))
    out.extend(_slope_stats(*_run_slopes(loud, hop_s)))

    # spectral flux + MFCC over all sub-windows
    for j in range(5):
        out.extend((float(all_mean[j]), float(all_cv[j])))
    # every voiced-only mean/cv pair, in table order
    for j in range(voiced_cols.shape[1]):
        out.extend((float(v_mean[j]), float(v_cv[j])))
    out.extend(float(x) for x in uv_mean)

    # temporal statistics over the frame
    dur = llds.frame_seconds
    rng = float(loud.max() - loud.min()) if loud.size else 0.0
    if rng > 0:
        peaks, _ = find_peaks(loud, prominence=0.25 * rng)
        out.append(len(peaks) / dur)
    else:
        out.append(0.0)
    vruns = _bool_runs(v)
    uvruns = _bool_runs(uv)
    out.append(len(vruns) / dur)
    for runs in (vruns, uvruns):
        if runs:
            lens = np.asarray(runs, dtype=np.float64) * hop_s
            out.extend((float(lens.mean()), float(lens.std())))
        else:
            out.extend((0.0, 0.0))
    out.append(llds.equivalent_sound_level_db)

    vec = np.asarray(out, dtype=np.float64)
    assert vec.shape == (FEATURE_COUNT,), f"built {vec.shape[0]} of {FEATURE_COUNT} features"
    return vec


def feature_index(name: str) -> int:
    return FEATURE_NAMES.index(name)
