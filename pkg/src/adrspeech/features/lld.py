"""Low-level descriptor extraction over 25 ms sub-windows with 10 ms hop.

Per sub-window: F0 (autocorrelation, 55-1000 Hz band) with a voicing flag,
RMS loudness, spectral flux, MFCC 1-4, jitter/shimmer from detected glottal
cycles, HNR, harmonic differences H1-H2 and H1-A3, three LPC formants
(frequency, bandwidth, amplitude relative to H1), alpha ratio, Hammarberg
index, and two spectral slopes. Undefined values (unvoiced sub-windows,
missing formants, too few cycles) are stored as NaN; the functional layer
masks them and imputes zeros, so the final 88-vector is always finite.

Everything is vectorized across sub-windows; LPC root-finding, harmonic
amplitudes, and the cycle statistics run on voiced rows only, which keeps a
fully unvoiced frame cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from ..errors import DataError
from ._kernels import formant_batch, pitch_pick, track_cycles_core, window_peak

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction knobs; defaults follow the 25 ms / 10 ms convention."""

    subwindow_ms: float = 25.0
    hop_ms: float = 10.0
    f0_min_hz: float = 55.0
    f0_max_hz: float = 1000.0
    voicing_threshold: float = 0.45   # on unbiased normalized autocorrelation
    energy_floor_rms: float = 1e-4    # sub-windows quieter than this are unvoiced
    n_mel_filters: int = 26
    mel_low_hz: float = 20.0
    mel_high_hz: float = 8000.0       # capped at 0.98 * Nyquist
    preemphasis: float = 0.97
    lpc_order_offset: int = 2         # order = offset + sample_rate / 1000
    formant_ceiling_hz: float = 5500.0
    formant_max_bandwidth_hz: float = 600.0  # rejects broad valley-filling poles


DEFAULT_CONFIG = FeatureConfig()


@dataclass
class LLDSeries:
    """Per-sub-window descriptor trajectories for one frame."""

    n_subwindows: int
    hop_seconds: float
    frame_seconds: float
    voiced: np.ndarray          # bool (n,)
    f0_hz: np.ndarray           # 0 when unvoiced
    f0_semitone: np.ndarray     # semitones above 27.5 Hz, 0 when unvoiced
    loudness: np.ndarray        # RMS intensity
    spectral_flux: np.ndarray
    mfcc: np.ndarray            # (n, 4)
    jitter_local: np.ndarray    # NaN where undefined
    shimmer_db: np.ndarray      # NaN where undefined
    hnr_db: np.ndarray          # NaN where unvoiced
    h1_h2_db: np.ndarray        # NaN where unvoiced
    h1_a3_db: np.ndarray        # NaN where unvoiced or F3 missing
    formant_freq: np.ndarray    # (n, 3), NaN where missing
    formant_bw: np.ndarray      # (n, 3)
    formant_amp_db: np.ndarray  # (n, 3), harmonic level near Fi relative to H1
    alpha_ratio_db: np.ndarray
    hammarberg_db: np.ndarray
    slope_0_500: np.ndarray     # dB per octave
    slope_500_1500: np.ndarray
    equivalent_sound_level_db: float


def _pow2_at_least(n: int) -> int:
    return 1 << int(np.ceil(np.log2(n)))


class _Plan:
    """Precomputed per-(sample_rate, config) machinery."""

    def __init__(self, sr: int, cfg: FeatureConfig):
        self.sr = sr
        self.cfg = cfg
        self.win = int(round(cfg.subwindow_ms * 1e-3 * sr))
        self.hop = int(round(cfg.hop_ms * 1e-3 * sr))
        self.window = np.hamming(self.win)
        self.n_fft = _pow2_at_least(self.win)
        self.freqs = np.fft.rfftfreq(self.n_fft, 1.0 / sr)
        self.df = sr / self.n_fft

        self.lag_min = max(2, int(np.floor(sr / cfg.f0_max_hz)))
        self.lag_max = min(self.win - 2, int(np.ceil(sr / cfg.f0_min_hz)))
        self.ac_len = _pow2_at_least(self.win + self.lag_max + 1)
        self.unbias = self.win / np.maximum(self.win - np.arange(self.lag_max + 1), 1.0)

        self.lpc_order = cfg.lpc_order_offset + sr // 1000
        self.lpc_len = _pow2_at_least(self.win + self.lpc_order + 1)

        self.mel_bank_t = _mel_filterbank(cfg.n_mel_filters, self.n_fft, sr,
                                          cfg.mel_low_hz,
                                          min(cfg.mel_high_hz, 0.98 * sr / 2)).T
        self.dct_rows_t = _dct_matrix(cfg.n_mel_filters)[1:5].T  # MFCC 1..4

        nyq = sr / 2
        f = self.freqs

        def band(f_lo: float, f_hi: float, include_lo: bool = False) -> slice:
            mask = ((f >= f_lo) if include_lo else (f > f_lo)) & (f <= f_hi)
            idx = np.flatnonzero(mask)
            return slice(int(idx[0]), int(idx[-1]) + 1)

        self.alpha_low = band(50.0, 1000.0, include_lo=True)
        self.alpha_high = band(1000.0, min(5000.0, 0.98 * nyq))
        self.hamm_low = band(-1.0, 2000.0)
        self.hamm_high = band(2000.0, min(5000.0, 0.98 * nyq))
        self.slope_lo_proj = _slope_projector(f, 0.0, 500.0)
        self.slope_hi_proj = _slope_projector(f, 500.0, 1500.0)
        # dB spectrum is only consumed by the two slope bands
        self.slope_bins = np.flatnonzero(self.slope_lo_proj[0] | self.slope_hi_proj[0])
        self.slope_lo_cols = self.slope_lo_proj[0][self.slope_bins]
        self.slope_hi_cols = self.slope_hi_proj[0][self.slope_bins]


def _mel_filterbank(n_filters: int, n_fft: int, sr: int,
                    f_low: float, f_high: float) -> np.ndarray:
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    edges = from_mel(np.linspace(to_mel(f_low), to_mel(f_high), n_filters + 2))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    bank = np.zeros((n_filters, len(freqs)))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II rows."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (2 * m + 1) / (2 * n)) * np.sqrt(2.0 / n)
    mat[0] /= np.sqrt(2.0)
    return mat


def _slope_projector(freqs: np.ndarray, f_lo: float, f_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """(bin mask, least-squares row) so dB_band @ row = slope in dB/octave."""
    mask = (freqs > max(f_lo, 1e-9)) & (freqs <= f_hi)
    x = np.log2(freqs[mask])
    xc = x - x.mean()
    return mask, xc / np.dot(xc, xc)


@lru_cache(maxsize=8)
def _plan_for(sr: int, cfg: FeatureConfig) -> _Plan:
    return _Plan(sr, cfg)


def _batch_autocorr_f32(rows: np.ndarray, pad: int, max_lag: int) -> np.ndarray:
    """Linear autocorrelation rows via FFT, single precision (peak picking only)."""
    spec = scipy.fft.rfft(rows.astype(np.float32), n=pad, axis=1)
    ac = scipy.fft.irfft(spec * np.conj(spec), n=pad, axis=1)
    return ac[:, :max_lag + 1]


def _formants_for_rows(rows: np.ndarray, plan: _Plan) -> tuple[np.ndarray, np.ndarray]:
    """LPC formant frequencies/bandwidths for the given rows, NaN when missing.

    Rows are pre-emphasized and Hamming-windowed inside the kernel; roots of
    the monic predictor polynomial give candidate resonances, gated on
    frequency range and bandwidth and sorted ascending.
    """
    cfg = plan.cfg
    return formant_batch(rows, plan.window, cfg.preemphasis, plan.lpc_order,
                         float(plan.sr), cfg.formant_ceiling_hz,
                         cfg.formant_max_bandwidth_hz)


def _track_cycles(x: np.ndarray, period0: float) -> tuple[np.ndarray, np.ndarray]:
    """Walk the frame locating one amplitude peak per glottal cycle.

    Starts from the strongest sample in the first 1.5 periods, then searches
    [0.7, 1.3] x (current period) ahead, refining each peak position and
    height parabolically. Returns (positions in samples, peak heights).
    """
    cap = len(x) // max(1, int(round(0.35 * period0))) + 4
    pos = np.empty(cap)
    heights = np.empty(cap)
    count = track_cycles_core(np.ascontiguousarray(x), period0, pos, heights)
    return pos[:count], heights[:count]


def _jitter_shimmer(x: np.ndarray, voiced: np.ndarray, f0_hz: np.ndarray,
                    plan: _Plan) -> tuple[np.ndarray, np.ndarray]:
    """Per-sub-window local jitter and dB shimmer from the frame's cycle track.

    A sub-window needs >= 3 cycle peaks inside it (two adjacent periods);
    anything less stays NaN.
    """
    n_sub = len(voiced)
    jitter = np.full(n_sub, np.nan)
    shimmer = np.full(n_sub, np.nan)
    if not voiced.any():
        return jitter, shimmer
    f0_med = float(np.median(f0_hz[voiced]))
    if f0_med <= 0:
        return jitter, shimmer
    pos, h = _track_cycles(x - x.mean(), plan.sr / f0_med)
    if len(pos) < 3:
        return jitter, shimmer

    periods = np.diff(pos)
    period_gaps = np.abs(np.diff(periods))
    with np.errstate(divide="ignore", invalid="ignore"):
        logh = np.where(h > 1e-12, 20.0 * np.log10(np.maximum(h, 1e-300)), np.nan)
    dlog = np.abs(np.diff(logh))
    dlog_ok = np.isfinite(dlog)

    cs_per = np.concatenate(([0.0], np.cumsum(periods)))
    cs_gap = np.concatenate(([0.0], np.cumsum(period_gaps)))
    cs_dl = np.concatenate(([0.0], np.cumsum(np.where(dlog_ok, dlog, 0.0))))
    cs_dlc = np.concatenate(([0], np.cumsum(dlog_ok)))

    starts = np.arange(n_sub) * plan.hop
    lo = np.searchsorted(pos, starts)
    hi = np.searchsorted(pos, starts + plan.win)
    npk = hi - lo
    usable = voiced & (npk >= 3)
    m = len(pos)

    # all indices are clipped into range; rows that underflow are masked out
    # by `usable` anyway (they have fewer than 3 peaks in the sub-window)
    lo_p = np.minimum(lo, m - 1)
    hi_p = np.clip(hi - 1, lo_p, m - 1)
    lo_g = np.minimum(lo, m - 2)
    hi_g = np.clip(hi - 2, lo_g, m - 2)

    per_cnt = np.maximum(hi_p - lo_p, 1)
    per_sum = cs_per[hi_p] - cs_per[lo_p]
    gap_cnt = np.maximum(hi_g - lo_g, 1)
    gap_sum = cs_gap[hi_g] - cs_gap[lo_g]
    mean_period = per_sum / per_cnt
    with np.errstate(divide="ignore", invalid="ignore"):
        jit = (gap_sum / gap_cnt) / mean_period
    jit_ok = usable & (mean_period > 0)
    jitter[jit_ok] = jit[jit_ok]

    dl_sum = cs_dl[hi_p] - cs_dl[lo_p]
    dl_cnt = cs_dlc[hi_p] - cs_dlc[lo_p]
    shim_ok = usable & (dl_cnt >= 1)
    shimmer[shim_ok] = dl_sum[shim_ok] / dl_cnt[shim_ok]
    return jitter, shimmer


def extract_llds(samples: np.ndarray, sample_rate: int,
                 config: FeatureConfig = DEFAULT_CONFIG) -> LLDSeries:
    """Compute all low-level descriptor series for one (nominally 1 s) frame."""
    if sample_rate < 16000:
        raise DataError(f"sample rate {sample_rate} Hz below the 16 kHz minimum")
    x = np.ascontiguousarray(samples, dtype=np.float64)
    plan = _plan_for(int(sample_rate), config)
    if len(x) < plan.win:
        raise DataError("frame shorter than one analysis sub-window")

    subs = np.lib.stride_tricks.sliding_window_view(x, plan.win)[::plan.hop]
    n_sub = subs.shape[0]
    sub_dm = subs - subs.mean(axis=1, keepdims=True)

    rms = np.sqrt((subs * subs).mean(axis=1))
    audible = rms >= config.energy_floor_rms

    # --- spectra (Hamming-windowed, shared by all spectral descriptors)
    mags = np.abs(scipy.fft.rfft(sub_dm * plan.window, n=plan.n_fft, axis=1))
    power = mags * mags

    # --- pitch via unbiased normalized autocorrelation (skipped when the
    #     whole frame is below the energy floor: nothing can be voiced)
    if audible.any():
        ac = _batch_autocorr_f32(sub_dm, plan.ac_len, plan.lag_max)
        r0 = ac[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            norm = ac / r0[:, None]
        norm = norm.astype(np.float64) * plan.unbias[None, :]
        norm[~np.isfinite(norm)] = 0.0

        # among near-best peaks take the shortest lag: picks the true period
        # rather than one of its multiples for perfectly periodic signals
        best, lag_int = pitch_pick(norm, plan.lag_min, 0.85)

        voiced = (best >= config.voicing_threshold) & audible & (r0 > 1e-20)

        rows = np.arange(n_sub)
        ym = norm[rows, np.maximum(lag_int - 1, 0)]
        y0 = norm[rows, lag_int]
        yp = norm[rows, np.minimum(lag_int + 1, plan.lag_max)]
        denom = ym - 2.0 * y0 + yp
        shift = np.zeros(n_sub)
        np.divide(0.5 * (ym - yp), denom, out=shift, where=np.abs(denom) > 1e-12)
        lag = lag_int + np.clip(shift, -0.5, 0.5)
        peak_r = np.clip(y0, 1e-6, 1.0 - 1e-7)

        f0_hz = np.where(voiced, sample_rate / lag, 0.0)
        f0_semitone = np.where(voiced, 12.0 * np.log2(np.maximum(f0_hz, 1e-6) / 27.5), 0.0)
        hnr_db = np.where(voiced, 10.0 * np.log10(peak_r / (1.0 - peak_r)), np.nan)
    else:
        voiced = np.zeros(n_sub, dtype=bool)
        f0_hz = np.zeros(n_sub)
        f0_semitone = np.zeros(n_sub)
        hnr_db = np.full(n_sub, np.nan)

    # --- loudness, flux, MFCC
    loudness = rms
    msum = mags.sum(axis=1, keepdims=True)
    mnorm = mags / np.maximum(msum, LOG_FLOOR)
    flux = np.zeros(n_sub)
    if n_sub > 1:
        d = mnorm[1:] - mnorm[:-1]
        flux[1:] = (d * d).sum(axis=1)
    mfcc = np.log(np.maximum(power @ plan.mel_bank_t, LOG_FLOOR)) @ plan.dct_rows_t

    # --- band-level spectral descriptors
    alpha = 10.0 * np.log10((power[:, plan.alpha_low].sum(axis=1) + LOG_FLOOR)
                            / (power[:, plan.alpha_high].sum(axis=1) + LOG_FLOOR))
    hamm = 20.0 * np.log10((mags[:, plan.hamm_low].max(axis=1) + LOG_FLOOR)
                           / (mags[:, plan.hamm_high].max(axis=1) + LOG_FLOOR))
    db_slope_bins = 20.0 * np.log10(mags[:, plan.slope_bins] + LOG_FLOOR)
    slope_lo = db_slope_bins[:, plan.slope_lo_cols] @ plan.slope_lo_proj[1]
    slope_hi = db_slope_bins[:, plan.slope_hi_cols] @ plan.slope_hi_proj[1]

    # --- voiced-row work: formants, harmonic amplitudes, cycle statistics
    formant_freq = np.full((n_sub, 3), np.nan)
    formant_bw = np.full((n_sub, 3), np.nan)
    formant_amp = np.full((n_sub, 3), np.nan)
    h1_h2 = np.full(n_sub, np.nan)
    h1_a3 = np.full(n_sub, np.nan)
    vrows = np.flatnonzero(voiced)
    if vrows.size:
        formant_freq[vrows], formant_bw[vrows] = _formants_for_rows(
            np.ascontiguousarray(sub_dm[vrows]), plan)

        f0v = f0_hz[vrows]
        half = np.maximum(2.0 * plan.df, 0.25 * f0v)
        mv = np.ascontiguousarray(mags[vrows])
        a_h1 = window_peak(mv, f0v, half, plan.df)
        a_h2 = window_peak(mv, 2.0 * f0v, half, plan.df)
        h1_h2[vrows] = 20.0 * np.log10((a_h1 + LOG_FLOOR) / (a_h2 + LOG_FLOOR))
        nyq = sample_rate / 2.0
        for j in range(3):
            fj = formant_freq[vrows, j]
            has = np.isfinite(fj)
            harm = np.maximum(1.0, np.round(np.where(has, fj, f0v) / f0v))
            target = np.minimum(harm * f0v, nyq - plan.df)
            a_fj = window_peak(mv, target, half, plan.df)
            amp = 20.0 * np.log10((a_fj + LOG_FLOOR) / (a_h1 + LOG_FLOOR))
            formant_amp[vrows[has], j] = amp[has]
            if j == 2:
                h1_a3[vrows[has]] = -amp[has]

    jitter, shimmer = _jitter_shimmer(x, voiced, f0_hz, plan)

    leq = 10.0 * np.log10(max(float((x * x).mean()), LOG_FLOOR))

    return LLDSeries(
        n_subwindows=n_sub,
        hop_seconds=plan.hop / sample_rate,
        frame_seconds=len(x) / sample_rate,
        voiced=voiced,
        f0_hz=f0_hz,
        f0_semitone=f0_semitone,
        loudness=loudness,
        spectral_flux=flux,
        mfcc=mfcc,
        jitter_local=jitter,
        shimmer_db=shimmer,
        hnr_db=hnr_db,
        h1_h2_db=h1_h2,
        h1_a3_db=h1_a3,
        formant_freq=formant_freq,
        formant_bw=formant_bw,
        formant_amp_db=formant_amp,
        alpha_ratio_db=alpha,
        hammarberg_db=hamm,
        slope_0_500=slope_lo,
        slope_500_1500=slope_hi,
        equivalent_sound_level_db=leq,
    )
