"""Audio loading, program-loudness measurement/normalization, and 1 s framing.

Loudness follows ITU-R BS.1770 / EBU R128 integrated loudness: K-weighting
(high-shelf + high-pass biquads), 400 ms gating blocks with 75% overlap, a
-70 LUFS absolute gate and a -10 LU relative gate. Normalization is two-pass:
measure, then apply one constant gain (hard-clipping anything past +/-1 and
counting the clipped samples).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

from .errors import (
    EmptyStreamError,
    ShortRecordingError,
    ShortRecordingWarning,
    SilentRecordingError,
    UnsupportedCodecError,
)

ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = -10.0
BLOCK_SECONDS = 0.4
BLOCK_OVERLAP = 0.75
DEFAULT_TARGET_LUFS = -23.0
MIN_SAMPLE_RATE = 16000


@dataclass
class Recording:
    """Mono PCM audio: samples in [-1, 1] at a fixed sample rate."""

    id: str
    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class LoudnessReport:
    integrated_loudness: float  # LUFS, -inf when fully gated
    gating_block_count: int     # blocks surviving both gates
    target: float | None = None
    applied_gain: float | None = None  # dB
    clipped_samples: int = 0


@dataclass
class FrameSlice:
    recording_id: str
    index: int
    samples: np.ndarray = field(repr=False)


def load_wav(path: str | Path, recording_id: str | None = None,
             min_sample_rate: int = MIN_SAMPLE_RATE) -> Recording:
    """Read a PCM WAV file into a mono [-1, 1] float recording.

    Accepts 8/16/24/32-bit integer and 32/64-bit float encodings; multichannel
    input is downmixed by channel averaging. Sample rates below
    ``min_sample_rate`` are rejected (no resampling in this pipeline).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise UnsupportedCodecError(f"{path}: {exc}") from None
    if data.size == 0:
        raise EmptyStreamError(f"{path}: zero-length data chunk")
    if rate < min_sample_rate:
        raise UnsupportedCodecError(
            f"{path}: sample rate {rate} Hz below required {min_sample_rate} Hz")

    if data.dtype == np.uint8:          # 8-bit is unsigned, midpoint 128
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:        # covers 24-bit, stored high-byte aligned
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: unsupported sample format {data.dtype}")

    if x.ndim > 1:
        x = x.mean(axis=1)
    return Recording(id=recording_id or path.stem, samples=x, sample_rate=int(rate))


def write_wav(path: str | Path, rec: Recording) -> None:
    """Write a recording as 32-bit float WAV (keeps normalization exact)."""
    wavfile.write(str(path), rec.sample_rate, rec.samples.astype(np.float32))


def k_weighting_sos(sample_rate: int) -> np.ndarray:
    """K-weighting filter (BS.1770) as second-order sections for any rate.

    Pre-warped bilinear designs of the standard's analog prototypes; at 48 kHz
    this reproduces the published coefficient table to ~1e-12.
    """
    # stage 1: high-frequency shelving (+4 dB)
    f0, gain_db, q = 1681.9744509555319, 3.99984385397, 0.7071752369554193
    k = np.tan(np.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf = [(vh + vb * k / q + k * k) / a0,
             2.0 * (k * k - vh) / a0,
             (vh - vb * k / q + k * k) / a0,
             1.0,
             2.0 * (k * k - 1.0) / a0,
             (1.0 - k / q + k * k) / a0]
    # stage 2: high-pass (revised low-frequency B-curve)
    f0, q = 38.13547087613982, 0.5003270373253953
    k = np.tan(np.pi * f0 / sample_rate)
    a0 = 1.0 + k / q + k * k
    highpass = [1.0, -2.0, 1.0, 1.0,
                2.0 * (k * k - 1.0) / a0,
                (1.0 - k / q + k * k) / a0]
    return np.array([shelf, highpass])


def _block_mean_squares(rec: Recording) -> np.ndarray:
    """Mean square of the K-weighted signal over 400 ms blocks, 100 ms hop."""
    step = int(round(BLOCK_SECONDS * rec.sample_rate))
    hop = int(round(step * (1.0 - BLOCK_OVERLAP)))
    if len(rec.samples) < step:
        raise ShortRecordingError(
            f"{rec.id}: {rec.duration:.3f} s is shorter than one {BLOCK_SECONDS} s gating block")
    weighted = signal.sosfilt(k_weighting_sos(rec.sample_rate), rec.samples)
    sq = np.concatenate(([0.0], np.cumsum(weighted * weighted)))
    n_blocks = (len(rec.samples) - step) // hop + 1
    starts = np.arange(n_blocks) * hop
    return (sq[starts + step] - sq[starts]) / step


def _lufs(mean_square: np.ndarray | float) -> np.ndarray | float:
    with np.errstate(divide="ignore"):
        return -0.691 + 10.0 * np.log10(mean_square)


def measure_loudness(rec: Recording) -> LoudnessReport:
    """Integrated loudness in LUFS with BS.1770 two-stage gating.

    Returns -inf (0 surviving blocks) when every block falls below the
    absolute gate, e.g. for digital silence.
    """
    z = _block_mean_squares(rec)
    levels = _lufs(z)
    above_abs = levels > ABSOLUTE_GATE_LUFS
    if not above_abs.any():
        return LoudnessReport(integrated_loudness=-np.inf, gating_block_count=0)
    relative_gate = _lufs(z[above_abs].mean()) + RELATIVE_GATE_LU
    keep = above_abs & (levels > relative_gate)
    if not keep.any():
        return LoudnessReport(integrated_loudness=-np.inf, gating_block_count=0)
    return LoudnessReport(integrated_loudness=float(_lufs(z[keep].mean())),
                          gating_block_count=int(keep.sum()))


def normalize_loudness(rec: Recording, target: float = DEFAULT_TARGET_LUFS
                       ) -> tuple[Recording, LoudnessReport]:
    """Apply the constant gain that brings integrated loudness to ``target``.

    Samples pushed past +/-1 by the gain are hard-clipped and counted.
    Raises SilentRecordingError when the input loudness is -inf.
    """
    report = measure_loudness(rec)
    if not np.isfinite(report.integrated_loudness):
        raise SilentRecordingError(f"{rec.id}: silent input, loudness is -inf")
    gain_db = target - report.integrated_loudness
    scaled = rec.samples * (10.0 ** (gain_db / 20.0))
    clipped = int(np.count_nonzero(np.abs(scaled) > 1.0))
    if clipped:
        scaled = np.clip(scaled, -1.0, 1.0)
    report.target = target
    report.applied_gain = gain_db
    report.clipped_samples = clipped
    return Recording(rec.id, scaled, rec.sample_rate), report


def frame_1s(rec: Recording) -> list[FrameSlice]:
    """Cut into contiguous non-overlapping 1 s frames; the tail remainder is dropped.

    A recording shorter than 1 s yields no frames and a ShortRecordingWarning.
    """
    sr = rec.sample_rate
    n_frames = len(rec.samples) // sr
    if n_frames == 0:
        warnings.warn(f"{rec.id}: shorter than 1 s, no frames produced",
                      ShortRecordingWarning, stacklevel=2)
        return []
    return [FrameSlice(rec.id, k, rec.samples[k * sr:(k + 1) * sr])
            for k in range(n_frames)]
