"""Synthetic speech-like corpus generator.

Desk-scale stand-in for restricted clinical audio: each recording alternates
voiced "syllable" bursts (sawtooth source with wandering F0, resonant vowel
filtering, raised-cosine envelopes), unvoiced noise bursts, and silent
pauses. The two classes differ in F0 variability and pause behaviour, and
the pseudo-MMSE score is a monotone function of the realized pause fraction,
so acoustic pipelines have a real (but fully synthetic) signal to find.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .audio import Recording, write_wav
from .errors import DataError
from .manifest import ManifestEntry, write_manifest

VOWELS = {  # (F1, F2, F3) presets
    "a": (730.0, 1090.0, 2440.0),
    "i": (270.0, 2290.0, 3010.0),
    "u": (300.0, 870.0, 2240.0),
    "o": (570.0, 840.0, 2410.0),
}


@dataclass
class VoiceProfile:
    """Class-conditional generative parameters."""

    f0_base_hz: float = 130.0
    f0_wander_semitones: float = 3.0    # slow F0 movement inside a syllable
    pause_fraction: float = 0.15        # target fraction of silence
    pause_jitter: float = 0.04
    syllable_s: tuple[float, float] = (0.12, 0.35)
    pause_s: tuple[float, float] = (0.15, 0.9)
    noise_burst_prob: float = 0.25
    amplitude: float = 0.3


@dataclass
class CorpusSpec:
    control: VoiceProfile = field(default_factory=lambda: VoiceProfile(
        f0_base_hz=135.0, f0_wander_semitones=3.5, pause_fraction=0.15))
    impaired: VoiceProfile = field(default_factory=lambda: VoiceProfile(
        f0_base_hz=115.0, f0_wander_semitones=0.9, pause_fraction=0.45,
        pause_s=(0.4, 1.6)))
    duration_s: float = 14.0
    sample_rate: int = 16000

    def profile(self, group: str) -> VoiceProfile:
        return self.impaired if group == "AD" else self.control


def _resonator_sos(freqs: tuple[float, float, float], sr: int) -> np.ndarray:
    sections = []
    for f, bw in zip(freqs, (90.0, 120.0, 160.0)):
        r = np.exp(-np.pi * bw / sr)
        theta = 2.0 * np.pi * f / sr
        sections.append([1.0 - r, 0.0, 0.0, 1.0, -2.0 * r * np.cos(theta), r * r])
    return np.array(sections)


def _syllable(rng: np.random.Generator, profile: VoiceProfile, sr: int,
              duration: float) -> np.ndarray:
    n = max(int(duration * sr), sr // 50)
    t = np.arange(n) / sr
    # slow random F0 contour in semitones around the base
    wander = profile.f0_wander_semitones
    knots = rng.normal(0.0, wander, 4)
    contour = np.interp(t, np.linspace(0.0, duration, 4), knots)
    f0 = profile.f0_base_hz * 2.0 ** (contour / 12.0)
    phase = np.cumsum(f0) / sr
    source = 2.0 * (phase % 1.0) - 1.0            # sawtooth glottal stand-in
    source += rng.normal(0.0, 0.02, n)            # aspiration noise
    vowel = VOWELS[rng.choice(sorted(VOWELS))]
    shaped = signal.sosfilt(_resonator_sos(vowel, sr), source)
    peak = np.abs(shaped).max()
    if peak > 0:
        shaped = shaped / peak
    ramp = min(int(0.02 * sr), n // 4)
    env = np.ones(n)
    env[:ramp] = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
    env[n - ramp:] = env[:ramp][::-1]
    return profile.amplitude * env * shaped


def _noise_burst(rng: np.random.Generator, profile: VoiceProfile, sr: int) -> np.ndarray:
    n = int(rng.uniform(0.04, 0.12) * sr)
    burst = rng.normal(0.0, 1.0, n)
    burst = np.diff(burst, prepend=0.0)           # high-pass tilt, fricative-ish
    peak = np.abs(burst).max()
    return 0.25 * profile.amplitude * burst / peak if peak > 0 else burst


def synthesize_recording(rng: np.random.Generator, profile: VoiceProfile,
                         duration_s: float, sr: int, rec_id: str
                         ) -> tuple[Recording, float]:
    """One recording plus its realized pause fraction."""
    target_pause = float(np.clip(
        profile.pause_fraction + rng.normal(0.0, profile.pause_jitter), 0.02, 0.85))
    total = int(duration_s * sr)
    pieces: list[np.ndarray] = []
    filled = 0
    pause_samples = 0
    while filled < total:
        utter = rng.uniform(0.5, 1.6)             # seconds of connected speech
        elapsed = 0.0
        while elapsed < utter and filled < total:
            if rng.random() < profile.noise_burst_prob:
                seg = _noise_burst(rng, profile, sr)
            else:
                seg = _syllable(rng, profile, sr,
                                rng.uniform(*profile.syllable_s))
            pieces.append(seg)
            filled += len(seg)
            elapsed += len(seg) / sr
        # a pause sized to steer the running silence ratio toward the target
        deficit = target_pause * (filled + pause_samples) - pause_samples
        base = rng.uniform(*profile.pause_s)
        length = int(np.clip(base * sr + deficit, 0.05 * sr, 2.5 * sr))
        pieces.append(np.zeros(length))
        filled += length
        pause_samples += length
    samples = np.concatenate(pieces)[:total]
    silent = float((np.abs(samples) < 1e-6).mean())
    return Recording(rec_id, samples, sr), silent


def pseudo_mmse(pause_fraction: float) -> int:
    """Monotone map from realized pause fraction to a 0..30 score."""
    return int(np.clip(round(30.0 - 45.0 * (pause_fraction - 0.08)), 0, 30))


def generate_synthetic_corpus(out_dir: str | Path, n_per_class: int, seed: int,
                              spec: CorpusSpec | None = None,
                              language: str = "en") -> list[ManifestEntry]:
    """Write ``2 * n_per_class`` WAVs plus ``manifest.csv`` under out_dir.

    Ages and genders are sampled balanced across classes; regeneration with
    the same seed is bit-identical.
    """
    if n_per_class < 2:
        raise DataError("need at least 2 recordings per class")
    spec = spec or CorpusSpec()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for group in ("CN", "AD"):
        profile = spec.profile(group)
        for k in range(n_per_class):
            rec_id = f"{group.lower()}{k:03d}"
            rec, pause = synthesize_recording(rng, profile, spec.duration_s,
                                              spec.sample_rate, rec_id)
            path = out_dir / f"{rec_id}.wav"
            write_wav(path, rec)
            entries.append(ManifestEntry(
                id=rec_id, audio_path=str(path), group=group,
                mmse=pseudo_mmse(pause),
                age=float(np.round(rng.uniform(60.0, 85.0), 1)),
                gender="F" if k % 2 else "M",
                language=language))
    write_manifest(out_dir / "manifest.csv", entries)
    return entries
