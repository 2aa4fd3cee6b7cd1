"""Framewise acoustic features: 88 descriptors-with-functionals per 1 s frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import Recording, frame_1s
from .functionals import apply_functionals
from .lld import DEFAULT_CONFIG, FeatureConfig, LLDSeries, extract_llds
from .names import FEATURE_COUNT, FEATURE_NAMES, FEATURE_TABLE_VERSION

__all__ = [
    "FEATURE_COUNT", "FEATURE_NAMES", "FEATURE_TABLE_VERSION",
    "FeatureConfig", "DEFAULT_CONFIG", "LLDSeries", "FrameFeatureMatrix",
    "extract_llds", "apply_functionals", "extract_frame_features",
]


@dataclass
class FrameFeatureMatrix:
    """One row of 88 features per 1 s frame of a recording."""

    recording_id: str
    values: np.ndarray = field(repr=False)  # (n_frames, 88)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def extract_frame_features(rec: Recording,
                           config: FeatureConfig = DEFAULT_CONFIG) -> FrameFeatureMatrix:
    """frame_1s -> extract_llds -> apply_functionals for every frame, in order.

    A recording shorter than 1 s produces an empty (0, 88) matrix (the framing
    warning propagates).
    """
    rows = [apply_functionals(extract_llds(f.samples, rec.sample_rate, config))
            for f in frame_1s(rec)]
    values = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, FEATURE_COUNT))
    return FrameFeatureMatrix(recording_id=rec.id, values=values)
