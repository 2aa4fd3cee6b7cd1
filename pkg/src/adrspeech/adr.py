"""Active data representation: SOM clustering of frame features.

Pooled training frames are standardized per column, an online 1-D
self-organising map with C nodes is trained over them, and each recording is
then summarized by its normalized node-occupancy histogram (the second-order
features) with age and gender appended: a (C+2)-dimensional vector.

The standardizer and codebook are fit on training recordings only; test
recordings are transformed with the frozen statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import FrameFeatureMatrix


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray                 # zero-variance columns replaced by 1
    constant_columns: list[int] = field(default_factory=list)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.std


@dataclass
class SOMCodebook:
    weights: np.ndarray             # (C, d)
    epochs: int
    seed: int
    quantization_error_initial: float
    quantization_error_final: float

    @property
    def node_count(self) -> int:
        return self.weights.shape[0]


@dataclass
class RecordingVector:
    recording_id: str
    adr: np.ndarray                 # (C,) occupancy histogram, sums to 1
    age: float
    gender: int                     # 0/1

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.adr, [float(self.age), float(self.gender)]))


def fit_standardizer(frames: np.ndarray) -> StandardizationStats:
    """Per-column mean/std over pooled training frames (population std).

    Columns with zero variance get std 1 and are flagged.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise DataError("standardizer needs at least 2 pooled frames")
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    constant = np.flatnonzero(std == 0.0)
    if constant.size:
        std = std.copy()
        std[constant] = 1.0
    return StandardizationStats(mean=mean, std=std,
                                constant_columns=[int(i) for i in constant])


def train_som(frames: np.ndarray, node_count: int, epochs: int = 100,
              seed: int = 0) -> SOMCodebook:
    """Online SOM on a 1-D chain of ``node_count`` nodes.

    Learning rate decays linearly 0.5 -> 0.01 and the Gaussian neighborhood
    radius decays linearly C/2 -> 0.5 over all presentation steps; the
    presentation order is reshuffled each epoch by the seeded generator.
    A final zero-radius refinement pass pins every node at the mean of the
    frames it wins, which stabilizes the codebook at a quantizer optimum
    (and makes the degenerate C=1 map equal the data mean exactly).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if node_count < 1:
        raise DataError(f"node count must be >= 1, got {node_count}")
    if frames.ndim != 2 or frames.shape[0] < node_count:
        raise DataError("need at least as many frames as SOM nodes")
    n, _ = frames.shape
    rng = np.random.default_rng(seed)

    weights = frames[rng.choice(n, size=node_count, replace=False)].copy()
    qe_initial = _quantization_error(weights, frames)

    positions = np.arange(node_count, dtype=np.float64)
    total_steps = max(epochs * n - 1, 1)
    lr0, lr1 = 0.5, 0.01
    rad0, rad1 = node_count / 2.0, 0.5
    step = 0
    for _ in range(epochs):
        for idx in rng.permutation(n):
            x = frames[idx]
            frac = step / total_steps
            lr = lr0 + (lr1 - lr0) * frac
            radius = rad0 + (rad1 - rad0) * frac
            diffs = weights - x
            bmu = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
            influence = lr * np.exp(-((positions - bmu) ** 2)
                                    / (2.0 * radius * radius))
            weights -= influence[:, None] * diffs
            step += 1

    # zero-radius refinement: each node moves to the mean of its frames
    bmus = assign_bmu_batch(weights, frames)
    for c in range(node_count):
        won = bmus == c
        if won.any():
            weights[c] = frames[won].mean(axis=0)

    return SOMCodebook(weights=weights, epochs=epochs, seed=seed,
                       quantization_error_initial=float(qe_initial),
                       quantization_error_final=float(_quantization_error(weights, frames)))


def _quantization_error(weights: np.ndarray, frames: np.ndarray) -> float:
    d = np.linalg.norm(frames[:, None, :] - weights[None, :, :], axis=2)
    return float(d.min(axis=1).mean())


def assign_bmu(codebook: SOMCodebook, frame: np.ndarray) -> int:
    """Index of the nearest node (Euclidean); ties go to the lowest index."""
    diffs = codebook.weights - np.asarray(frame, dtype=np.float64)
    return int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))


def assign_bmu_batch(weights: np.ndarray, frames: np.ndarray) -> np.ndarray:
    d2 = ((frames[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def represent_recording(codebook: SOMCodebook, matrix: FrameFeatureMatrix,
                        stats: StandardizationStats, age: float,
                        gender: int) -> RecordingVector:
    """Normalized BMU occupancy histogram plus age and gender."""
    if matrix.n_frames == 0:
        raise DataError(f"{matrix.recording_id}: no frames to represent")
    rows = stats.transform(matrix.values)
    bmus = assign_bmu_batch(codebook.weights, rows)
    hist = np.bincount(bmus, minlength=codebook.node_count).astype(np.float64)
    hist /= matrix.n_frames
    return RecordingVector(recording_id=matrix.recording_id, adr=hist,
                           age=float(age), gender=int(gender))
