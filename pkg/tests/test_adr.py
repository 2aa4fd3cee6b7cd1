import math

import numpy as np
import pytest

from adrspeech import adr
from adrspeech.errors import DataError
from adrspeech.features import FrameFeatureMatrix


def kmeans2_oracle(frames, init, iters=200):
    centers = init.copy()
    for _ in range(iters):
        d = ((frames[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d.argmin(axis=1)
        new = np.array([frames[labels == k].mean(axis=0) if (labels == k).any()
                        else centers[k] for k in range(len(centers))])
        if np.allclose(new, centers, atol=1e-12):
            break
        centers = new
    return centers


class TestStandardizer:
    def test_two_frame_example(self):
        frames = np.array([np.zeros(5), np.full(5, 2.0)])
        stats = adr.fit_standardizer(frames)
        assert np.allclose(stats.mean, 1.0)
        assert np.allclose(stats.std, 1.0)          # population std
        z = stats.transform(frames)
        assert np.allclose(z[0], -1.0) and np.allclose(z[1], 1.0)

    def test_constant_column_flagged(self):
        rng = np.random.default_rng(0)
        frames = rng.normal(0, 1, (50, 4))
        frames[:, 2] = 7.0
        stats = adr.fit_standardizer(frames)
        assert stats.constant_columns == [2]
        assert stats.std[2] == 1.0

    def test_random_moments_oracle(self):
        rng = np.random.default_rng(1)
        frames = rng.normal(3.0, 2.5, (1000, 88))
        stats = adr.fit_standardizer(frames)
        z = stats.transform(frames)
        # independent accumulation order: compensated summation over sorted values
        for j in (0, 17, 87):
            col = np.sort(z[:, j])
            mean = math.fsum(col) / len(col)
            var = math.fsum((v - mean) ** 2 for v in col) / len(col)
            assert abs(mean) < 1e-9
            assert abs(math.sqrt(var) - 1.0) < 1e-9

    def test_too_few_frames(self):
        with pytest.raises(DataError):
            adr.fit_standardizer(np.zeros((1, 88)))


class TestSom:
    def test_single_node_is_mean(self):
        rng = np.random.default_rng(2)
        frames = rng.normal(0, 1, (200, 6))
        book = adr.train_som(frames, 1, epochs=5, seed=0)
        assert np.abs(book.weights[0] - frames.mean(axis=0)).max() < 1e-6
        qe = np.linalg.norm(frames - book.weights[0], axis=1).mean()
        assert book.quantization_error_final == pytest.approx(qe)

    def test_two_blob_recovery_vs_kmeans(self):
        rng = np.random.default_rng(3)
        blob_a = rng.normal(-3.0, 0.4, (150, 8))
        blob_b = rng.normal(3.0, 0.4, (150, 8))
        frames = np.vstack((blob_a, blob_b))
        book = adr.train_som(frames, 2, epochs=30, seed=1)
        ref = kmeans2_oracle(frames, np.vstack((blob_a.mean(axis=0),
                                                blob_b.mean(axis=0))))
        for w in book.weights:
            assert min(np.linalg.norm(w - c) for c in ref) < 0.2

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        frames = rng.normal(0, 1, (120, 10))
        b1 = adr.train_som(frames, 5, epochs=10, seed=42)
        b2 = adr.train_som(frames.copy(), 5, epochs=10, seed=42)
        assert b1.weights.tobytes() == b2.weights.tobytes()
        b3 = adr.train_som(frames, 5, epochs=10, seed=43)
        assert b1.weights.tobytes() != b3.weights.tobytes()

    def test_quantization_error_decreases(self):
        rng = np.random.default_rng(5)
        frames = np.vstack([rng.normal(c, 0.5, (80, 12))
                            for c in (-4.0, 0.0, 4.0)])
        book = adr.train_som(frames, 6, epochs=20, seed=0)
        assert book.quantization_error_final < book.quantization_error_initial

    def test_errors(self):
        frames = np.zeros((3, 4))
        with pytest.raises(DataError):
            adr.train_som(frames, 0)
        with pytest.raises(DataError):
            adr.train_som(frames, 5)


class TestAssignBmu:
    def test_exact_node_match(self):
        weights = np.arange(20.0).reshape(5, 4)
        book = adr.SOMCodebook(weights, 1, 0, 0.0, 0.0)
        assert adr.assign_bmu(book, weights[3]) == 3

    def test_tie_lowest_index(self):
        weights = np.array([[0.0], [2.0], [4.0], [0.0], [2.0]])
        book = adr.SOMCodebook(weights, 1, 0, 0.0, 0.0)
        assert adr.assign_bmu(book, np.array([1.0])) == 0   # ties 0 and 1 to 0
        assert adr.assign_bmu(book, np.array([2.0])) == 1   # exact tie with 4

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        weights = rng.normal(0, 1, (25, 88))
        book = adr.SOMCodebook(weights, 1, 0, 0.0, 0.0)
        for _ in range(50):
            x = rng.normal(0, 1, 88)
            brute = int(np.argmin([np.linalg.norm(x - w) for w in weights]))
            assert adr.assign_bmu(book, x) == brute


class TestRepresentRecording:
    def _book(self, weights):
        return adr.SOMCodebook(np.asarray(weights, dtype=float), 1, 0, 0.0, 0.0)

    def _identity_stats(self, d):
        return adr.StandardizationStats(mean=np.zeros(d), std=np.ones(d))

    def test_all_frames_one_node(self):
        book = self._book(np.arange(15.0).reshape(5, 3) * 10)
        frames = np.tile(book.weights[2], (10, 1))
        vec = adr.represent_recording(book, FrameFeatureMatrix("r", frames),
                                      self._identity_stats(3), age=70, gender=1)
        assert np.allclose(vec.adr, [0, 0, 1, 0, 0])
        assert vec.as_array().shape == (7,)
        assert vec.as_array()[-2:].tolist() == [70.0, 1.0]

    def test_single_node_histogram(self):
        book = self._book(np.zeros((1, 3)))
        frames = np.random.default_rng(7).normal(0, 1, (13, 3))
        vec = adr.represent_recording(book, FrameFeatureMatrix("r", frames),
                                      self._identity_stats(3), 80, 0)
        assert vec.adr.tolist() == [1.0]

    def test_split_counts(self):
        book = self._book([[0.0], [10.0], [20.0], [30.0], [40.0]])
        frames = np.array([[0.1]] * 3 + [[39.9]] * 7)
        vec = adr.represent_recording(book, FrameFeatureMatrix("r", frames),
                                      self._identity_stats(1), 65, 1)
        assert np.allclose(vec.adr, [0.3, 0, 0, 0, 0.7])

    def test_histogram_sums_to_one(self):
        rng = np.random.default_rng(8)
        book = self._book(rng.normal(0, 1, (25, 88)))
        for _ in range(10):
            frames = rng.normal(0, 1, (rng.integers(1, 60), 88))
            vec = adr.represent_recording(book, FrameFeatureMatrix("r", frames),
                                          self._identity_stats(88), 70, 0)
            assert abs(vec.adr.sum() - 1.0) <= 1e-12
            assert (vec.adr >= 0).all()

    def test_frame_order_irrelevant(self):
        rng = np.random.default_rng(9)
        book = self._book(rng.normal(0, 1, (10, 5)))
        frames = rng.normal(0, 1, (40, 5))
        v1 = adr.represent_recording(book, FrameFeatureMatrix("r", frames),
                                     self._identity_stats(5), 70, 0)
        v2 = adr.represent_recording(
            book, FrameFeatureMatrix("r", frames[rng.permutation(40)]),
            self._identity_stats(5), 70, 0)
        assert np.array_equal(v1.adr, v2.adr)

    def test_empty_matrix_rejected(self):
        book = self._book(np.zeros((3, 4)))
        with pytest.raises(DataError, match="empty"):
            adr.represent_recording(book, FrameFeatureMatrix("empty",
                                                             np.empty((0, 4))),
                                    self._identity_stats(4), 70, 0)
