import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domainmix import (
    IGNORE,
    ConfigError,
    DataError,
    ThresholdPolicy,
    fit_class_thresholds,
    pseudo_label,
    read_prob_map,
    read_prob_map_pngs,
    write_prob_map,
    write_prob_map_pngs,
)


def oracle_quantile(values, q):
    """Independent linear-interpolation quantile over a sorted copy."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def prob_map_two_class(p0: np.ndarray) -> np.ndarray:
    """(2, H, W) map with class-0 probability p0."""
    p0 = np.asarray(p0, dtype=np.float32)
    return np.stack([p0, 1.0 - p0], axis=0)


class TestPseudoLabel:
    def test_above_threshold(self):
        prob = prob_map_two_class(np.array([[0.95]]))
        label, conf = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=0.9))
        assert label[0, 0] == 0
        assert conf[0, 0] == pytest.approx(0.95)

    def test_below_threshold_becomes_ignore(self):
        prob = prob_map_two_class(np.array([[0.6]]))
        label, conf = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=0.9))
        assert label[0, 0] == IGNORE
        assert conf[0, 0] == pytest.approx(0.6)  # confidence kept regardless

    def test_exactly_at_threshold_is_labeled(self):
        prob = prob_map_two_class(np.array([[0.9]]))
        label, _ = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=0.9))
        assert label[0, 0] == 0

    def test_argmax_tie_breaks_to_lowest_class(self):
        prob = np.full((2, 1, 1), 0.5, dtype=np.float32)
        label, _ = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=0.0))
        assert label[0, 0] == 0

    def test_quantile_mode_halves_uniform_confidences(self):
        # 100 class-0 pixels with max-probs spread over (0.5, 1); the
        # median threshold should IGNORE (roughly) the lower half.
        rng = np.random.default_rng(7)
        conf_values = rng.uniform(0.5, 1.0, size=100).astype(np.float32)
        prob = prob_map_two_class(conf_values.reshape(10, 10))
        thresholds = fit_class_thresholds([prob], 0.5)

        expected_thr = min(0.9, oracle_quantile(conf_values.tolist(), 0.5))
        assert thresholds[0] == pytest.approx(expected_thr, abs=1e-6)

        policy = ThresholdPolicy(mode="per-class-quantile", quantile=0.5)
        label, conf = pseudo_label(prob, policy, thresholds)
        expected_ignored = int(np.sum(conf_values < expected_thr))
        assert int(np.sum(label == IGNORE)) == expected_ignored
        assert 45 <= expected_ignored <= 55  # about the lower half

    def test_quantile_mode_requires_thresholds(self):
        prob = prob_map_two_class(np.array([[0.9]]))
        with pytest.raises(ConfigError):
            pseudo_label(prob, ThresholdPolicy(mode="per-class-quantile"))

    def test_negative_probabilities_rejected(self):
        prob = np.array([[[-0.1]], [[1.1]]], dtype=np.float32)
        with pytest.raises(DataError, match="negative"):
            pseudo_label(prob, ThresholdPolicy())

    def test_sum_violation_rejected(self):
        prob = np.array([[[0.5]], [[0.4]]], dtype=np.float32)
        with pytest.raises(DataError, match="sum to 1"):
            pseudo_label(prob, ThresholdPolicy())

    @given(seed=st.integers(0, 10_000), t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_raising_threshold_never_labels_more(self, seed, t1, t2):
        lo, hi = sorted((t1, t2))
        rng = np.random.default_rng(seed)
        raw = rng.random((3, 4, 5)).astype(np.float64)
        prob = (raw / raw.sum(axis=0)).astype(np.float64)
        lab_lo, _ = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=lo))
        lab_hi, _ = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=hi))
        # every pixel IGNORE at the low threshold stays IGNORE at the high one
        assert np.all((lab_lo != IGNORE) | (lab_hi == IGNORE))

    def test_threshold_consistency_invariant(self):
        rng = np.random.default_rng(3)
        raw = rng.random((4, 8, 8))
        prob = raw / raw.sum(axis=0)
        thresholds = fit_class_thresholds([prob], 0.4)
        label, conf = pseudo_label(
            prob, ThresholdPolicy(mode="per-class-quantile", quantile=0.4), thresholds
        )
        labeled = label != IGNORE
        assert np.all(conf[labeled] >= thresholds[label[labeled]] - 1e-7)
        argmax = prob.argmax(axis=0)
        assert np.all(conf[~labeled] < thresholds[argmax[~labeled]] + 1e-7)
        assert np.array_equal(label[labeled], argmax[labeled])


class TestFitClassThresholds:
    def test_constant_distribution(self):
        prob = prob_map_two_class(np.full((5, 5), 0.8, dtype=np.float32))
        thresholds = fit_class_thresholds([prob], 0.5)
        assert thresholds[0] == pytest.approx(0.8, abs=1e-6)

    def test_unseen_class_gets_cap(self):
        # class 3 never wins the argmax
        prob = np.zeros((4, 2, 2), dtype=np.float32)
        prob[0] = 1.0
        thresholds = fit_class_thresholds([prob], 0.5)
        assert thresholds[3] == pytest.approx(0.9)

    def test_cap_applies(self):
        prob = prob_map_two_class(np.full((4, 4), 0.99, dtype=np.float32))
        thresholds = fit_class_thresholds([prob], 0.5)
        assert thresholds[0] == pytest.approx(0.9)

    def test_two_class_known_lists_match_oracle(self):
        # class 0 wins on the left half, class 1 on the right; known values
        p0 = np.array(
            [
                [0.91, 0.84, 0.09, 0.30],
                [0.77, 0.62, 0.41, 0.13],
                [0.88, 0.71, 0.25, 0.37],
            ],
            dtype=np.float64,
        )
        prob = np.stack([p0, 1.0 - p0], axis=0)
        conf = prob.max(axis=0)
        arg = prob.argmax(axis=0)
        for q in (0.0, 0.25, 0.5, 0.75, 1.0):
            thresholds = fit_class_thresholds([prob], q)
            for c in (0, 1):
                expected = min(0.9, oracle_quantile(conf[arg == c].tolist(), q))
                assert thresholds[c] == pytest.approx(expected, abs=1e-12)

    def test_empty_dataset_rejected(self):
        with pytest.raises(DataError):
            fit_class_thresholds([], 0.5)

    def test_order_independent(self):
        rng = np.random.default_rng(11)
        maps = []
        for _ in range(4):
            raw = rng.random((3, 6, 6))
            maps.append(raw / raw.sum(axis=0))
        a = fit_class_thresholds(maps, 0.3)
        b = fit_class_thresholds(maps[::-1], 0.3)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestProbMapFiles:
    def test_bin_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        raw = rng.random((3, 4, 6)).astype(np.float32)
        prob = raw / raw.sum(axis=0)
        path = tmp_path / "x.bin"
        write_prob_map(path, prob)
        loaded = read_prob_map(path)
        np.testing.assert_array_equal(loaded, prob.astype("<f4"))

    def test_bin_bad_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(DataError, match="magic"):
            read_prob_map(path)

    def test_bin_truncated(self, tmp_path):
        rng = np.random.default_rng(5)
        raw = rng.random((2, 4, 4)).astype(np.float32)
        prob = raw / raw.sum(axis=0)
        path = tmp_path / "x.bin"
        write_prob_map(path, prob)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(DataError, match="payload"):
            read_prob_map(path)

    def test_png_planes_roundtrip_large_k(self, tmp_path):
        rng = np.random.default_rng(9)
        raw = rng.random((19, 5, 7))
        prob = raw / raw.sum(axis=0)
        paths = write_prob_map_pngs(tmp_path / "planes", prob)
        loaded = read_prob_map_pngs(paths)  # validates sum-to-1 within 1e-4
        assert loaded.shape == prob.shape
        assert float(np.abs(loaded - prob).max()) < 2e-4
