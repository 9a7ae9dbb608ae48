"""Selection-quality metrics.

Oracles: cosine distances evaluated by hand on axis-aligned vectors and
set arithmetic done by hand.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppselect import (DiversityReport, InvalidInput, UndefinedMetric,
                       image_precision, pairwise_cosine_distance,
                       relevance_filter)


def axis(k, dim=4):
    v = np.zeros(dim)
    v[k] = 1.0
    return v


class TestRelevanceFilter:
    def test_threshold_boundary_inclusive(self):
        """cos(e0, e0) = 1 passes, cos(e0, e1) = 0 fails at 0.25, and a
        45-degree vector with cosine ~0.707 passes."""
        mid = (axis(0) + axis(1)) / np.sqrt(2.0)
        kept = relevance_filter(axis(0), [axis(0), axis(1), mid], 0.25)
        assert kept == [0, 2]

    def test_exact_threshold_kept(self):
        kept = relevance_filter(axis(0), [axis(0)], 1.0)
        assert kept == [0]

    def test_order_preserved(self):
        images = [axis(1), axis(0), axis(2), axis(0)]
        assert relevance_filter(axis(0), images, 0.5) == [1, 3]

    def test_unnormalized_inputs_use_true_cosine(self):
        kept = relevance_filter(3.0 * axis(0), [0.1 * axis(0), 7.0 * axis(1)], 0.9)
        assert kept == [0]

    def test_negative_threshold_keeps_anticorrelated(self):
        assert relevance_filter(axis(0), [-axis(0)], -1.0) == [0]
        assert relevance_filter(axis(0), [-axis(0)], 0.0) == []

    def test_zero_vectors_rejected(self):
        with pytest.raises(InvalidInput):
            relevance_filter(np.zeros(3), [axis(0, 3)], 0.25)
        with pytest.raises(InvalidInput):
            relevance_filter(axis(0, 3), [np.zeros(3)], 0.25)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            relevance_filter(axis(0, 3), [axis(0, 4)], 0.25)


class TestPairwiseCosineDistance:
    def test_identical_pair_is_zero(self):
        report = pairwise_cosine_distance([axis(0), axis(0)])
        assert report.mean_pcd == 0.0
        assert report.max_pcd == 0.0
        assert report.n_pairs == 1

    def test_orthogonal_pair_is_hundred(self):
        report = pairwise_cosine_distance([axis(0), axis(1)])
        assert report.mean_pcd == pytest.approx(100.0)
        assert report.max_pcd == pytest.approx(100.0)

    def test_three_orthogonal_hand_mean(self):
        """Oracle: three orthogonal axes give distance 100 on each of the
        three pairs, so mean and max are both 100; mixing in a duplicate
        drops the mean to (0 + 100 + 100) / 3."""
        report = pairwise_cosine_distance([axis(0), axis(1), axis(2)])
        assert report.mean_pcd == pytest.approx(100.0)
        assert report.n_pairs == 3
        mixed = pairwise_cosine_distance([axis(0), axis(0), axis(1)])
        assert mixed.mean_pcd == pytest.approx(200.0 / 3.0)
        assert mixed.max_pcd == pytest.approx(100.0)

    def test_opposite_vectors_reach_two_hundred(self):
        report = pairwise_cosine_distance([axis(0), -axis(0)])
        assert report.max_pcd == pytest.approx(200.0)

    def test_fewer_than_two_items(self):
        empty = pairwise_cosine_distance([])
        assert empty == DiversityReport(0.0, 0.0, 0, 0)
        single = pairwise_cosine_distance([axis(0)])
        assert single == DiversityReport(0.0, 0.0, 0, 1)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(4, 5))
        a = pairwise_cosine_distance(rows)
        b = pairwise_cosine_distance(rows * 7.5)
        assert a.mean_pcd == pytest.approx(b.mean_pcd, rel=1e-12)
        assert a.max_pcd == pytest.approx(b.max_pcd, rel=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(InvalidInput):
            pairwise_cosine_distance([axis(0), np.zeros(4)])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=5), min_size=2, max_size=8),
           st.permutations(range(8)))
    def test_permutation_invariance(self, picks, perm):
        rows = [axis(k % 6, 6) + 0.1 * axis((k + 1) % 6, 6) for k in picks]
        base = pairwise_cosine_distance(rows)
        order = [p for p in perm if p < len(rows)]
        report = pairwise_cosine_distance([rows[p] for p in order])
        assert report.mean_pcd == pytest.approx(base.mean_pcd, abs=1e-9)
        assert report.max_pcd == pytest.approx(base.max_pcd, abs=1e-9)
        assert report.n_pairs == base.n_pairs


class TestImagePrecision:
    def test_hand_values(self):
        assert image_precision(["a", "b"], ["a"]) == pytest.approx(50.0)
        assert image_precision(["a", "b"], ["a", "b", "c"]) == pytest.approx(100.0)
        assert image_precision(["x"], ["a"]) == 0.0

    def test_duplicates_count_once(self):
        """Oracle: {a, b} against gold {a} is 50 regardless of repetition."""
        assert image_precision(["a", "a", "b"], ["a"]) == pytest.approx(50.0)

    def test_empty_selection_undefined(self):
        with pytest.raises(UndefinedMetric):
            image_precision([], ["a"])

    def test_empty_gold_is_zero(self):
        assert image_precision(["a"], []) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.sets(st.integers(min_value=0, max_value=20), min_size=1, max_size=10),
           st.sets(st.integers(min_value=0, max_value=20), max_size=10))
    def test_bounds_and_set_semantics(self, sel, gold):
        value = image_precision(sel, gold)
        assert 0.0 <= value <= 100.0
        assert value == pytest.approx(100.0 * len(sel & gold) / len(sel))
        assert image_precision(sorted(sel), sorted(gold)) == pytest.approx(value)
