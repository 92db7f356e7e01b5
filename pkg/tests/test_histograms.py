import math

import numpy as np
import pytest

import driftbench.histograms as hg
from driftbench.errors import InvalidSplitError, ParameterError
from driftbench.histograms import (
    CumulativeHistogram,
    hellinger,
    histogram_metric,
    histograms_at,
    jensen_shannon,
    kl_divergence,
    recount_histograms,
    to_distribution,
    total_variation,
)
from driftbench.windows import Window


class TestCumulativeHistogram:
    def test_two_cell_example(self):
        ch = CumulativeHistogram([0, 1], [0.2, 0.8], 2)
        before, after = histograms_at(ch, 0.5)
        assert np.array_equal(before.counts, [1, 0])
        assert np.array_equal(after.counts, [0, 1])
        assert before.total == after.total == 1

    def test_split_at_last_timestamp_errors(self):
        ch = CumulativeHistogram([0, 1], [0.2, 0.8], 2)
        with pytest.raises(InvalidSplitError):
            histograms_at(ch, 0.8)

    def test_split_before_first_errors(self):
        ch = CumulativeHistogram([0, 1], [0.2, 0.8], 2)
        with pytest.raises(InvalidSplitError):
            histograms_at(ch, 0.1)

    def test_matches_recount_on_all_splits(self, rng):
        # prefix subtraction equals a from-scratch recount, bit-exact
        for _ in range(25):
            n = int(rng.integers(2, 500))
            n_cells = int(rng.integers(1, 65))
            cells = rng.integers(0, n_cells, n)
            times = np.sort(rng.uniform(0, 1, n))
            ch = CumulativeHistogram(cells, times, n_cells)
            for t in np.unique(times)[:-1]:
                before, after = ch.counts_at(float(t))
                ref_before, ref_after = recount_histograms(cells, times, n_cells, float(t))
                assert np.array_equal(before, ref_before)
                assert np.array_equal(after, ref_after)

    def test_sparse_fallback_equals_dense(self, rng, monkeypatch):
        n, n_cells = 200, 8
        cells = rng.integers(0, n_cells, n)
        times = np.sort(rng.uniform(0, 1, n))
        dense = CumulativeHistogram(cells, times, n_cells)
        assert dense._prefix is not None
        monkeypatch.setattr(hg, "DENSE_PREFIX_LIMIT", 1)
        sparse = CumulativeHistogram(cells, times, n_cells)
        assert sparse._prefix is None
        ranks = np.arange(1, n)
        assert np.array_equal(dense.counts_before_ranks(ranks), sparse.counts_before_ranks(ranks))

    def test_from_window_uses_partition_cells(self, rng):
        from driftbench.partitions import build_marginal

        w = Window(rng.normal(size=(50, 1)), np.sort(rng.uniform(0, 1, 50)))
        part = build_marginal(w, bins_per_dim=4)[0]
        ch = CumulativeHistogram.from_window(part, w)
        assert ch.totals.sum() == 50

    def test_rejects_unsorted_times(self):
        with pytest.raises(ParameterError):
            CumulativeHistogram([0, 0], [0.9, 0.1], 1)


class TestDistributions:
    def test_normalizes_and_sums_to_one(self):
        p = to_distribution([2, 6])
        assert np.allclose(p, [0.25, 0.75])
        assert abs(p.sum() - 1.0) < 1e-12

    def test_smoothing_pseudocount(self):
        p = to_distribution([0, 2], smoothing=0.5)
        assert np.allclose(p, [0.5 / 3, 2.5 / 3])

    def test_empty_histogram_rejected(self):
        with pytest.raises(ParameterError):
            to_distribution([0, 0])


class TestDivergences:
    def test_total_variation_values(self):
        assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert total_variation([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.25, abs=1e-15)

    def test_mismatched_cells_rejected(self):
        with pytest.raises(ParameterError):
            total_variation([1.0], [0.5, 0.5])

    def test_hellinger_values(self):
        assert hellinger([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert hellinger([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
        expected = math.sqrt(0.5 * ((math.sqrt(0.5) - 1.0) ** 2 + 0.5))
        got = hellinger([0.5, 0.5], [1.0, 0.0])
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.5412, abs=5e-5)

    def test_kl_values(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2.0))

    def test_kl_infinite_without_smoothing(self):
        assert kl_divergence([1.0, 0.0], [0.0, 1.0]) == np.inf

    def test_kl_smoothing_monotone_on_disjoint(self):
        alphas = [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0]
        vals = [kl_divergence([1.0, 0.0], [0.0, 1.0], smoothing=a) for a in alphas]
        assert all(np.isfinite(vals))
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_jensen_shannon_values(self):
        assert jensen_shannon([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert jensen_shannon([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.sqrt(math.log(2.0)))

    def test_metric_properties_on_random_triples(self, rng):
        # symmetry, non-negativity, zero iff equal, triangle inequality
        L, m = 6, 1000
        p = to_distribution(rng.uniform(0, 1, (L, m)))
        q = to_distribution(rng.uniform(0, 1, (L, m)))
        r = to_distribution(rng.uniform(0, 1, (L, m)))
        for metric in (total_variation, hellinger, jensen_shannon):
            dpq, dqp = metric(p, q), metric(q, p)
            assert np.allclose(dpq, dqp, atol=1e-12)
            assert np.all(dpq >= 0)
            assert np.allclose(metric(p, p), 0.0, atol=1e-12)
            assert np.all(dpq > 0)  # random triples differ a.s.
            assert np.all(metric(p, r) <= dpq + metric(q, r) + 1e-12)

    def test_pinsker_bound(self, rng):
        L, m = 5, 500
        p = to_distribution(rng.uniform(0.05, 1, (L, m)))
        q = to_distribution(rng.uniform(0.05, 1, (L, m)))
        tv = total_variation(p, q)
        kl = kl_divergence(p, q)
        assert np.all(tv**2 <= 0.5 * kl + 1e-12)

    def test_bounds(self, rng):
        p = to_distribution(rng.uniform(0, 1, (8, 200)))
        q = to_distribution(rng.uniform(0, 1, (8, 200)))
        assert np.all(total_variation(p, q) <= 1.0)
        assert np.all(hellinger(p, q) <= 1.0)
        assert np.all(jensen_shannon(p, q) <= hg.JS_MAX + 1e-12)


class TestHistogramMetric:
    def test_each_side_normalized_separately(self):
        metric = histogram_metric("tv")
        assert metric([10, 10], [30, 10]) == pytest.approx(0.25)

    def test_kl_smoothed_finite_on_zero_cells(self):
        metric = histogram_metric("kl")
        assert np.isfinite(metric([5, 0], [0, 5]))

    def test_kl_reverse_direction(self):
        fwd = histogram_metric("kl", smoothing=0.1)
        rev = histogram_metric("kl", smoothing=0.1, reverse=True)
        assert fwd([8, 2], [2, 8]) == pytest.approx(rev([2, 8], [8, 2]))

    def test_unknown_metric(self):
        with pytest.raises(ParameterError):
            histogram_metric("wasserstein")
