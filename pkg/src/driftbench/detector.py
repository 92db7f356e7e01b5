"""Estimator composition, split-point search and permutation normalization.

An estimator pairs a descriptor builder (fitted once per window) with a
similarity that can be evaluated at any split point.  Scanning all
candidate splits yields a statistic trace, the arg-max split estimate and,
after permutation normalization, a p-value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSplitError, ParameterError
from .histograms import CumulativeHistogram, histogram_metric
from .moment_tree import (
    MomentTreeConfig,
    VARIANT_RF,
    ForestDescriptor,
    fit_moment_forest,
    truncate_reference,
)
from .neighbor_kernel import (
    build_kernel_gram,
    build_neighbor_graph,
    knn_kls,
    ldd_statistics,
    mmds_from_gram,
)
from .partitions import (
    build_grid,
    build_kdq_tree,
    build_marginal,
    build_pca_projection,
    build_random_projection,
    build_random_tree,
)
from .seeding import as_generator
from .windows import SplitPoint, Window, candidate_split_times, permute_timestamps


@dataclass(frozen=True)
class DriftVerdict:
    """Trace of the drift statistic over candidate splits plus the arg-max."""

    split_times: np.ndarray
    statistics: np.ndarray
    t_hat: float
    max_stat: float
    p_value: float | None = None
    detected: bool | None = None

    def precision(self, t0: float, w: Window) -> float:
        """1 minus the sample mass strictly between t0 and the estimate."""
        lo, hi = sorted((t0, self.t_hat))
        between = np.count_nonzero((w.t > lo) & (w.t <= hi)) if hi > lo else 0
        return 1.0 - between / len(w)


class Descriptor:
    """Fitted descriptor: evaluates the drift statistic at split times."""

    window: Window

    def statistics_at(self, ts) -> np.ndarray:
        raise NotImplementedError

    def statistic_at(self, t) -> float:
        t = t.t if isinstance(t, SplitPoint) else float(t)
        return float(self.statistics_at([t])[0])


class Estimator:
    """Descriptor builder + similarity pair.

    Metadata mirrors the estimator taxonomy: ``dd_class`` is 'none',
    'detecting' or 'surely' (how reliably a positive statistic identifies
    drift), ``arrival_time_respecting`` says whether the fitted descriptor
    uses within-side time ordering, and ``cost_class`` is the per-split
    evaluation cost after fitting.
    """

    name: str = "estimator"
    dd_class: str = "detecting"
    arrival_time_respecting: bool = False
    cost_class: str = "O(cells)"

    def fit(self, w: Window, seed=None, drift_time: float | None = None) -> Descriptor:
        raise NotImplementedError


class _PartitionDescriptor(Descriptor):
    def __init__(self, partitions, w: Window, metric):
        self.window = w
        self.metric = metric
        self.partitions = list(partitions)
        self._hists = [CumulativeHistogram.from_window(p, w) for p in self.partitions]

    def statistics_at(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        ranks = np.searchsorted(self.window.t, ts, side="right")
        if len(ranks) and (ranks.min() <= 0 or ranks.max() >= len(self.window)):
            raise InvalidSplitError("split leaves an empty side")
        per_axis = np.empty((len(self._hists), len(ts)))
        for i, h in enumerate(self._hists):
            before = h.counts_before_ranks(ranks)
            after = h.totals[:, None] - before
            per_axis[i] = np.asarray(self.metric(before, after), dtype=float)
        # several independent binnings act as one descriptor via the max
        return per_axis.max(axis=0)


class PartitionEstimator(Estimator):
    """Generic binning/tree estimator: build partitions once, scan cheaply."""

    cost_class = "O(1)"

    def __init__(self, name, builder, metric="tv", dd_class="detecting"):
        self.name = name
        self._builder = builder
        self.metric = histogram_metric(metric) if isinstance(metric, str) else metric
        self.dd_class = dd_class

    def fit(self, w: Window, seed=None, drift_time: float | None = None) -> Descriptor:
        parts = self._builder(w, as_generator(seed))
        if not isinstance(parts, (list, tuple)):
            parts = [parts]
        return _PartitionDescriptor(parts, w, self.metric)


def marginal_estimator(bins: int = 4, edge_mode: str = "equidistant", metric: str = "tv") -> PartitionEstimator:
    return PartitionEstimator(
        "marg", lambda w, rng: build_marginal(w, bins, edge_mode), metric, dd_class="none"
    )


def random_projection_estimator(
    n_axes: int | None = None, bins: int = 8, edge_mode: str = "equilikely", metric: str = "tv"
) -> PartitionEstimator:
    return PartitionEstimator(
        "rnd_pj", lambda w, rng: build_random_projection(w, n_axes, bins, edge_mode, rng), metric
    )


def pca_projection_estimator(n_axes: int | None = None, bins: int = 8, edge_mode: str = "equilikely", metric: str = "tv") -> PartitionEstimator:
    return PartitionEstimator(
        "pca", lambda w, rng: build_pca_projection(w, n_axes, bins, edge_mode), metric, dd_class="none"
    )


def grid_estimator(bins: int = 4, edge_mode: str = "equidistant", metric: str = "tv") -> PartitionEstimator:
    return PartitionEstimator("grid", lambda w, rng: build_grid(w, bins, edge_mode), metric)


def random_tree_estimator(
    n_leaves: int = 16, min_leaf: int = 5, n_trees: int = 8, metric: str = "tv"
) -> PartitionEstimator:
    """Ensemble of independently grown random trees, aggregated by max."""
    return PartitionEstimator(
        "rnd_tree",
        lambda w, rng: [build_random_tree(w, n_leaves, rng, min_leaf) for _ in range(n_trees)],
        metric,
        dd_class="surely",
    )


def kdq_tree_estimator(min_side: float = 0.05, min_count: int = 10, metric: str = "tv") -> PartitionEstimator:
    return PartitionEstimator(
        "kdq", lambda w, rng: build_kdq_tree(w, min_side, min_count), metric, dd_class="surely"
    )


class MomentForestEstimator(Estimator):
    """Moment-tree ensemble estimator (time-aware descriptor)."""

    arrival_time_respecting = True
    dd_class = "surely"
    cost_class = "O(1)"

    def __init__(
        self,
        n_trees: int = 16,
        variant: str = VARIANT_RF,
        config: MomentTreeConfig | None = None,
        skip_fraction: float = 0.0,
        metric: str = "tv",
    ):
        self.name = "rf" if variant == VARIANT_RF else "dt"
        self.n_trees = n_trees
        self.variant = variant
        self.config = config or MomentTreeConfig()
        self.skip_fraction = skip_fraction
        self.metric = metric

    def fit(self, w: Window, seed=None, drift_time: float | None = None) -> Descriptor:
        train = w
        if self.skip_fraction > 0.0:
            train = truncate_reference(w, self.skip_fraction, drift_time=drift_time)
        forest = fit_moment_forest(train, self.n_trees, self.config, as_generator(seed), self.variant)
        return ForestDescriptor(forest, w, self.metric)


class _KnnDescriptor(Descriptor):
    def __init__(self, graph, w, statistic, aggregation):
        self.window = w
        self.graph = graph
        self.statistic = statistic
        self.aggregation = aggregation

    def statistics_at(self, ts) -> np.ndarray:
        if self.statistic == "ldd":
            return ldd_statistics(self.graph, ts, aggregation=self.aggregation)
        return knn_kls(self.graph, self.window, ts)


class KnnEstimator(Estimator):
    """k-nearest-neighbor estimator with LDD or kNN-KL similarity."""

    dd_class = "surely"
    cost_class = "O(k)"

    def __init__(self, k: int = 10, statistic: str = "ldd", aggregation: str = "mean"):
        if statistic not in ("ldd", "kl"):
            raise ParameterError(f"unknown knn statistic {statistic!r}")
        self.name = "ldd" if statistic == "ldd" else "knn_kl"
        self.k = k
        self.statistic = statistic
        self.aggregation = aggregation

    def fit(self, w: Window, seed=None, drift_time: float | None = None) -> Descriptor:
        return _KnnDescriptor(build_neighbor_graph(w, self.k), w, self.statistic, self.aggregation)


class _MmdDescriptor(Descriptor):
    def __init__(self, gram, w):
        self.window = w
        self.gram = gram

    def statistics_at(self, ts) -> np.ndarray:
        return mmds_from_gram(self.gram, ts)


class MmdEstimator(Estimator):
    """Biased Gaussian-kernel MMD estimator."""

    dd_class = "surely"
    cost_class = "O(|W|)"

    def __init__(self, bandwidth="median"):
        self.name = "mmd"
        self.bandwidth = bandwidth

    def fit(self, w: Window, seed=None, drift_time: float | None = None) -> Descriptor:
        return _MmdDescriptor(build_kernel_gram(w, self.bandwidth), w)


def scan_splits(estimator: Estimator, w: Window, seed=None, min_side: int | None = None) -> DriftVerdict:
    """Fit once, evaluate the statistic at every margin-safe candidate split.

    Candidates are the distinct sample timestamps whose sides both meet the
    margin; arg-max ties resolve to the earliest time.
    """
    ts = candidate_split_times(w, min_side)
    if len(ts) == 0:
        raise ParameterError("no candidate split satisfies the margin constraint")
    descriptor = estimator.fit(w, seed)
    stats = descriptor.statistics_at(ts)
    best = int(np.argmax(stats))
    return DriftVerdict(ts, stats, float(ts[best]), float(stats[best]))


def _permutation_pvalue(estimator, w, observed, n_perms, rng, min_side) -> float:
    if n_perms < 19:
        raise ParameterError("n_perms must be at least 19")
    exceed = 0
    for _ in range(n_perms):
        perm = permute_timestamps(w, rng)
        if scan_splits(estimator, perm, rng, min_side).max_stat >= observed:
            exceed += 1
    return (1 + exceed) / (n_perms + 1)


def permutation_normalize(
    estimator: Estimator, w: Window, n_perms: int = 99, seed=None, min_side: int | None = None
) -> float:
    """Permutation p-value of the scan maximum.

    Each replicate re-pairs timestamps at random and refits the descriptor
    from scratch; p = (1 + #{replicates >= observed}) / (n_perms + 1).
    """
    rng = as_generator(seed)
    observed = scan_splits(estimator, w, rng, min_side).max_stat
    return _permutation_pvalue(estimator, w, observed, n_perms, rng, min_side)


def detect_drift(
    estimator: Estimator,
    w: Window,
    n_perms: int = 99,
    alpha: float = 0.05,
    seed=None,
    min_side: int | None = None,
) -> DriftVerdict:
    """Full detection: scan for the best split and permutation-normalize it."""
    rng = as_generator(seed)
    verdict = scan_splits(estimator, w, rng, min_side)
    p = _permutation_pvalue(estimator, w, verdict.max_stat, n_perms, rng, min_side)
    return replace(verdict, p_value=p, detected=bool(p <= alpha))


def classifier_tv_oracle(partition, w: Window, t) -> float:
    """Best reweighted-classifier advantage over the partition's leaf maps.

    Brute-forces every 0/1 labeling of the cells, computes the balanced
    misclassification rate of predicting 'after the split' and returns
    1/2 minus the minimum.  Must coincide with half the total variation of
    the per-side leaf histograms.
    """
    L = partition.n_cells
    if L > 20:
        raise ParameterError("refusing brute force over more than 2^20 labelings")
    t = t.t if isinstance(t, SplitPoint) else float(t)
    cells = partition.cell_of(w.x)
    after = w.t > t
    n_after = int(after.sum())
    n_before = len(w) - n_after
    if n_after == 0 or n_before == 0:
        raise InvalidSplitError("split leaves an empty side")
    c_after = np.bincount(cells[after], minlength=L) / n_after
    c_before = np.bincount(cells[~after], minlength=L) / n_before
    best = np.inf
    chunk = 1 << 14
    for start in range(0, 1 << L, chunk):
        labelings = np.arange(start, min(start + chunk, 1 << L), dtype=np.uint32)
        bits = ((labelings[:, None] >> np.arange(L, dtype=np.uint32)) & 1).astype(float)
        # predicting 'after' in a cell misclassifies before-mass, and vice versa
        loss = 0.5 * (bits @ c_before + (1.0 - bits) @ c_after)
        best = min(best, float(loss.min()))
    return 0.5 - best
