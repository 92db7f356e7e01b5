"""Cumulative cell histograms and discrete-distribution divergences.

The cumulative histogram stores, per cell, prefix counts over arrival
order.  After the one-off build, the before/after histograms of any split
point come from a prefix subtraction whose cost depends on the number of
cells, not the window length; that is what makes every binning and tree
descriptor cheap to scan over all candidate split points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSplitError, ParameterError
from .windows import SplitPoint, Window

# Above this many prefix entries (cells * (n+1)) the dense matrix is
# replaced by per-cell sorted arrival ranks; lookups stay equivalent.
DENSE_PREFIX_LIMIT = 2_000_000


@dataclass(frozen=True)
class CellHistogram:
    """Per-cell sample counts for one side of a split."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class CumulativeHistogram:
    """Arrival-ordered prefix counts of cell occupancy.

    Parameters
    ----------
    cells : int array of shape (n,)
        Cell index of each sample, aligned with ``times``.
    times : float array of shape (n,)
        Sorted, non-decreasing timestamps.
    n_cells : int
        Total number of cells (>= cells.max() + 1).
    """

    def __init__(self, cells, times, n_cells: int):
        cells = np.asarray(cells, dtype=np.int64)
        times = np.asarray(times, dtype=float)
        if cells.shape != times.shape or cells.ndim != 1:
            raise ParameterError("cells and times must be aligned 1-D arrays")
        if len(times) and np.any(np.diff(times) < 0):
            raise ParameterError("times must be sorted non-decreasing")
        if len(cells) and (cells.min() < 0 or cells.max() >= n_cells):
            raise ParameterError("cell index out of range")
        self.n = len(cells)
        self.n_cells = int(n_cells)
        self.times = times
        self.totals = np.bincount(cells, minlength=self.n_cells).astype(np.int64)
        if self.n_cells * (self.n + 1) <= DENSE_PREFIX_LIMIT:
            prefix = np.zeros((self.n_cells, self.n + 1), dtype=np.int32)
            if self.n:
                np.add.at(prefix, (cells, np.arange(self.n) + 1), 1)
                np.cumsum(prefix, axis=1, out=prefix)
            self._prefix = prefix
            self._ranks = None
        else:
            order = np.argsort(cells, kind="stable")
            bounds = np.cumsum(self.totals)[:-1]
            self._ranks = np.split(order.astype(np.int64), bounds)
            self._prefix = None

    @classmethod
    def from_window(cls, partition, w: Window) -> "CumulativeHistogram":
        """Assign ``w``'s samples to ``partition``'s cells and accumulate."""
        return cls(partition.cell_of(w.x), w.t, partition.n_cells)

    def rank_of(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right"))

    def counts_before_ranks(self, ranks) -> np.ndarray:
        """Cell counts among the first ``rank`` arrivals, per queried rank.

        Returns an array of shape (n_cells, len(ranks)).
        """
        ranks = np.atleast_1d(np.asarray(ranks, dtype=np.int64))
        if len(ranks) and (ranks.min() < 0 or ranks.max() > self.n):
            raise ParameterError("rank out of range")
        if self._prefix is not None:
            return self._prefix[:, ranks].astype(np.int64)
        out = np.empty((self.n_cells, len(ranks)), dtype=np.int64)
        for c, cell_ranks in enumerate(self._ranks):
            out[c] = np.searchsorted(cell_ranks, ranks, side="left")
        return out

    def counts_at_rank(self, rank: int) -> tuple[np.ndarray, np.ndarray]:
        """Before/after cell counts when the first ``rank`` samples are 'before'."""
        if rank <= 0 or rank >= self.n:
            raise InvalidSplitError(f"split leaves an empty side (rank={rank}, n={self.n})")
        before = self.counts_before_ranks([rank])[:, 0]
        return before, self.totals - before

    def counts_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = t.t if isinstance(t, SplitPoint) else t
        return self.counts_at_rank(self.rank_of(float(t)))


def histograms_at(ch: CumulativeHistogram, t) -> tuple[CellHistogram, CellHistogram]:
    """Before/after cell histograms of the split at time ``t``.

    Raises InvalidSplitError when either side would be empty.
    """
    before, after = ch.counts_at(t)
    return CellHistogram(before), CellHistogram(after)


def recount_histograms(cells, times, n_cells: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """From-scratch recount of per-cell counts on each side of ``t``.

    Brute-force reference for the prefix structure; intentionally simple.
    """
    cells = np.asarray(cells)
    times = np.asarray(times)
    mask = times <= t
    before = np.bincount(cells[mask], minlength=n_cells).astype(np.int64)
    after = np.bincount(cells[~mask], minlength=n_cells).astype(np.int64)
    return before, after


# ---------------------------------------------------------------------------
# Discrete distributions and divergences


def to_distribution(counts, smoothing: float = 0.0) -> np.ndarray:
    """Normalize counts (or any non-negative weights) into probabilities.

    ``smoothing`` is a per-cell Laplace pseudo-count added before
    normalization.  Works column-wise on (n_cells, m) inputs.
    """
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ParameterError("negative counts")
    total = counts.sum(axis=0) + smoothing * counts.shape[0]
    if np.any(total <= 0):
        raise ParameterError("cannot normalize an empty histogram")
    return (counts + smoothing) / total


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ParameterError(f"mismatched cell sets: {p.shape} vs {q.shape}")
    return p, q


def total_variation(p, q) -> float | np.ndarray:
    """Total variation distance, 0.5 * sum |p - q|, in [0, 1]."""
    p, q = _check_pair(p, q)
    return 0.5 * np.abs(p - q).sum(axis=0)


def hellinger(p, q) -> float | np.ndarray:
    """Hellinger distance sqrt(0.5 * sum (sqrt p - sqrt q)^2), in [0, 1]."""
    p, q = _check_pair(p, q)
    return np.sqrt(0.5 * ((np.sqrt(p) - np.sqrt(q)) ** 2).sum(axis=0))


def kl_divergence(p, q, smoothing: float = 0.0) -> float | np.ndarray:
    """Kullback-Leibler divergence sum p log(p/q), natural log.

    With ``smoothing`` > 0 both arguments get a Laplace pseudo-count first.
    Without smoothing, a cell with p > 0 = q yields inf (not an error).
    """
    p, q = _check_pair(p, q)
    if smoothing > 0.0:
        p = to_distribution(p, smoothing)
        q = to_distribution(q, smoothing)
    active = p > 0
    log_p = np.log(p, where=active, out=np.zeros_like(p))
    log_q = np.log(q, where=q > 0, out=np.full_like(q, -np.inf))
    with np.errstate(invalid="ignore"):
        terms = np.where(active, p * (log_p - log_q), 0.0)
    return terms.sum(axis=0)


def jensen_shannon(p, q) -> float | np.ndarray:
    """Jensen-Shannon metric: sqrt(0.5 KL(p||m) + 0.5 KL(q||m)), m=(p+q)/2.

    Bounded by sqrt(log 2) for the natural log.
    """
    p, q = _check_pair(p, q)
    m = 0.5 * (p + q)
    js2 = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)
    return np.sqrt(np.maximum(js2, 0.0))


JS_MAX = math.sqrt(math.log(2.0))

#: Default Laplace pseudo-count for KL used as a drift statistic.
KL_SMOOTHING = 0.5


def histogram_metric(name: str, *, smoothing: float | None = None, reverse: bool = False):
    """Build a metric on count pairs: (before_counts, after_counts) -> value.

    Each side is normalized by its own total.  ``name`` is one of
    'tv', 'hellinger', 'js', 'kl'.  For 'kl' the default smoothing of 0.5
    keeps the statistic finite on zero cells; ``reverse`` swaps the
    direction to after||before.
    """
    name = name.lower()
    if name not in ("tv", "hellinger", "js", "kl"):
        raise ParameterError(f"unknown metric {name!r}")

    def metric(counts_before, counts_after):
        p = to_distribution(counts_before)
        q = to_distribution(counts_after)
        if reverse:
            p, q = q, p
        if name == "tv":
            return total_variation(p, q)
        if name == "hellinger":
            return hellinger(p, q)
        if name == "js":
            return jensen_shannon(p, q)
        alpha = KL_SMOOTHING if smoothing is None else smoothing
        return kl_divergence(p, q, smoothing=alpha)

    metric.name = name
    return metric
