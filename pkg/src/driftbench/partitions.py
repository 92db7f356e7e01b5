"""Data-space partitions used as binning descriptors.

Builders: per-feature marginal binning, full grids, random-projection
binning, random trees and kdq-trees.  Every builder is deterministic given
(window, config, seed); the resulting partitions are immutable, map any
point to a cell (out-of-range values land in the nearest boundary cell)
and serialize to plain dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .seeding import as_generator
from .windows import Window


@dataclass(frozen=True)
class Provenance:
    builder: str
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"builder": self.builder, "seed": self.seed, "params": dict(self.params)}


class Partition:
    """A total map from feature space onto cells {0, ..., n_cells-1}."""

    n_cells: int
    provenance: Provenance

    def cell_of(self, X) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[None, :] if X.ndim == 1 else X


def make_edges(values: np.ndarray, bins: int, edge_mode: str) -> tuple[np.ndarray, bool]:
    """Interior bin edges over observed values; flags degenerate collapses.

    'equidistant' spaces edges evenly over the observed range, 'equilikely'
    places them at empirical quantiles.  Duplicate edges are collapsed, so a
    constant feature yields a single bin with the degenerate flag set.
    """
    if bins < 2:
        raise ParameterError("bins must be >= 2")
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.empty(0), True
    if edge_mode == "equidistant":
        edges = np.linspace(lo, hi, bins + 1)[1:-1]
    elif edge_mode == "equilikely":
        edges = np.quantile(values, np.arange(1, bins) / bins)
    else:
        raise ParameterError(f"unknown edge_mode {edge_mode!r}")
    edges = np.unique(edges)
    edges = edges[(edges > lo) & (edges <= hi)]
    return edges, len(edges) < bins - 1


@dataclass(frozen=True)
class Binning1D(Partition):
    """Cells of a 1-D binning along a projection axis."""

    axis: np.ndarray
    edges: np.ndarray
    degenerate: bool
    provenance: Provenance

    @property
    def n_cells(self) -> int:
        return len(self.edges) + 1

    def project(self, X) -> np.ndarray:
        return _as_matrix(X) @ self.axis

    def cell_of(self, X) -> np.ndarray:
        return np.searchsorted(self.edges, self.project(X), side="right")

    def to_dict(self) -> dict:
        return {
            "kind": "binning1d",
            "axis": self.axis.tolist(),
            "edges": self.edges.tolist(),
            "degenerate": self.degenerate,
            "provenance": self.provenance.to_dict(),
        }


@dataclass(frozen=True)
class GridPartition(Partition):
    """Product grid over all features; cell = multi-index over per-dim bins."""

    edges_per_dim: tuple[np.ndarray, ...]
    provenance: Provenance

    @property
    def n_cells(self) -> int:
        out = 1
        for e in self.edges_per_dim:
            out *= len(e) + 1
        return out

    def cell_of(self, X) -> np.ndarray:
        X = _as_matrix(X)
        idx = np.zeros(len(X), dtype=np.int64)
        for j, edges in enumerate(self.edges_per_dim):
            idx = idx * (len(edges) + 1) + np.searchsorted(edges, X[:, j], side="right")
        return idx

    def to_dict(self) -> dict:
        return {
            "kind": "grid",
            "edges_per_dim": [e.tolist() for e in self.edges_per_dim],
            "provenance": self.provenance.to_dict(),
        }


@dataclass(frozen=True)
class TreePartition(Partition):
    """Axis-aligned binary tree whose leaves are the cells.

    Stored as flat arrays; ``feature[i] < 0`` marks node i as a leaf with
    cell index ``cell[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cell: np.ndarray
    provenance: Provenance

    @property
    def n_cells(self) -> int:
        return int(self.cell.max()) + 1

    def cell_of(self, X) -> np.ndarray:
        X = _as_matrix(X)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feats = self.feature[node]
            active = np.flatnonzero(feats >= 0)
            if len(active) == 0:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.cell[node]

    def to_dict(self) -> dict:
        return {
            "kind": "tree",
            "feature": self.feature.tolist(),
            "threshold": [None if f < 0 else t for f, t in zip(self.feature, self.threshold)],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "cell": self.cell.tolist(),
            "provenance": self.provenance.to_dict(),
        }


class _TreeBuilder:
    """Accumulates nodes; children are attached to preallocated slots."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.feature) - 1

    def set_split(self, node: int, feature: int, threshold: float) -> tuple[int, int]:
        lc, rc = self.add_node(), self.add_node()
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node], self.right[node] = lc, rc
        return lc, rc

    def finish(self, provenance: Provenance) -> TreePartition:
        feature = np.array(self.feature, dtype=np.int64)
        cell = np.full(len(feature), -1, dtype=np.int64)
        leaves = np.flatnonzero(feature < 0)
        cell[leaves] = np.arange(len(leaves))
        return TreePartition(
            feature=feature,
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            cell=cell,
            provenance=provenance,
        )


def _require_window(w: Window):
    if len(w) == 0:
        raise ParameterError("cannot build a partition on an empty window")


def build_marginal(w: Window, bins_per_dim: int = 8, edge_mode: str = "equilikely") -> list[Binning1D]:
    """One 1-D binning per feature (coordinate-axis projections)."""
    _require_window(w)
    out = []
    for j in range(w.dim):
        edges, degenerate = make_edges(w.x[:, j], bins_per_dim, edge_mode)
        axis = np.zeros(w.dim)
        axis[j] = 1.0
        prov = Provenance("marginal", None, {"feature": j, "bins": bins_per_dim, "edge_mode": edge_mode})
        out.append(Binning1D(axis, edges, degenerate, prov))
    return out


def build_random_projection(
    w: Window,
    n_axes: int | None = None,
    bins_per_axis: int = 8,
    edge_mode: str = "equilikely",
    seed=None,
) -> list[Binning1D]:
    """Binnings along random Gaussian directions (normalized to unit length)."""
    _require_window(w)
    if n_axes is None:
        n_axes = 2 * w.dim
    if n_axes < 1:
        raise ParameterError("n_axes must be >= 1")
    rng = as_generator(seed)
    out = []
    for i in range(n_axes):
        axis = rng.standard_normal(w.dim)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            axis[0] = 1.0
            norm = 1.0
        axis = axis / norm
        edges, degenerate = make_edges(w.x @ axis, bins_per_axis, edge_mode)
        prov = Provenance("random_projection", None, {"axis_index": i, "bins": bins_per_axis, "edge_mode": edge_mode})
        out.append(Binning1D(axis, edges, degenerate, prov))
    return out


def build_pca_projection(
    w: Window, n_axes: int | None = None, bins_per_axis: int = 8, edge_mode: str = "equilikely"
) -> list[Binning1D]:
    """Binnings along principal components.

    Baseline only: principal directions can be blind to drift that leaves
    the large-variance structure untouched, so this builder is kept out of
    the benchmark defaults.
    """
    _require_window(w)
    if n_axes is None:
        n_axes = w.dim
    centered = w.x - w.x.mean(axis=0)
    cov = centered.T @ centered / max(len(w) - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_axes]
    out = []
    for rank, j in enumerate(order):
        axis = eigvecs[:, j]
        edges, degenerate = make_edges(w.x @ axis, bins_per_axis, edge_mode)
        prov = Provenance("pca_projection", None, {"component": rank, "bins": bins_per_axis, "edge_mode": edge_mode})
        out.append(Binning1D(axis, edges, degenerate, prov))
    return out


def build_grid(w: Window, bins_per_dim: int = 4, edge_mode: str = "equidistant", max_cells: int = 65536) -> GridPartition:
    """Full product grid over all features."""
    _require_window(w)
    edges = []
    total = 1
    for j in range(w.dim):
        e, _ = make_edges(w.x[:, j], bins_per_dim, edge_mode)
        edges.append(e)
        total *= len(e) + 1
        if total > max_cells:
            raise ParameterError(f"grid would exceed {max_cells} cells")
    prov = Provenance("grid", None, {"bins": bins_per_dim, "edge_mode": edge_mode})
    return GridPartition(tuple(edges), prov)


def build_random_tree(w: Window, n_leaves: int = 16, seed=None, min_leaf: int = 5) -> TreePartition:
    """Grow a tree by uniformly random (leaf, feature, threshold) choices.

    Thresholds are drawn uniformly between the leaf's min_leaf-th smallest
    and min_leaf-th largest value of the chosen feature, so every leaf keeps
    at least ``min_leaf`` build samples.  Growth stops at ``n_leaves`` or
    when no leaf can be split.
    """
    _require_window(w)
    if n_leaves < 2:
        raise ParameterError("n_leaves must be >= 2")
    rng = as_generator(seed)
    x = w.x
    builder = _TreeBuilder()
    root = builder.add_node()
    leaf_samples: dict[int, np.ndarray] = {root: np.arange(len(w))}
    open_leaves = [root]
    dead: set[int] = set()

    while len(leaf_samples) < n_leaves:
        candidates = [nid for nid in open_leaves if nid not in dead and len(leaf_samples[nid]) >= 2 * min_leaf]
        if not candidates:
            break
        nid = candidates[rng.integers(len(candidates))]
        idx = leaf_samples[nid]
        split = None
        for f in rng.permutation(x.shape[1]):
            v = np.sort(x[idx, f])
            lo, hi = v[min_leaf - 1], v[len(v) - min_leaf]
            if hi > lo:
                thr = float(rng.uniform(lo, hi))
                if thr >= hi:
                    thr = 0.5 * (lo + hi)
                split = (int(f), thr)
                break
        if split is None:
            dead.add(nid)
            continue
        f, thr = split
        mask = x[idx, f] <= thr
        lc, rc = builder.set_split(nid, f, thr)
        leaf_samples[lc], leaf_samples[rc] = idx[mask], idx[~mask]
        del leaf_samples[nid]
        open_leaves.remove(nid)
        open_leaves.extend([lc, rc])

    prov = Provenance("random_tree", None, {"n_leaves": n_leaves, "min_leaf": min_leaf})
    return builder.finish(prov)


def build_kdq_tree(w: Window, min_side: float = 0.05, min_count: int = 10, max_depth: int = 32) -> TreePartition:
    """Cycle through dimensions, splitting each cell at the midpoint of its box.

    The bounding box is computed from the window once and frozen.  A cell is
    not split when its sample count is below ``min_count`` or when halving
    the current dimension would create sides shorter than ``min_side``.
    """
    _require_window(w)
    if min_side <= 0:
        raise ParameterError("min_side must be positive")
    x = w.x
    d = w.dim
    box_lo, box_hi = x.min(axis=0), x.max(axis=0)
    builder = _TreeBuilder()
    root = builder.add_node()
    stack = [(root, np.arange(len(w)), box_lo.copy(), box_hi.copy(), 0)]
    while stack:
        nid, idx, lo, hi, depth = stack.pop()
        dim = depth % d
        side = hi[dim] - lo[dim]
        if len(idx) < min_count or side / 2.0 < min_side or depth >= max_depth:
            continue
        mid = 0.5 * (lo[dim] + hi[dim])
        mask = x[idx, dim] <= mid
        lc, rc = builder.set_split(nid, dim, mid)
        l_hi, r_lo = hi.copy(), lo.copy()
        l_hi[dim] = mid
        r_lo[dim] = mid
        stack.append((rc, idx[~mask], r_lo, hi.copy(), depth + 1))
        stack.append((lc, idx[mask], lo.copy(), l_hi, depth + 1))
    prov = Provenance("kdq_tree", None, {"min_side": min_side, "min_count": min_count})
    return builder.finish(prov)


def partition_from_dict(doc: dict) -> Partition:
    """Rebuild a partition from its ``to_dict`` document."""
    prov = Provenance(**doc.get("provenance", {"builder": "unknown"}))
    kind = doc.get("kind")
    if kind == "binning1d":
        return Binning1D(np.array(doc["axis"], dtype=float), np.array(doc["edges"], dtype=float), bool(doc["degenerate"]), prov)
    if kind == "grid":
        return GridPartition(tuple(np.array(e, dtype=float) for e in doc["edges_per_dim"]), prov)
    if kind == "tree":
        thr = np.array([np.nan if t is None else t for t in doc["threshold"]], dtype=float)
        return TreePartition(
            np.array(doc["feature"], dtype=np.int64),
            thr,
            np.array(doc["left"], dtype=np.int64),
            np.array(doc["right"], dtype=np.int64),
            np.array(doc["cell"], dtype=np.int64),
            prov,
        )
    raise ParameterError(f"unknown partition document kind {kind!r}")
