"""Synthetic concept samplers and CSV-backed concept pairs.

Each sampler draws i.i.d. feature vectors for one concept; pairs of
samplers feed the drift/permuted window construction.  For labeled
concepts the class label is appended as an extra feature coordinate, so
label drift becomes distributional drift.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .seeding import as_generator
from .windows import Window, window_from_csv

SEA_THRESHOLDS = (8.0, 9.0, 7.0, 9.5)


@dataclass(frozen=True)
class SeaConcept:
    """Three uniform features on [0, 10]; label = 1 when f1 + f2 <= threshold."""

    variant: int

    concept_id: str = field(init=False)
    dim: int = 4
    labeled: bool = True

    def __post_init__(self):
        if self.variant not in range(len(SEA_THRESHOLDS)):
            raise ParameterError(f"SEA variant must be one of 0..{len(SEA_THRESHOLDS) - 1}")
        object.__setattr__(self, "concept_id", f"sea{self.variant}")

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        feats = rng.uniform(0.0, 10.0, size=(n, 3))
        label = (feats[:, 0] + feats[:, 1] <= SEA_THRESHOLDS[self.variant]).astype(float)
        return np.column_stack([feats, label])


def sea_pair(variant_before: int = 0, variant_after: int = 3) -> tuple[SeaConcept, SeaConcept]:
    if variant_before == variant_after:
        warnings.warn("identical SEA variants: the pair carries no drift", stacklevel=2)
    return SeaConcept(variant_before), SeaConcept(variant_after)


# size, color, shape, three values each; one-hot encoded, label appended.
STAGGER_RULES = {
    1: lambda size, color, shape: (size == 0) & (color == 0),
    2: lambda size, color, shape: (color == 1) | (shape == 0),
    3: lambda size, color, shape: (size == 1) | (size == 2),
}


@dataclass(frozen=True)
class StaggerConcept:
    """Three uniform categorical attributes, one-hot, plus a rule label."""

    concept: int

    concept_id: str = field(init=False)
    dim: int = 10
    labeled: bool = True

    def __post_init__(self):
        if self.concept not in STAGGER_RULES:
            raise ParameterError("stagger concept must be 1, 2 or 3")
        object.__setattr__(self, "concept_id", f"stagger{self.concept}")

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        attrs = rng.integers(0, 3, size=(n, 3))
        onehot = np.zeros((n, 9))
        for j in range(3):
            onehot[np.arange(n), 3 * j + attrs[:, j]] = 1.0
        label = STAGGER_RULES[self.concept](attrs[:, 0], attrs[:, 1], attrs[:, 2]).astype(float)
        return np.column_stack([onehot, label])


def stagger_pair(concept_before: int = 1, concept_after: int = 2) -> tuple[StaggerConcept, StaggerConcept]:
    if concept_before == concept_after:
        warnings.warn("identical stagger concepts: the pair carries no drift", stacklevel=2)
    return StaggerConcept(concept_before), StaggerConcept(concept_after)


@dataclass(frozen=True)
class RbfConcept:
    """Gaussian mixture with fixed centroids, weights and scales."""

    centroids: np.ndarray
    weights: np.ndarray
    scales: np.ndarray
    concept_id: str = "rbf"
    labeled: bool = False

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.centroids[comp] + self.scales[comp, None] * rng.standard_normal((n, self.dim))


def rbf_pair(d: int = 2, n_centroids: int = 5, seed=0) -> tuple[RbfConcept, RbfConcept]:
    """Random-RBF pair: the after-concept redraws the centroid locations."""
    if d < 1 or n_centroids < 1:
        raise ParameterError("d and n_centroids must be >= 1")
    rng = as_generator(seed)
    weights = rng.uniform(0.1, 1.0, size=n_centroids)
    weights /= weights.sum()
    scales = rng.uniform(0.05, 0.15, size=n_centroids)
    before = rng.uniform(0.0, 1.0, size=(n_centroids, d))
    after = rng.uniform(0.0, 1.0, size=(n_centroids, d))
    return (
        RbfConcept(before, weights, scales, "rbf_before"),
        RbfConcept(after, weights, scales, "rbf_after"),
    )


@dataclass(frozen=True)
class HyperplaneConcept:
    """Uniform features on [0,1]^d; label = 1 on one side of a hyperplane."""

    normal: np.ndarray
    concept_id: str = "rhp"
    labeled: bool = True

    @property
    def dim(self) -> int:
        return len(self.normal) + 1

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        feats = rng.uniform(0.0, 1.0, size=(n, len(self.normal)))
        # threshold at the plane through the cube center keeps classes balanced
        label = (feats @ self.normal >= 0.5 * self.normal.sum()).astype(float)
        return np.column_stack([feats, label])


def rhp_pair(d: int = 2, rotation_angle: float = np.pi / 2, seed=0) -> tuple[HyperplaneConcept, HyperplaneConcept]:
    """Rotating-hyperplane pair: the label boundary rotates, marginals stay put."""
    if d < 2:
        raise ParameterError("rotating hyperplane needs d >= 2")
    rng = as_generator(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    # orthonormal partner spanning a random rotation plane containing w
    u = rng.standard_normal(d)
    u -= (u @ w) * w
    norm = np.linalg.norm(u)
    if norm < 1e-12:
        u = np.zeros(d)
        u[int(np.argmin(np.abs(w)))] = 1.0
        u -= (u @ w) * w
        norm = np.linalg.norm(u)
    u /= norm
    w_after = np.cos(rotation_angle) * w + np.sin(rotation_angle) * u
    return HyperplaneConcept(w, "rhp_before"), HyperplaneConcept(w_after, "rhp_after")


@dataclass(frozen=True)
class ResampleConcept:
    """Draws uniformly with replacement from a fixed row pool."""

    rows: np.ndarray
    concept_id: str
    labeled: bool = False

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        return self.rows[rng.integers(0, len(self.rows), size=n)]


def csv_concept_pair(
    path,
    timestamp_split: float,
    two_sample_check: bool = False,
    seed=0,
    check_samples: int = 200,
    n_perms: int = 99,
) -> tuple[ResampleConcept, ResampleConcept]:
    """Bootstrap samplers from the rows before/after a timestamp split.

    With ``two_sample_check`` a permutation MMD test compares the two row
    pools and warns when they are not significantly different.
    """
    w = window_from_csv(path)
    before = w.x[w.t <= timestamp_split]
    after = w.x[w.t > timestamp_split]
    if len(before) == 0 or len(after) == 0:
        raise DataError(f"timestamp split {timestamp_split} leaves an empty side")
    pair = (
        ResampleConcept(before, f"csv_before@{timestamp_split}", w.label_feature_appended),
        ResampleConcept(after, f"csv_after@{timestamp_split}", w.label_feature_appended),
    )
    if two_sample_check:
        p = _mmd_two_sample_p(before, after, as_generator(seed), check_samples, n_perms)
        if p > 0.05:
            warnings.warn(
                f"two-sample check not significant (p={p:.3f}); the split may carry no drift",
                stacklevel=2,
            )
    return pair


def _mmd_two_sample_p(before, after, rng, max_per_side: int, n_perms: int) -> float:
    from .neighbor_kernel import build_kernel_gram, mmd_from_gram
    from .windows import Window, permute_timestamps

    nb = min(len(before), max_per_side)
    na = min(len(after), max_per_side)
    xb = before[rng.choice(len(before), nb, replace=False)]
    xa = after[rng.choice(len(after), na, replace=False)]
    x = np.vstack([xb, xa])
    t = np.concatenate([np.linspace(0.0, 0.5, nb), np.linspace(0.5 + 1e-9, 1.0, na)])
    w = Window(x, t)
    gram = build_kernel_gram(w)
    observed = mmd_from_gram(gram, 0.5)
    exceed = 0
    for _ in range(n_perms):
        perm = permute_timestamps(w, rng)
        if mmd_from_gram(build_kernel_gram(perm), 0.5) >= observed:
            exceed += 1
    return (1 + exceed) / (n_perms + 1)


@dataclass(frozen=True)
class NoiseAugmented:
    """Wraps a sampler, appending independent N(0,1) noise coordinates.

    Noise columns go between the concept's features and any label columns,
    so an appended label stays last.
    """

    base: object
    extra_dims: int
    label_dims: int = 0

    @property
    def dim(self) -> int:
        return self.base.dim + self.extra_dims

    @property
    def labeled(self) -> bool:
        return bool(getattr(self.base, "labeled", False))

    @property
    def concept_id(self) -> str:
        return f"{self.base.concept_id}+noise{self.extra_dims}"

    def draw(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        out = self.base.draw(n, rng)
        noise = rng.standard_normal((n, self.extra_dims))
        cut = out.shape[1] - self.label_dims
        return np.hstack([out[:, :cut], noise, out[:, cut:]])


def with_noise(sampler, extra_dims: int) -> object:
    """Append ``extra_dims`` standard-normal coordinates to a sampler."""
    if extra_dims < 0:
        raise ParameterError("extra_dims must be >= 0")
    if extra_dims == 0:
        return sampler
    label_dims = 1 if getattr(sampler, "labeled", False) else 0
    return NoiseAugmented(sampler, extra_dims, label_dims)
