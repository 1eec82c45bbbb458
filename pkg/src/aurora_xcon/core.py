"""Shared value types, seeded RNG streams and small vector helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.spatial.distance import cdist

Genotype = np.ndarray
StateTrajectory = np.ndarray


@dataclass(frozen=True)
class Solution:
    genotype: np.ndarray
    fitness: float
    feature: np.ndarray
    trajectory: np.ndarray


@dataclass
class SolutionBatch:
    """Struct-of-arrays view over ``n`` solutions.

    Repertoires store their members in this layout so that distance and
    ranking computations stay vectorised.
    """

    genotypes: np.ndarray  # (n, P)
    fitness: np.ndarray  # (n,)
    features: np.ndarray  # (n, d)
    trajectories: np.ndarray  # (n, T_s, D_s)

    def __post_init__(self):
        n = len(self.fitness)
        if not (len(self.genotypes) == len(self.features) == len(self.trajectories) == n):
            raise ValueError("solution batch arrays disagree on length")

    def __len__(self) -> int:
        return len(self.fitness)

    def __iter__(self) -> Iterator[Solution]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Solution:
        return Solution(
            self.genotypes[i], float(self.fitness[i]), self.features[i], self.trajectories[i]
        )

    def take(self, idx) -> "SolutionBatch":
        idx = np.asarray(idx, dtype=np.int64)
        return SolutionBatch(
            self.genotypes[idx], self.fitness[idx], self.features[idx], self.trajectories[idx]
        )

    @classmethod
    def empty(cls, n_params: int, feature_dim: int, traj_shape: tuple[int, int]) -> "SolutionBatch":
        return cls(
            np.zeros((0, n_params)),
            np.zeros(0),
            np.zeros((0, feature_dim)),
            np.zeros((0, *traj_shape)),
        )

    @classmethod
    def concat(cls, a: "SolutionBatch", b: "SolutionBatch") -> "SolutionBatch":
        if len(a) and len(b) and a.features.shape[1] != b.features.shape[1]:
            raise ValueError(
                f"feature dimension mismatch: {a.features.shape[1]} vs {b.features.shape[1]}"
            )
        return cls(
            np.concatenate([a.genotypes, b.genotypes]),
            np.concatenate([a.fitness, b.fitness]),
            np.concatenate([a.features, b.features]),
            np.concatenate([a.trajectories, b.trajectories]),
        )


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    The same ``(seed, stream_id)`` pair always yields a generator producing
    the same draws for the same call sequence.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    return RngStream(seed, stream_id).generator()


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite input")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``x`` and ``y``.

    Computed from explicit differences so that coincident rows give exactly 0.
    """
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return cdist(x, y)


def subsample_indices(t_full: int, t_s: int) -> np.ndarray:
    if t_s < 1 or t_full < 1:
        raise ValueError("trajectory lengths must be positive")
    if t_s > t_full:
        raise ValueError(f"cannot subsample {t_full} rows down to {t_s}")
    if t_s == 1:
        return np.zeros(1, dtype=np.int64)
    # round-half-up keeps the mapping exact for the common integer ratios
    return np.floor(np.arange(t_s) * (t_full - 1) / (t_s - 1) + 0.5).astype(np.int64)


def subsample_trajectory(full: np.ndarray, t_s: int) -> np.ndarray:
    """Keep ``t_s`` evenly spaced rows of ``full``, both endpoints included."""
    full = np.asarray(full)
    return full[subsample_indices(full.shape[0], t_s)]
