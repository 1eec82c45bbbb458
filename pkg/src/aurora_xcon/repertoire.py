"""Solution containers: CVT grid, unstructured archive with dominated-novelty
local competition, and a passive best-so-far tracker."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from sklearn.cluster import KMeans

from .core import Solution, SolutionBatch, pairwise_distances

INSERTED, REPLACED, REJECTED = "inserted", "replaced", "rejected"
# Small tessellations still get enough samples for stable centroids.
MIN_CVT_SAMPLES = 10_000


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


# -------------------------------------------------------------------- CVT


@lru_cache(maxsize=32)
def _cvt(n_centroids: int, dim: int, lo: tuple, hi: tuple, seed: int, samples_per_centroid: int):
    rng = np.random.default_rng(seed)
    lo_a, hi_a = np.asarray(lo), np.asarray(hi)
    n_samples = max(samples_per_centroid * n_centroids, MIN_CVT_SAMPLES)
    x = rng.uniform(lo_a, hi_a, size=(n_samples, dim))
    km = KMeans(n_clusters=n_centroids, n_init=1, max_iter=100, random_state=seed)
    km.fit(x)
    c = np.clip(km.cluster_centers_, lo_a, hi_a)
    c.setflags(write=False)
    return c


def cvt_centroids(n_centroids: int, dim: int, bounds, rng: np.random.Generator,
                  samples_per_centroid: int = 50) -> np.ndarray:
    """Centroids of a CVT of the box ``bounds = (lo, hi)`` via k-means on uniform samples."""
    if n_centroids < 1:
        raise ValueError("need at least one centroid")
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (dim,)) for b in bounds)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise ValueError("CVT bounds must be finite with hi > lo")
    seed = int(rng.integers(0, 2**31 - 1))
    return _cvt(n_centroids, dim, tuple(lo), tuple(hi), seed, samples_per_centroid).copy()


# ------------------------------------------------------------------- grid


class GridRepertoire:
    """MAP-Elites archive: one elite per Voronoi cell."""

    def __init__(self, centroids: np.ndarray, bounds, n_params: int, traj_shape: tuple):
        self.centroids = np.asarray(centroids, dtype=float)
        n, d = self.centroids.shape
        self.lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (d,)).copy()
        self.hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (d,)).copy()
        self.genotypes = np.zeros((n, n_params))
        self.fitness = np.full(n, -np.inf)
        self.features = np.zeros((n, d))
        self.trajectories = np.zeros((n, *traj_shape))
        self.occupied = np.zeros(n, dtype=bool)

    @property
    def feature_dim(self) -> int:
        return self.centroids.shape[1]

    def __len__(self) -> int:
        return int(self.occupied.sum())

    def nearest_cell(self, features: np.ndarray) -> np.ndarray:
        f = np.clip(np.atleast_2d(features), self.lo, self.hi)
        return np.argmin(pairwise_distances(f, self.centroids), axis=1)

    def add(self, candidate: Solution) -> str:
        batch = SolutionBatch(
            np.asarray(candidate.genotype)[None],
            np.array([candidate.fitness], dtype=float),
            np.asarray(candidate.feature, dtype=float)[None],
            np.asarray(candidate.trajectory)[None],
        )
        return self.add_batch(batch)[0]

    def add_batch(self, batch: SolutionBatch) -> list[str]:
        """Insert candidates in order; ties keep the incumbent."""
        if batch.features.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature dimension {batch.features.shape[1]} != grid dimension {self.feature_dim}"
            )
        cells = self.nearest_cell(batch.features)
        status = []
        for i, c in enumerate(cells):
            if not self.occupied[c]:
                status.append(INSERTED)
            elif batch.fitness[i] > self.fitness[c]:
                status.append(REPLACED)
            else:
                status.append(REJECTED)
                continue
            self.occupied[c] = True
            self.genotypes[c] = batch.genotypes[i]
            self.fitness[c] = batch.fitness[i]
            self.features[c] = np.clip(batch.features[i], self.lo, self.hi)
            self.trajectories[c] = batch.trajectories[i]
        return status

    def members(self) -> SolutionBatch:
        idx = np.flatnonzero(self.occupied)
        return SolutionBatch(
            self.genotypes[idx], self.fitness[idx], self.features[idx], self.trajectories[idx]
        )

    def keep(self, indices) -> None:
        """Empty every occupied cell whose position in ``members()`` is not listed."""
        occ = np.flatnonzero(self.occupied)
        mask = np.zeros(len(occ), dtype=bool)
        mask[np.asarray(indices, dtype=np.int64)] = True
        drop = occ[~mask]
        self.occupied[drop] = False
        self.fitness[drop] = -np.inf

    def set_members(self, batch: SolutionBatch) -> None:
        self.occupied[:] = False
        self.fitness[:] = -np.inf
        self.add_batch(batch)


# ----------------------------------------------------------- unstructured


def dominated_novelty(features: np.ndarray, fitness: np.ndarray) -> np.ndarray:
    """Distance from each solution to its nearest strictly fitter neighbour
    (inf when nothing is fitter)."""
    d = pairwise_distances(features)
    fitter = fitness[None, :] > fitness[:, None]
    return np.where(fitter, d, np.inf).min(axis=1, initial=np.inf)


def survivor_order(features: np.ndarray, fitness: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Pool indices sorted best-first: score desc, fitness desc, older first."""
    score = dominated_novelty(features, fitness)
    return np.lexsort((order, -fitness, -score))


class UnstructuredRepertoire:
    """Capacity-bounded archive with dominated-novelty replacement."""

    def __init__(self, capacity: int, n_params: int, feature_dim: int, traj_shape: tuple):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.batch = SolutionBatch.empty(n_params, feature_dim, traj_shape)
        self.order = np.zeros(0, dtype=np.int64)
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.batch)

    @property
    def feature_dim(self) -> int:
        return self.batch.features.shape[1]

    def members(self) -> SolutionBatch:
        return self.batch

    def add_batch(self, candidates: SolutionBatch) -> np.ndarray:
        """Merge ``candidates`` and keep the ``capacity`` best by dominated novelty.

        Returns a boolean mask over the candidates telling which survived.
        """
        if len(candidates) and candidates.features.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature dimension {candidates.features.shape[1]} != archive dimension {self.feature_dim}"
            )
        ids = np.arange(self._next_id, self._next_id + len(candidates))
        self._next_id += len(candidates)
        pool = SolutionBatch.concat(self.batch, candidates)
        order = np.concatenate([self.order, ids])
        n_old = len(self.batch)
        if len(pool) <= self.capacity:
            keep = np.arange(len(pool))
        else:
            keep = np.sort(survivor_order(pool.features, pool.fitness, order)[: self.capacity])
        self.batch = pool.take(keep)
        self.order = order[keep]
        kept = np.zeros(len(candidates), dtype=bool)
        kept[keep[keep >= n_old] - n_old] = True
        return kept

    def keep(self, indices) -> None:
        idx = np.sort(np.asarray(indices, dtype=np.int64))
        self.batch = self.batch.take(idx)
        self.order = self.order[idx]

    def set_members(self, batch: SolutionBatch) -> None:
        """Replace the feature/solution data of the current members, then re-filter."""
        if len(batch) != len(self.batch):
            raise ValueError("set_members expects one entry per current member")
        self.batch = batch
        if len(batch) > self.capacity:
            keep = np.sort(survivor_order(batch.features, batch.fitness, self.order)[: self.capacity])
            self.keep(keep)


def unstructured_add(rep: UnstructuredRepertoire, candidates: SolutionBatch) -> UnstructuredRepertoire:
    rep.add_batch(candidates)
    return rep


# ------------------------------------------------------------- extinction


def extinction(rep, proportion: float, rng: np.random.Generator):
    """Keep the best member plus a uniform random subset; ``max(1, round(k*n))`` survive."""
    if not 0 < proportion <= 1:
        raise ValueError("extinction proportion must lie in (0, 1]")
    members = rep.members()
    n = len(members)
    if n == 0:
        raise ValueError("extinction on an empty repertoire")
    count = max(1, round_half_up(proportion * n))
    best = int(np.argmax(members.fitness))
    rest = np.delete(np.arange(n), best)
    picked = rng.choice(rest, size=count - 1, replace=False) if count > 1 else np.zeros(0, dtype=np.int64)
    rep.keep(np.concatenate([[best], picked]))
    return rep


# ------------------------------------------------------------- re-encode


def reencode_all(rep, encode: Callable[[np.ndarray], np.ndarray]):
    """Recompute every member's feature from its stored trajectory."""
    members = rep.members()
    if len(members) == 0:
        return rep
    feats = np.asarray(encode(members.trajectories), dtype=float)
    if feats.shape[0] != len(members):
        raise ValueError("encoder returned the wrong number of features")
    rep.set_members(SolutionBatch(members.genotypes, members.fitness, feats, members.trajectories))
    return rep


# ---------------------------------------------------------------- tracker


@dataclass
class BestTracker:
    """Elitist record of the best solution seen, sampled once per batch."""

    best: Solution | None = None
    history: list = field(default_factory=list)

    @property
    def best_fitness(self) -> float:
        return -np.inf if self.best is None else self.best.fitness

    def update(self, batch: SolutionBatch, evaluations: int) -> None:
        if len(batch):
            i = int(np.argmax(batch.fitness))
            if batch.fitness[i] > self.best_fitness:
                self.best = batch[i]
        if self.history and evaluations <= self.history[-1][0]:
            raise ValueError("tracker evaluation counts must strictly increase")
        self.history.append((int(evaluations), float(self.best_fitness)))


# --------------------------------------------------------------- snapshot


def save_snapshot(path, rep, **metadata) -> None:
    m = rep.members()
    with open(Path(path), "wb") as fh:
        np.savez_compressed(
            fh,
            genotypes=m.genotypes,
            fitness=m.fitness,
            features=m.features,
            trajectories=m.trajectories,
            metadata=np.array(json.dumps(metadata)),
        )


def load_snapshot(path) -> tuple[SolutionBatch, dict]:
    with np.load(Path(path)) as z:
        batch = SolutionBatch(z["genotypes"], z["fitness"], z["features"], z["trajectories"])
        meta = json.loads(str(z["metadata"]))
    return batch, meta
