"""Hand-coded and random behaviour descriptors for the MAP-Elites baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rollout import BatchEvaluation, EpisodeResult

FEATURE_KINDS = ("xy", "bumper", "laser_mean", "random_dims")


@dataclass(frozen=True)
class RandomFeatureSpec:
    """State dimensions and trajectory rows sampled once per experiment,
    with the bounds used to squash them into [0, 1]."""

    dims: tuple
    rows: tuple
    lo: tuple
    hi: tuple

    def __post_init__(self):
        n = len(self.dims)
        if n == 0 or not (len(self.rows) == len(self.lo) == len(self.hi) == n):
            raise ValueError("random feature spec fields must be non-empty and equally long")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("random feature bounds must satisfy lo < hi")

    @classmethod
    def sample(cls, rng: np.random.Generator, traj_shape, reference=None, n_features: int = 2,
               default_bounds=(0.0, 1.0)) -> "RandomFeatureSpec":
        """Pick ``n_features`` (row, dim) pairs; bounds come from the
        empirical range of ``reference`` trajectories when that range is
        non-degenerate, else ``default_bounds``."""
        t_s, d_s = traj_shape
        dims = tuple(int(v) for v in rng.integers(0, d_s, n_features))
        rows = tuple(int(v) for v in rng.integers(0, t_s, n_features))
        lo, hi = [], []
        for r, d in zip(rows, dims):
            l, h = default_bounds
            if reference is not None and len(reference):
                vals = np.asarray(reference)[:, r, d]
                if vals.max() - vals.min() > 1e-6:
                    l, h = float(vals.min()), float(vals.max())
            lo.append(l)
            hi.append(h)
        return cls(dims, rows, tuple(lo), tuple(hi))

    def apply(self, trajectories: np.ndarray) -> np.ndarray:
        trajectories = np.asarray(trajectories)
        t_s, d_s = trajectories.shape[-2:]
        if max(self.rows) >= t_s or max(self.dims) >= d_s:
            raise ValueError("random feature spec does not fit the trajectory shape")
        vals = trajectories[..., list(self.rows), list(self.dims)]
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return (np.clip(vals, lo, hi) - lo) / (hi - lo)


def feature_dim(kind: str, spec: RandomFeatureSpec | None = None) -> int:
    if kind == "xy":
        return 2
    if kind == "bumper":
        return 2
    if kind == "laser_mean":
        return 3
    if kind == "random_dims":
        return len(spec.dims) if spec is not None else 2
    raise ValueError(f"unknown feature kind {kind!r}")


def _slice(layout, name):
    if name not in layout:
        raise ValueError(f"environment provides no {name!r} sensors")
    lo, hi = layout[name]
    return slice(lo, hi)


def batch_features(ev: BatchEvaluation, kind: str, spec: RandomFeatureSpec | None = None) -> np.ndarray:
    if kind == "xy":
        return np.clip(ev.final_xy, 0.0, 1.0)
    if kind == "bumper":
        return ev.observation_mean[:, _slice(ev.layout, "bumper")]
    if kind == "laser_mean":
        return ev.observation_mean[:, _slice(ev.layout, "laser")]
    if kind == "random_dims":
        if not isinstance(spec, RandomFeatureSpec):
            raise ValueError("random_dims features need a RandomFeatureSpec")
        return spec.apply(ev.trajectories)
    raise ValueError(f"unknown feature kind {kind!r}")


def extract_feature(result: EpisodeResult, kind: str, spec: RandomFeatureSpec | None = None) -> np.ndarray:
    ev = BatchEvaluation(
        fitness=np.array([result.fitness]),
        trajectories=np.asarray(result.trajectory)[None],
        final_xy=np.asarray(result.final_position, dtype=float)[None],
        observation_mean=np.asarray(result.observation_mean)[None],
        layout=result.layout,
    )
    return batch_features(ev, kind, spec)[0]
