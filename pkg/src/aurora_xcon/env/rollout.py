"""Episode rollouts for the maze robot, single and batched."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import subsample_indices
from .maze import DriveParams, MazeWorld, rollout_batch, standard_maze
from .policy import PolicyNet

MAZE_LAYOUT = {"laser": (0, 3), "bumper": (3, 5)}


class PolicyError(RuntimeError):
    """A policy produced a non-finite action."""


@dataclass
class EpisodeResult:
    fitness: float
    trajectory: np.ndarray
    final_position: tuple
    goal_reached: bool
    # mean of every per-step observation over the full (unsubsampled) episode
    observation_mean: np.ndarray = None
    layout: dict = field(default_factory=dict)


@dataclass
class BatchEvaluation:
    fitness: np.ndarray
    trajectories: np.ndarray
    final_xy: np.ndarray
    observation_mean: np.ndarray
    layout: dict

    @property
    def goal_reached(self) -> np.ndarray:
        return self.fitness == 0.0

    def __len__(self):
        return len(self.fitness)

    def episode(self, i: int) -> EpisodeResult:
        return EpisodeResult(
            fitness=float(self.fitness[i]),
            trajectory=self.trajectories[i],
            final_position=(float(self.final_xy[i, 0]), float(self.final_xy[i, 1])),
            goal_reached=bool(self.fitness[i] == 0.0),
            observation_mean=self.observation_mean[i],
            layout=self.layout,
        )


def goal_fitness(final_xy: np.ndarray, goal, radius: float) -> np.ndarray:
    dist = np.hypot(final_xy[..., 0] - goal[0], final_xy[..., 1] - goal[1])
    return np.where(dist < radius, 0.0, -dist)


class MazeTask:
    """Batched evaluator for the differential-drive maze robot."""

    name = "maze"

    def __init__(
        self,
        world: MazeWorld | None = None,
        policy: PolicyNet = PolicyNet((5, 5, 2)),
        drive: DriveParams = DriveParams(),
        traj_len: int = 50,
        start_jitter: float = 0.0,
    ):
        self.world = world if world is not None else standard_maze()
        self.policy = policy
        self.drive = drive
        self.traj_len = traj_len
        self.start_jitter = start_jitter
        n_obs = len(drive.laser_angles) + 2
        if policy.layer_sizes[0] != n_obs or policy.layer_sizes[-1] != 2:
            raise ValueError(f"policy must map {n_obs} observations to 2 wheel commands")
        self._idx = subsample_indices(self.world.episode_length, traj_len)
        self._angles = np.asarray(drive.laser_angles, dtype=np.float64)

    @property
    def n_params(self) -> int:
        return self.policy.n_params

    @property
    def traj_shape(self) -> tuple:
        return (self.traj_len, len(self.drive.laser_angles) + 2)

    def evaluate(self, genotypes, rng: np.random.Generator | None = None) -> BatchEvaluation:
        params = np.ascontiguousarray(np.atleast_2d(genotypes), dtype=np.float64)
        if params.shape[1] != self.n_params:
            raise ValueError(f"genotype dimension {params.shape[1]} != {self.n_params}")
        start = np.tile(np.asarray(self.world.start, dtype=np.float64), (len(params), 1))
        if self.start_jitter > 0:
            if rng is None:
                raise ValueError("start jitter needs an rng")
            start[:, :2] += rng.uniform(-self.start_jitter, self.start_jitter, (len(params), 2))
            np.clip(start[:, :2], 0.0, 1.0, out=start[:, :2])
        d = self.drive
        obs, poses, bad = rollout_batch(
            params, self.policy.sizes_array, self.world.all_walls, start,
            self.world.episode_length, d.v_max, d.axle, d.dt, d.laser_range, self._angles,
        )
        if bad.any():
            raise PolicyError(f"NaN action from genotype(s) {np.flatnonzero(bad).tolist()}")
        final_xy = poses[:, :2]
        return BatchEvaluation(
            fitness=goal_fitness(final_xy, self.world.goal, self.world.goal_radius),
            trajectories=obs[:, self._idx],
            final_xy=final_xy,
            observation_mean=obs.mean(axis=1),
            layout=MAZE_LAYOUT,
        )


def run_episode(genotype, world: MazeWorld | None = None, traj_len: int = 50,
                rng: np.random.Generator | None = None, task: MazeTask | None = None) -> EpisodeResult:
    """Roll out one genotype on the maze and score it by final goal distance."""
    task = task if task is not None else MazeTask(world, traj_len=traj_len)
    return task.evaluate(np.asarray(genotype)[None, :], rng).episode(0)
