"""A cheap point-mass maze: the agent starts inside a cup whose closed end
faces the goal, so heading straight for the goal gets it stuck."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..core import subsample_indices
from .maze import CONTACT_EPS, MazeWorld, _ray_hit
from .policy import PolicyNet
from .rollout import BatchEvaluation, PolicyError, goal_fitness

POINT_LAYOUT = {"xy": (0, 2)}


def u_maze() -> MazeWorld:
    return MazeWorld(
        walls=[
            [0.3, 0.65, 0.7, 0.65],
            [0.3, 0.45, 0.3, 0.65],
            [0.7, 0.45, 0.7, 0.65],
        ],
        goal=(0.5, 0.85),
        goal_radius=0.05,
        start=(0.5, 0.55, 0.0),
        episode_length=100,
        name="u_maze",
    )


@njit(cache=True)
def _move(x, y, vx, vy, walls):
    dist = np.hypot(vx, vy)
    if dist == 0.0:
        return x, y
    dx = vx / dist
    dy = vy / dist
    t, k = _ray_hit(x, y, dx, dy, walls, dist)
    if k >= 0:
        t = max(t - CONTACT_EPS, 0.0)
    return x + t * dx, y + t * dy


@njit(cache=True)
def _point_rollout(params, sizes, walls, start, n_steps, speed):
    n_batch = params.shape[0]
    width = 0
    for s in sizes:
        width = max(width, s)
    obs = np.empty((n_batch, n_steps, 2))
    bad = np.zeros(n_batch, dtype=np.bool_)
    work_a = np.empty(width)
    work_b = np.empty(width)
    for b in range(n_batch):
        x = start[0]
        y = start[1]
        p = params[b]
        for t in range(n_steps):
            for i in range(width):
                work_a[i] = 0.0
            work_a[0] = x
            work_a[1] = y
            off = 0
            for layer in range(sizes.shape[0] - 1):
                n_in = sizes[layer]
                n_out = sizes[layer + 1]
                b_off = off + n_in * n_out
                for j in range(n_out):
                    s = p[b_off + j]
                    for i in range(n_in):
                        s += work_a[i] * p[off + i * n_out + j]
                    work_b[j] = np.tanh(s)
                off = b_off + n_out
                for j in range(n_out):
                    work_a[j] = work_b[j]
            vx = work_a[0]
            vy = work_a[1]
            if np.isnan(vx) or np.isnan(vy):
                bad[b] = True
                vx = 0.0
                vy = 0.0
            x, y = _move(x, y, vx * speed, vy * speed, walls)
            obs[b, t, 0] = x
            obs[b, t, 1] = y
    return obs, bad


class PointMazeTask:
    """Point agent observing its own position and commanding a velocity."""

    name = "point_maze"

    def __init__(self, world: MazeWorld | None = None, policy: PolicyNet = PolicyNet((2, 8, 2)),
                 speed: float = 0.03, traj_len: int = 25):
        self.world = world if world is not None else u_maze()
        if policy.layer_sizes[0] != 2 or policy.layer_sizes[-1] != 2:
            raise ValueError("point-maze policy must map 2 inputs to 2 outputs")
        self.policy = policy
        self.speed = speed
        self.traj_len = traj_len
        self._idx = subsample_indices(self.world.episode_length, traj_len)

    @property
    def n_params(self) -> int:
        return self.policy.n_params

    @property
    def traj_shape(self) -> tuple:
        return (self.traj_len, 2)

    def _finish(self, obs):
        final_xy = obs[:, -1, :].copy()
        return BatchEvaluation(
            fitness=goal_fitness(final_xy, self.world.goal, self.world.goal_radius),
            trajectories=obs[:, self._idx],
            final_xy=final_xy,
            observation_mean=obs.mean(axis=1),
            layout=POINT_LAYOUT,
        )

    def evaluate(self, genotypes, rng=None) -> BatchEvaluation:
        params = np.ascontiguousarray(np.atleast_2d(genotypes), dtype=np.float64)
        if params.shape[1] != self.n_params:
            raise ValueError(f"genotype dimension {params.shape[1]} != {self.n_params}")
        obs, bad = _point_rollout(
            params, self.policy.sizes_array, self.world.all_walls,
            np.asarray(self.world.start, dtype=np.float64), self.world.episode_length, self.speed,
        )
        if bad.any():
            raise PolicyError(f"NaN action from genotype(s) {np.flatnonzero(bad).tolist()}")
        return self._finish(obs)

    def simulate_actions(self, actions) -> BatchEvaluation:
        """Replay a fixed (episode_length, 2) action script instead of a policy."""
        actions = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
        if actions.shape != (self.world.episode_length, 2):
            raise ValueError(f"need {self.world.episode_length} actions of size 2")
        x, y = self.world.start[:2]
        obs = np.empty((1, len(actions), 2))
        for t, (vx, vy) in enumerate(actions):
            x, y = _move(x, y, vx * self.speed, vy * self.speed, self.world.all_walls)
            obs[0, t] = (x, y)
        return self._finish(obs)


def point_maze_episode(genotype, traj_len: int = 25, task: PointMazeTask | None = None):
    task = task if task is not None else PointMazeTask(traj_len=traj_len)
    return task.evaluate(np.asarray(genotype)[None, :]).episode(0)
