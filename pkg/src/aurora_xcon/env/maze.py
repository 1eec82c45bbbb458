"""Maze world, laser/bumper sensing and differential-drive kinematics.

The robot is a point for collision purposes.  Every world is implicitly
enclosed by the unit square; the border segments are appended to the
interior walls at load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

# Clearance kept between a blocked robot and the wall it hit.
CONTACT_EPS = 1e-6
# Half-width (radians) of the frontal sector in which both bumpers fire.
BUMPER_OVERLAP = math.pi / 12

BORDER = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class DriveParams:
    """Kinematic and sensor constants of the differential-drive robot."""

    v_max: float = 0.03
    axle: float = 0.05
    dt: float = 1.0
    laser_range: float = 0.2
    laser_angles: tuple = (-math.pi / 4, 0.0, math.pi / 4)


@dataclass(frozen=True)
class MazeWorld:
    walls: np.ndarray  # (W, 4) interior segments x1, y1, x2, y2
    goal: tuple
    goal_radius: float
    start: tuple  # x, y, heading
    episode_length: int = 200
    name: str = "custom"
    all_walls: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        walls = np.asarray(self.walls, dtype=np.float64).reshape(-1, 4)
        object.__setattr__(self, "walls", walls)
        _check_unit(walls.ravel(), "wall coordinate")
        _check_unit(self.goal, "goal")
        _check_unit(self.start[:2], "start")
        if not self.goal_radius > 0:
            raise ValueError("goal_radius must be positive")
        if int(self.episode_length) < 1:
            raise ValueError("episode_length must be >= 1")
        object.__setattr__(self, "all_walls", np.ascontiguousarray(np.vstack([walls, BORDER])))

    @classmethod
    def from_dict(cls, data: dict, name: str = "custom") -> "MazeWorld":
        expected = {"walls", "goal", "goal_radius", "start", "episode_length"}
        missing = expected - set(data)
        if missing:
            raise ValueError(f"maze file missing fields: {sorted(missing)}")
        unknown = set(data) - expected - {"name"}
        if unknown:
            raise ValueError(f"unknown maze fields: {sorted(unknown)}")
        walls = np.asarray(data["walls"], dtype=float)
        if walls.size and (walls.ndim != 2 or walls.shape[1] != 4):
            raise ValueError("walls must be a list of [x1, y1, x2, y2]")
        start = tuple(float(v) for v in data["start"])
        if len(start) != 3:
            raise ValueError("start must be [x, y, theta]")
        goal = tuple(float(v) for v in data["goal"])
        if len(goal) != 2:
            raise ValueError("goal must be [x, y]")
        return cls(
            walls=walls,
            goal=goal,
            goal_radius=float(data["goal_radius"]),
            start=start,
            episode_length=int(data["episode_length"]),
            name=data.get("name", name),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "walls": self.walls.tolist(),
            "goal": list(self.goal),
            "goal_radius": self.goal_radius,
            "start": list(self.start),
            "episode_length": self.episode_length,
        }


def _check_unit(values, what):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{what} outside the unit square: {arr.tolist()}")


def load_maze(path) -> MazeWorld:
    path = Path(path)
    with open(path) as fh:
        return MazeWorld.from_dict(json.load(fh), name=path.stem)


def standard_maze() -> MazeWorld:
    """The bundled deceptive maze."""
    text = resources.files("aurora_xcon.env").joinpath("data/standard_maze.json").read_text()
    return MazeWorld.from_dict(json.loads(text), name="standard")


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float
    bumper_left: int = 0
    bumper_right: int = 0


# ---------------------------------------------------------------- kernels


@njit(cache=True, fastmath=True)
def _ray_hit(px, py, dx, dy, walls, max_t):
    """Smallest ray parameter t in [0, max_t] hitting a wall, or -1."""
    best = max_t
    hit = -1
    for k in range(walls.shape[0]):
        ax = walls[k, 0]
        ay = walls[k, 1]
        bx = walls[k, 2]
        by = walls[k, 3]
        # cheap reject: wall bounding box farther than the current best hit
        if (min(ax, bx) > px + best or max(ax, bx) < px - best
                or min(ay, by) > py + best or max(ay, by) < py - best):
            continue
        ex = bx - ax
        ey = by - ay
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-12:
            continue
        qx = ax - px
        qy = ay - py
        t = (qx * ey - qy * ex) / denom
        u = (qx * dy - qy * dx) / denom
        if t >= 0.0 and t <= best and u >= -1e-9 and u <= 1.0 + 1e-9:
            best = t
            hit = k
    return best, hit


@njit(cache=True)
def _wrap(a):
    while a >= math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


@njit(cache=True)
def _laser(px, py, angle, walls, max_range):
    t, _ = _ray_hit(px, py, math.cos(angle), math.sin(angle), walls, max_range)
    return t / max_range


@njit(cache=True)
def _bumpers(px, py, theta, walls, k):
    ax = walls[k, 0]
    ay = walls[k, 1]
    ex = walls[k, 2] - ax
    ey = walls[k, 3] - ay
    nx = -ey
    ny = ex
    # orient the normal towards the robot; the obstacle lies along -n
    if nx * (px - ax) + ny * (py - ay) < 0.0:
        nx = -nx
        ny = -ny
    alpha = _wrap(math.atan2(-ny, -nx) - theta)
    left = 1 if (alpha >= -BUMPER_OVERLAP and alpha <= math.pi / 2) else 0
    right = 1 if (alpha <= BUMPER_OVERLAP and alpha >= -math.pi / 2) else 0
    return left, right


@njit(cache=True)
def _step(x, y, theta, a1, a2, walls, v_max, axle, dt):
    v = 0.5 * (a1 + a2) * v_max
    omega = (a2 - a1) / axle * v_max
    mid = theta + 0.5 * omega * dt
    new_theta = _wrap(theta + omega * dt)
    dist = v * dt
    left = 0
    right = 0
    if dist != 0.0:
        sgn = 1.0 if dist > 0.0 else -1.0
        dx = sgn * math.cos(mid)
        dy = sgn * math.sin(mid)
        travel = abs(dist)
        t, k = _ray_hit(x, y, dx, dy, walls, travel)
        if k >= 0:
            t = max(t - CONTACT_EPS, 0.0)
            left, right = _bumpers(x, y, new_theta, walls, k)
        x = x + t * dx
        y = y + t * dy
    return x, y, new_theta, left, right


@njit(cache=True)
def _observe(x, y, theta, left, right, walls, laser_range, laser_angles, out):
    n = laser_angles.shape[0]
    for j in range(n):
        out[j] = _laser(x, y, theta + laser_angles[j], walls, laser_range)
    out[n] = left
    out[n + 1] = right


@njit(cache=True)
def _policy_forward(params, sizes, inp, out, work_a, work_b):
    """Tanh MLP; each layer packs its (in x out) weights row-major then biases."""
    n_layers = sizes.shape[0] - 1
    for i in range(sizes[0]):
        work_a[i] = inp[i]
    off = 0
    for layer in range(n_layers):
        n_in = sizes[layer]
        n_out = sizes[layer + 1]
        b_off = off + n_in * n_out
        for j in range(n_out):
            s = params[b_off + j]
            for i in range(n_in):
                s += work_a[i] * params[off + i * n_out + j]
            work_b[j] = math.tanh(s)
        off = b_off + n_out
        for j in range(n_out):
            work_a[j] = work_b[j]
    for j in range(sizes[-1]):
        out[j] = work_a[j]


@njit(cache=True)
def rollout_batch(params, sizes, walls, start, n_steps, v_max, axle, dt, laser_range, laser_angles):
    """Roll out ``params.shape[0]`` policies.

    Returns per-step observations (B, n_steps, n_obs), final poses (B, 3)
    and a per-policy flag set when the network produced a NaN.
    """
    n_batch = params.shape[0]
    n_obs = laser_angles.shape[0] + 2
    width = 0
    for s in sizes:
        width = max(width, s)
    obs = np.empty((n_batch, n_steps, n_obs))
    poses = np.empty((n_batch, 3))
    bad = np.zeros(n_batch, dtype=np.bool_)
    cur = np.empty(n_obs)
    act = np.empty(sizes[-1])
    work_a = np.empty(width)
    work_b = np.empty(width)
    for b in range(n_batch):
        x = start[b, 0]
        y = start[b, 1]
        theta = start[b, 2]
        _observe(x, y, theta, 0, 0, walls, laser_range, laser_angles, cur)
        p = params[b]
        for t in range(n_steps):
            _policy_forward(p, sizes, cur, act, work_a, work_b)
            a1 = act[0]
            a2 = act[1]
            if math.isnan(a1) or math.isnan(a2):
                bad[b] = True
                a1 = 0.0
                a2 = 0.0
            x, y, theta, left, right = _step(x, y, theta, a1, a2, walls, v_max, axle, dt)
            _observe(x, y, theta, left, right, walls, laser_range, laser_angles, cur)
            for j in range(n_obs):
                obs[b, t, j] = cur[j]
        poses[b, 0] = x
        poses[b, 1] = y
        poses[b, 2] = theta
    return obs, poses, bad


# ------------------------------------------------------------- public ops


def laser_cast(state: RobotState, world: MazeWorld, angle_offset: float, max_range: float) -> float:
    """Normalised distance to the nearest wall along heading + offset (1.0 if none in range)."""
    if not max_range > 0:
        raise ValueError("max_range must be positive")
    return float(_laser(state.x, state.y, state.theta + angle_offset, world.all_walls, max_range))


def maze_step(
    state: RobotState, action, world: MazeWorld, drive: DriveParams = DriveParams()
) -> tuple[RobotState, np.ndarray]:
    """Advance one control step; returns the new state and its 5-dim observation."""
    a1, a2 = (float(v) for v in action)
    if not (-1.0 <= a1 <= 1.0 and -1.0 <= a2 <= 1.0):
        raise ValueError(f"action outside [-1, 1]: {(a1, a2)}")
    x, y, theta, left, right = _step(
        state.x, state.y, state.theta, a1, a2, world.all_walls, drive.v_max, drive.axle, drive.dt
    )
    obs = np.empty(len(drive.laser_angles) + 2)
    _observe(
        x, y, theta, left, right, world.all_walls, drive.laser_range,
        np.asarray(drive.laser_angles, dtype=np.float64), obs,
    )
    return RobotState(x, y, theta, int(left), int(right)), obs


def has_line_of_sight(world: MazeWorld, a, b) -> bool:
    """True if the straight segment from ``a`` to ``b`` crosses no interior wall."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    length = float(np.hypot(*d))
    if length == 0.0:
        return True
    _, k = _ray_hit(a[0], a[1], d[0] / length, d[1] / length, world.walls, length)
    return k < 0
