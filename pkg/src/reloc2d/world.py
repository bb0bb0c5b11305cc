"""Deterministic ground-truth world: landmark generation and churn, robot
motion, and noisy range/bearing sensing.

The world holds two landmark snapshots with shared ids: ``prior`` is the
layout at map-recording time, ``true`` the layout after a fraction of the
landmarks was relocated. The sensor observes ``true`` everywhere; the
stored map (see ``global_map``) covers only the mapped region of ``prior``.
That realizes both outlier sources: travel through unmapped terrain, and
changed landmarks inside the mapped region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .geometry import Point2, Pose2, advance, wrap_angle
from .rng import substream


class InvalidParams(ValueError):
    """Invalid world or trial parameters."""


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def contains(self, x, y):
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


class Observation(NamedTuple):
    """One sensed landmark: persistent track id, range (m), bearing (rad)
    relative to the robot heading."""

    track_id: int
    range: float
    bearing: float


class OdometryMeasurement(NamedTuple):
    d_trans: float
    d_rot: float


@dataclass(frozen=True)
class WorldParams:
    width: float = 800.0
    height: float = 200.0
    n_landmarks: int = 20000
    mapped: Rect = Rect(-400.0, -20.0, 400.0, 20.0)
    change_ratio: float = 0.0
    start: Point2 = Point2(0.0, -100.0)
    start_theta: float = 0.0
    goal: Point2 = Point2(0.0, 100.0)
    step_length: float = 0.5
    sensor_range: float = 10.0
    range_sigma: float = 0.01
    bearing_sigma_deg: float = 0.5
    odom_sigma_frac: float = 0.01

    @property
    def bounds(self) -> Rect:
        return Rect(-self.width / 2, -self.height / 2,
                    self.width / 2, self.height / 2)

    @property
    def bearing_sigma(self) -> float:
        # stored in degrees; all internal angles are radians
        return math.radians(self.bearing_sigma_deg)

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidParams("world bounds must have positive area")
        if self.n_landmarks < 0:
            raise InvalidParams("n_landmarks must be >= 0")
        if not 0.0 <= self.change_ratio <= 1.0:
            raise InvalidParams("change_ratio must be in [0, 1]")
        b = self.bounds
        m = self.mapped
        if not (b.x0 <= m.x0 <= m.x1 <= b.x1 and b.y0 <= m.y0 <= m.y1 <= b.y1):
            raise InvalidParams("mapped region must lie inside world bounds")
        if self.sensor_range <= 0:
            raise InvalidParams("sensor_range must be > 0")
        return self


def quick_params(change_ratio=0.0, **overrides) -> WorldParams:
    """Small world for CI: 200 x 50 m, same landmark density as default."""
    p = WorldParams(
        width=200.0,
        height=50.0,
        n_landmarks=1250,
        mapped=Rect(-100.0, -5.0, 100.0, 5.0),
        start=Point2(0.0, -25.0),
        goal=Point2(0.0, 25.0),
        change_ratio=change_ratio,
    )
    return replace(p, **overrides) if overrides else p


@dataclass(frozen=True)
class World:
    """Immutable after generation; safe to share read-only across trials."""

    params: WorldParams
    seed: int
    prior: np.ndarray = field(repr=False)   # (n, 2) positions at map time
    true: np.ndarray = field(repr=False)    # (n, 2) positions after changes
    moved: np.ndarray = field(repr=False)   # (n,) bool

    @property
    def bounds(self) -> Rect:
        return self.params.bounds

    @property
    def mapped(self) -> Rect:
        return self.params.mapped

    @property
    def n_landmarks(self) -> int:
        return self.prior.shape[0]


def generate_world(seed: int, params: WorldParams) -> World:
    """Uniform landmarks over the bounds; each landmark independently
    relocated to a fresh uniform position with probability change_ratio.
    Deterministic in (seed, params)."""
    params.validate()
    rng = substream(seed, "world")
    b = params.bounds
    n = params.n_landmarks
    prior = np.empty((n, 2), dtype=np.float64)
    prior[:, 0] = rng.uniform(b.x0, b.x1, size=n)
    prior[:, 1] = rng.uniform(b.y0, b.y1, size=n)
    moved = rng.random(n) < params.change_ratio
    true = prior.copy()
    k = int(moved.sum())
    if k:
        true[moved, 0] = rng.uniform(b.x0, b.x1, size=k)
        true[moved, 1] = rng.uniform(b.y0, b.y1, size=k)
    return World(params=params, seed=seed, prior=prior, true=true, moved=moved)


def sense(world: World, true_pose: Pose2, rng: np.random.Generator):
    """Observations of all true landmarks within sensor range of the pose.

    Range and bearing carry the configured Gaussian noise; the measured
    range is clamped to [0, sensor_range] so a reported range never exceeds
    the sensor's rating. Observations are ordered by landmark id.
    """
    p = world.params
    dx = world.true[:, 0] - true_pose.x
    dy = world.true[:, 1] - true_pose.y
    d2 = dx * dx + dy * dy
    ids = np.flatnonzero(d2 <= p.sensor_range * p.sensor_range)
    out = []
    if ids.size == 0:
        return out
    noise = rng.standard_normal((ids.size, 2))
    for k, i in enumerate(ids):
        r = math.sqrt(d2[i]) + noise[k, 0] * p.range_sigma
        r = min(max(r, 0.0), p.sensor_range)
        bearing = wrap_angle(
            math.atan2(dy[i], dx[i]) - true_pose.theta
            + noise[k, 1] * p.bearing_sigma
        )
        out.append(Observation(int(i), r, bearing))
    return out


def step_robot(true_pose: Pose2, command, rng: np.random.Generator,
               odom_sigma_frac: float = 0.01):
    """Advance the true pose by the exact command; report odometry corrupted
    by multiplicative Gaussian noise (sigma = odom_sigma_frac of magnitude)."""
    d_trans, d_rot = command
    new_pose = advance(true_pose, d_trans, d_rot)
    g = rng.standard_normal(2)
    odo = OdometryMeasurement(
        d_trans * (1.0 + g[0] * odom_sigma_frac),
        d_rot * (1.0 + g[1] * odom_sigma_frac),
    )
    return new_pose, odo


def trajectory(params: WorldParams):
    """Straight-line command sequence from start to goal: one heading
    alignment, then fixed-length steps (plus a shorter final step when the
    distance is not a multiple of the step length)."""
    dx = params.goal.x - params.start.x
    dy = params.goal.y - params.start.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return []
    align = wrap_angle(math.atan2(dy, dx) - params.start_theta)
    cmds = [(0.0, align)]
    n_full = int(dist / params.step_length)
    cmds.extend([(params.step_length, 0.0)] * n_full)
    rem = dist - n_full * params.step_length
    if rem > 1e-12:
        cmds.append((rem, 0.0))
    return cmds


# --- world text format -------------------------------------------------
#
# line-oriented; header then one landmark per line:
#   reloc2d-world v1
#   bounds <x0> <y0> <x1> <y1>
#   mapped <x0> <y0> <x1> <y1>
#   change_ratio <r>
#   seed <seed>
#   landmarks <n>
#   <id> <x_prior> <y_prior> <x_true> <y_true>

_WORLD_MAGIC = "reloc2d-world v1"


def save_world(world: World, path):
    p = world.params
    b = p.bounds
    m = p.mapped
    with open(path, "w") as fh:
        fh.write(f"{_WORLD_MAGIC}\n")
        fh.write(f"bounds {b.x0!r} {b.y0!r} {b.x1!r} {b.y1!r}\n")
        fh.write(f"mapped {m.x0!r} {m.y0!r} {m.x1!r} {m.y1!r}\n")
        fh.write(f"change_ratio {p.change_ratio!r}\n")
        fh.write(f"seed {world.seed}\n")
        fh.write(f"landmarks {world.n_landmarks}\n")
        for i in range(world.n_landmarks):
            fh.write(
                f"{i} {float(world.prior[i, 0])!r} {float(world.prior[i, 1])!r} "
                f"{float(world.true[i, 0])!r} {float(world.true[i, 1])!r}\n"
            )


def load_world(path, params: WorldParams | None = None) -> World:
    """Rebuild a World from the text format. ``params`` supplies sensor and
    trajectory settings (geometry fields are overridden from the file)."""
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != _WORLD_MAGIC:
            raise InvalidParams(f"not a world file: header {magic!r}")
        bounds = Rect(*(float(v) for v in fh.readline().split()[1:5]))
        mapped = Rect(*(float(v) for v in fh.readline().split()[1:5]))
        change_ratio = float(fh.readline().split()[1])
        seed = int(fh.readline().split()[1])
        n = int(fh.readline().split()[1])
        prior = np.empty((n, 2), dtype=np.float64)
        true = np.empty((n, 2), dtype=np.float64)
        for k in range(n):
            parts = fh.readline().split()
            i = int(parts[0])
            prior[i, 0] = float(parts[1])
            prior[i, 1] = float(parts[2])
            true[i, 0] = float(parts[3])
            true[i, 1] = float(parts[4])
    base = params if params is not None else WorldParams()
    p = replace(
        base,
        width=bounds.width,
        height=bounds.height,
        n_landmarks=n,
        mapped=mapped,
        change_ratio=change_ratio,
    )
    moved = np.any(prior != true, axis=1)
    return World(params=p, seed=seed, prior=prior, true=true, moved=moved)
