"""Planar rigid-transform algebra shared by all modules.

Angles are radians, normalized to (-pi, pi]. Distances are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

TWO_PI = 2.0 * math.pi

# Minimum separation of a feature pair used to build a transform; below this
# the recovered angle is ill-conditioned (sensor range noise is ~0.01 m).
EPS_DEGENERATE = 0.05


class DegenerateSample(ValueError):
    """Raised when a correspondence pair is too close to fix an orientation."""


class Point2(NamedTuple):
    x: float
    y: float


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform: rotation theta then translation (x, y).

    Doubles as a robot pose and as a local-to-global map transform.
    """

    theta: float = 0.0
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def t(self) -> Point2:
        return Point2(self.x, self.y)


IDENTITY = Pose2(0.0, 0.0, 0.0)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Transform that applies b first, then a."""
    ca = math.cos(a.theta)
    sa = math.sin(a.theta)
    return Pose2(
        a.theta + b.theta,
        ca * b.x - sa * b.y + a.x,
        sa * b.x + ca * b.y + a.y,
    )


def inverse(p: Pose2) -> Pose2:
    c = math.cos(p.theta)
    s = math.sin(p.theta)
    return Pose2(-p.theta, -(c * p.x + s * p.y), -(c * p.y - s * p.x))


def apply(p: Pose2, q: Point2) -> Point2:
    """R(theta) * q + t."""
    c = math.cos(p.theta)
    s = math.sin(p.theta)
    return Point2(c * q[0] - s * q[1] + p.x, s * q[0] + c * q[1] + p.y)


def advance(pose: Pose2, d_trans: float, d_rot: float) -> Pose2:
    """Motion model shared by simulator and dead reckoning: rotate, then
    translate along the new heading."""
    theta = pose.theta + d_rot
    return Pose2(
        theta,
        pose.x + d_trans * math.cos(theta),
        pose.y + d_trans * math.sin(theta),
    )


def transform_from_two_correspondences(
    f_a: Point2, f_b: Point2, l_a: Point2, l_b: Point2,
    min_separation: float = EPS_DEGENERATE,
) -> Pose2:
    """Orientation-preserving rigid transform mapping f_a onto l_a exactly
    and aligning the f_a->f_b direction with l_a->l_b.

    Raises DegenerateSample when |f_a - f_b| <= min_separation.
    """
    dfx = f_b[0] - f_a[0]
    dfy = f_b[1] - f_a[1]
    if math.hypot(dfx, dfy) <= min_separation:
        raise DegenerateSample(
            f"feature pair separation {math.hypot(dfx, dfy):.4f} m "
            f"<= {min_separation} m"
        )
    theta = wrap_angle(
        math.atan2(l_b[1] - l_a[1], l_b[0] - l_a[0]) - math.atan2(dfy, dfx)
    )
    c = math.cos(theta)
    s = math.sin(theta)
    tx = l_a[0] - (c * f_a[0] - s * f_a[1])
    ty = l_a[1] - (s * f_a[0] + c * f_a[1])
    return Pose2(theta, tx, ty)
