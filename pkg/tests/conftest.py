import math

import numpy as np
import pytest

from reloc2d.geometry import Point2
from reloc2d.world import Rect, World, WorldParams, quick_params


def make_world(landmarks, width=60.0, height=60.0, mapped=None, seed=0,
               noise=False, **overrides):
    """World with explicit landmark positions (no churn), for tests that
    need exact geometry. Noise off by default."""
    pts = np.asarray(landmarks, dtype=np.float64).reshape(-1, 2)
    args = dict(width=width, height=height, n_landmarks=pts.shape[0],
                mapped=mapped if mapped is not None
                else Rect(-width / 2, -height / 2, width / 2, height / 2))
    if not noise:
        args.update(range_sigma=0.0, bearing_sigma_deg=0.0,
                    odom_sigma_frac=0.0)
    args.update(overrides)
    params = WorldParams(**args)
    return World(params=params, seed=seed, prior=pts.copy(), true=pts.copy(),
                 moved=np.zeros(pts.shape[0], dtype=bool))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quick_world_params():
    return quick_params()


# small irregular landmark cloud with unique pair separations
IRREGULAR_LANDMARKS = [
    (0.0, 0.0), (4.1, 0.7), (1.3, 5.2), (-3.8, 2.9), (-1.9, -4.4),
    (5.7, -3.1), (-5.2, -1.7), (2.9, -6.0), (7.9, 4.3), (-7.1, 6.2),
]
