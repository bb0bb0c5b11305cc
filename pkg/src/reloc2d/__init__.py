"""Budgeted incremental map-matching relocalization in 2D landmark maps.

A robot with unknown start pose builds a local feature map while driving
and matches it against an a-priori landmark map under a fixed per-viewpoint
scoring budget, staying robust when a large fraction of the landmarks has
changed since the map was recorded.
"""

from ._kernels import backend_name, available_backends
from .config import SweepConfig, TrialConfig
from .geometry import (DegenerateSample, Point2, Pose2, apply, compose,
                       inverse, transform_from_two_correspondences)
from .global_map import GlobalMap
from .hypotheses import Hypothesis, HypothesisStore, best_hypothesis
from .local_map import LocalMap
from .relocalizer import Relocalizer, SchemeConfig
from .world import (InvalidParams, Observation, OdometryMeasurement, Rect,
                    World, WorldParams, generate_world, quick_params, sense,
                    step_robot, trajectory)

__version__ = "0.1.0"

__all__ = [
    "DegenerateSample", "GlobalMap", "Hypothesis", "HypothesisStore",
    "InvalidParams", "LocalMap", "Observation", "OdometryMeasurement",
    "Point2", "Pose2", "Rect", "Relocalizer", "SchemeConfig", "SweepConfig",
    "TrialConfig", "World", "WorldParams", "apply", "available_backends",
    "backend_name", "best_hypothesis", "compose", "generate_world",
    "inverse", "quick_params", "sense", "step_robot", "trajectory",
    "transform_from_two_correspondences",
]
