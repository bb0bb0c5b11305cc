"""Incremental local feature map.

Estimates feature positions and the robot pose in the robot's own start
frame from odometry and range/bearing observations, and records which
features were seen together. Deliberately simple: the pose is dead-reckoned
and each feature is the covariance-weighted running mean of its observation
back-projections (scalar inverse-trace weights), which keeps the
per-viewpoint update cost bounded by the number of observations.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .geometry import IDENTITY, Pose2, advance

TREE_HALF_DEFAULT = 512.0
_GROW = 256

# floor for the per-observation covariance trace so zero-noise runs keep
# finite (equal) weights
_TRACE_FLOOR = 1e-12


class LocalMap:
    """Single-writer structure: one relocalizer owns and updates it; readers
    only look between updates."""

    def __init__(self, range_sigma=0.01, bearing_sigma=0.0087266462599716477,
                 tree_half=TREE_HALF_DEFAULT, backend=None):
        self.backend = backend if backend is not None else _kernels.impl
        self.range_sigma = float(range_sigma)
        self.bearing_sigma = float(bearing_sigma)
        self.pose = IDENTITY
        self.n_features = 0
        self._cap = _GROW
        self.fx = np.zeros(self._cap)
        self.fy = np.zeros(self._cap)
        self._wsum = np.zeros(self._cap)
        self.obs_count = np.zeros(self._cap, dtype=np.int64)
        self.covis = []            # per feature: set of covisible feature ids
        self._track_to_fid = {}
        self.new_feature_ids = []
        self.viewpoint = 0
        self._tree_half = float(tree_half)
        self.tree = self.backend.Quadtree(0.0, 0.0, self._tree_half)

    def _grow(self):
        self._cap *= 2
        for name in ("fx", "fy", "_wsum"):
            arr = getattr(self, name)
            new = np.zeros(self._cap, dtype=arr.dtype)
            new[: arr.shape[0]] = arr
            setattr(self, name, new)
        new = np.zeros(self._cap, dtype=np.int64)
        new[: self.obs_count.shape[0]] = self.obs_count
        self.obs_count = new

    def _rebuild_tree(self, need_half):
        half = self._tree_half
        while half < need_half:
            half *= 2.0
        self._tree_half = half
        self.tree = self.backend.Quadtree(0.0, 0.0, half)
        for i in range(self.n_features):
            self.tree.insert(self.fx[i], self.fy[i])

    def _tree_put(self, i, x, y, is_new):
        # the feature arrays already hold (x, y) for i, so a full rebuild
        # re-inserts every feature at its current position in id order
        if not self.tree.contains(x, y):
            self._rebuild_tree(max(abs(x), abs(y)) * 1.5)
            return
        if is_new:
            self.tree.insert(x, y)
        else:
            self.tree.move(i, x, y)

    def update(self, odo, observations):
        """Advance the pose by odometry, then fold in the viewpoint's
        observations: unseen track ids start new features, re-observations
        refine existing ones, and all features seen at this viewpoint are
        recorded as mutually covisible."""
        self.pose = advance(self.pose, odo[0], odo[1])
        self.new_feature_ids = []
        seen = []
        c = math.cos(self.pose.theta)
        s = math.sin(self.pose.theta)
        for obs in observations:
            rx = obs.range * math.cos(obs.bearing)
            ry = obs.range * math.sin(obs.bearing)
            mx = c * rx - s * ry + self.pose.x
            my = s * rx + c * ry + self.pose.y
            trace = (self.range_sigma * self.range_sigma
                     + (obs.range * self.bearing_sigma) ** 2)
            if trace < _TRACE_FLOOR:
                trace = _TRACE_FLOOR
            w = 1.0 / trace
            fid = self._track_to_fid.get(obs.track_id)
            if fid is None:
                fid = self.n_features
                self.n_features += 1
                if fid >= self._cap:
                    self._grow()
                self._track_to_fid[obs.track_id] = fid
                self.fx[fid] = mx
                self.fy[fid] = my
                self._wsum[fid] = w
                self.obs_count[fid] = 1
                self.covis.append(set())
                self.new_feature_ids.append(fid)
                self._tree_put(fid, mx, my, is_new=True)
            else:
                wsum = self._wsum[fid] + w
                nx = (self._wsum[fid] * self.fx[fid] + w * mx) / wsum
                ny = (self._wsum[fid] * self.fy[fid] + w * my) / wsum
                self.fx[fid] = nx
                self.fy[fid] = ny
                self._wsum[fid] = wsum
                self.obs_count[fid] += 1
                self._tree_put(fid, nx, ny, is_new=False)
            seen.append(fid)
        for a in seen:
            ca = self.covis[a]
            for b in seen:
                if b != a:
                    ca.add(b)
        self.viewpoint += 1
        return self

    def covisible_triple(self, anchor_id, rng):
        """The anchor plus two distinct features drawn uniformly from its
        covisibility set, or None when fewer than two partners exist."""
        partners = self.covis[anchor_id]
        if len(partners) < 2:
            return None
        ordered = sorted(partners)
        pick = rng.choice(len(ordered), size=2, replace=False)
        return (anchor_id, ordered[int(pick[0])], ordered[int(pick[1])])

    def positions(self):
        return np.stack([self.fx[: self.n_features],
                         self.fy[: self.n_features]], axis=1)

    def feature(self, fid):
        return (self.fx[fid], self.fy[fid])

    def dump_features(self, path):
        """Feature snapshot in the landmark-list text format used for
        diagnostic plots: one `id x y n_obs` line per feature."""
        with open(path, "w") as fh:
            fh.write("reloc2d-features v1\n")
            fh.write(f"features {self.n_features}\n")
            for i in range(self.n_features):
                fh.write(f"{i} {self.fx[i]!r} {self.fy[i]!r} "
                         f"{int(self.obs_count[i])}\n")
