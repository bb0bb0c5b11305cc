"""A-priori landmark map of the mapped region.

Carries a quadtree for nearest-landmark queries, a distance-bucketed pair
index for congruent-pair retrieval, and uniform sampling of mapped-area
locations. Immutable after construction; concurrent read-only use is fine.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .geometry import EPS_DEGENERATE, Point2
from .world import InvalidParams, Rect, World

QUADTREE_LEAF_CAP = 16
QUADTREE_MAX_DEPTH = 12
PAIR_BUCKET_WIDTH = 0.25
PAIR_TOL_DEFAULT = 0.05


class GlobalMap:
    def __init__(self, points, mapped_region: Rect, max_pair_sep=10.0,
                 min_pair_sep=EPS_DEGENERATE, backend=None):
        self.backend = backend if backend is not None else _kernels.impl
        self.mapped_region = Rect(*mapped_region)
        self.points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        self.max_pair_sep = float(max_pair_sep)
        self.min_pair_sep = float(min_pair_sep)
        self.tree = self._build_tree()
        (self._bucket_pairs, self._bucket_seps, self._bucket_offsets,
         self._n_buckets) = self._build_pair_index()

    @property
    def n_landmarks(self):
        return self.points.shape[0]

    def _build_tree(self):
        m = self.mapped_region
        cx = 0.5 * (m.x0 + m.x1)
        cy = 0.5 * (m.y0 + m.y1)
        half = 0.5 * max(m.width, m.height)
        if half <= 0.0:
            half = 1.0
        # small pad so boundary landmarks stay strictly inside the root box
        tree = self.backend.Quadtree(cx, cy, half * 1.001 + 1e-9,
                                     QUADTREE_LEAF_CAP, QUADTREE_MAX_DEPTH)
        for x, y in self.points:
            tree.insert(x, y)
        return tree

    def _build_pair_index(self):
        """All landmark pairs with separation in (min_pair_sep, max_pair_sep],
        grouped into fixed-width distance buckets. Built once at map load
        via a coarse grid so construction stays near-linear."""
        pts = self.points
        n = pts.shape[0]
        sep_max = self.max_pair_sep
        pairs_i = []
        pairs_j = []
        if n >= 2:
            cell = sep_max
            ci = np.floor(pts[:, 0] / cell).astype(np.int64)
            cj = np.floor(pts[:, 1] / cell).astype(np.int64)
            buckets = {}
            for k in range(n):
                buckets.setdefault((int(ci[k]), int(cj[k])), []).append(k)
            # half neighborhood: each unordered cell pair visited once
            offsets = ((0, 0), (1, 0), (0, 1), (1, 1), (1, -1))
            for (bx, by), members in buckets.items():
                a = np.asarray(members, dtype=np.int64)
                for ox, oy in offsets:
                    other = buckets.get((bx + ox, by + oy))
                    if other is None:
                        continue
                    b = np.asarray(other, dtype=np.int64)
                    d = pts[a, None, :] - pts[None, b, :]
                    d2 = d[:, :, 0] ** 2 + d[:, :, 1] ** 2
                    mask = (d2 <= sep_max * sep_max) & \
                           (d2 > self.min_pair_sep * self.min_pair_sep)
                    if ox == 0 and oy == 0:
                        mask &= a[:, None] < b[None, :]
                    ii, jj = np.nonzero(mask)
                    if ii.size:
                        pairs_i.append(a[ii])
                        pairs_j.append(b[jj])
        if pairs_i:
            pi = np.concatenate(pairs_i)
            pj = np.concatenate(pairs_j)
        else:
            pi = np.empty(0, dtype=np.int64)
            pj = np.empty(0, dtype=np.int64)
        seps = np.hypot(pts[pi, 0] - pts[pj, 0], pts[pi, 1] - pts[pj, 1])
        n_buckets = int(math.ceil(sep_max / PAIR_BUCKET_WIDTH)) + 1
        bucket = np.minimum((seps / PAIR_BUCKET_WIDTH).astype(np.int64),
                            n_buckets - 1)
        order = np.argsort(bucket, kind="stable")
        pairs = np.stack([pi[order], pj[order]], axis=1)
        seps = seps[order]
        counts = np.bincount(bucket, minlength=n_buckets)
        offsets_arr = np.zeros(n_buckets + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets_arr[1:])
        return pairs, seps, offsets_arr, n_buckets

    @property
    def n_pairs(self):
        return self._bucket_pairs.shape[0]

    def pair_separations(self):
        return self._bucket_seps

    # --- queries --------------------------------------------------------

    def nearest_landmark(self, p):
        """Nearest landmark to ``p`` and its Euclidean distance, or None on
        an empty map."""
        i, d2 = self.tree.nearest(p[0], p[1])
        if i < 0:
            return None
        return Point2(self.points[i, 0], self.points[i, 1]), math.sqrt(d2)

    def sample_mapped_location(self, rng) -> Point2:
        m = self.mapped_region
        if m.width <= 0.0 or m.height <= 0.0:
            raise InvalidParams("mapped region is degenerate")
        u = rng.random(2)
        return Point2(m.x0 + u[0] * m.width, m.y0 + u[1] * m.height)

    def congruent_pairs(self, d, tol, max_out, rng):
        """Up to ``max_out`` ordered landmark pairs with separation within
        ``tol`` of ``d``, uniformly sampled without replacement. Both
        orientations of a stored pair are distinct candidates.

        Returns (la, lb) arrays of shape (k, 2); empty when nothing matches.
        """
        if d <= 0 or tol < 0:
            raise InvalidParams("congruent_pairs requires d > 0 and tol >= 0")
        lo = max(int((d - tol) / PAIR_BUCKET_WIDTH), 0)
        hi = min(int((d + tol) / PAIR_BUCKET_WIDTH), self._n_buckets - 1)
        empty = (np.empty((0, 2)), np.empty((0, 2)))
        if lo >= self._n_buckets or hi < 0 or lo > hi:
            return empty
        a = self._bucket_offsets[lo]
        b = self._bucket_offsets[hi + 1]
        if a == b:
            return empty
        seps = self._bucket_seps[a:b]
        sel = np.flatnonzero((seps >= d - tol) & (seps <= d + tol))
        if sel.size == 0:
            return empty
        pairs = self._bucket_pairs[a + sel]
        n_cand = 2 * pairs.shape[0]
        take = min(int(max_out), n_cand)
        choice = rng.permutation(n_cand)[:take]
        idx = choice >> 1
        flip = (choice & 1).astype(bool)
        first = np.where(flip, pairs[idx, 1], pairs[idx, 0])
        second = np.where(flip, pairs[idx, 0], pairs[idx, 1])
        return self.points[first], self.points[second]

    # --- construction helpers --------------------------------------------

    @classmethod
    def from_world(cls, world: World, backend=None) -> "GlobalMap":
        """Snapshot of the prior landmark layout restricted to the mapped
        region (the sensor, by contrast, sees the true layout everywhere)."""
        m = world.mapped
        pts = world.prior
        inside = (
            (pts[:, 0] >= m.x0) & (pts[:, 0] <= m.x1)
            & (pts[:, 1] >= m.y0) & (pts[:, 1] <= m.y1)
        )
        return cls(pts[inside], m, max_pair_sep=world.params.sensor_range,
                   backend=backend)

    @classmethod
    def from_world_file(cls, path, backend=None) -> "GlobalMap":
        from .world import load_world
        return cls.from_world(load_world(path), backend=backend)
