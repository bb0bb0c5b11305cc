"""Pure-Python fallback for the hot kernels.

Implements exactly the same arithmetic, traversal order and tie handling as
the compiled backend in ``_core.pyx`` so that both produce bit-identical
results; only the speed differs. Transcendentals go through ``math`` (libm),
matching the C calls in the compiled module.

Hot surfaces:
  * Quadtree        -- point index with insert / move / nearest queries
  * PairMemory      -- per-viewpoint set of already scored (feature, hyp) pairs
  * score_pairs     -- batch inlier scoring of explicit pair lists
  * run_hybrid_slots-- budgeted loop: hypothesis slot -> mapped-area feature
                       selection -> scoring, with duplicate-pair retries
  * verify_candidates -- transform construction + third-point check used by
                       hypothesis generation
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

_INF = float("inf")


class Quadtree:
    """Point quadtree over a square region with nearest-point queries.

    Points are stored in leaf singly-linked lists (most recent first).
    Leaves split at ``leaf_cap`` points until ``max_depth``. Points may be
    moved after insertion; the index is patched in place.
    """

    def __init__(self, cx, cy, half, leaf_cap=16, max_depth=12):
        self.leaf_cap = int(leaf_cap)
        self.max_depth = int(max_depth)
        # node storage (parallel lists); node 0 is the root
        self.ncx = [float(cx)]
        self.ncy = [float(cy)]
        self.nhalf = [float(half)]
        self.ndepth = [0]
        self.nleaf = [True]
        self.nfirst = [-1]
        self.ncount = [0]
        self.nchild = [[-1, -1, -1, -1]]
        # point storage
        self.px = []
        self.py = []
        self.pnext = []
        self.pleaf = []

    @property
    def n_points(self):
        return len(self.px)

    @property
    def extent(self):
        return (self.ncx[0], self.ncy[0], self.nhalf[0])

    def contains(self, x, y):
        return (
            abs(x - self.ncx[0]) <= self.nhalf[0]
            and abs(y - self.ncy[0]) <= self.nhalf[0]
        )

    def point(self, i):
        return (self.px[i], self.py[i])

    def insert(self, x, y):
        i = len(self.px)
        self.px.append(float(x))
        self.py.append(float(y))
        self.pnext.append(-1)
        self.pleaf.append(-1)
        self._place(i)
        return i

    def move(self, i, x, y):
        n = self.pleaf[i]
        # unlink from the current leaf list
        j = self.nfirst[n]
        if j == i:
            self.nfirst[n] = self.pnext[i]
        else:
            while self.pnext[j] != i:
                j = self.pnext[j]
            self.pnext[j] = self.pnext[i]
        self.ncount[n] -= 1
        self.px[i] = float(x)
        self.py[i] = float(y)
        self._place(i)

    def _place(self, i):
        x = self.px[i]
        y = self.py[i]
        n = 0
        while not self.nleaf[n]:
            q = (1 if x >= self.ncx[n] else 0) + (2 if y >= self.ncy[n] else 0)
            n = self.nchild[n][q]
        self.pnext[i] = self.nfirst[n]
        self.nfirst[n] = i
        self.pleaf[i] = n
        self.ncount[n] += 1
        if self.ncount[n] > self.leaf_cap and self.ndepth[n] < self.max_depth:
            self._split(n)

    def _split(self, n):
        h = self.nhalf[n] * 0.5
        cx = self.ncx[n]
        cy = self.ncy[n]
        depth = self.ndepth[n] + 1
        children = self.nchild[n]
        for q in range(4):
            children[q] = len(self.ncx)
            self.ncx.append(cx + (h if q & 1 else -h))
            self.ncy.append(cy + (h if q & 2 else -h))
            self.nhalf.append(h)
            self.ndepth.append(depth)
            self.nleaf.append(True)
            self.nfirst.append(-1)
            self.ncount.append(0)
            self.nchild.append([-1, -1, -1, -1])
        self.nleaf[n] = False
        j = self.nfirst[n]
        self.nfirst[n] = -1
        self.ncount[n] = 0
        while j != -1:
            nxt = self.pnext[j]
            q = (1 if self.px[j] >= cx else 0) + (2 if self.py[j] >= cy else 0)
            c = children[q]
            self.pnext[j] = self.nfirst[c]
            self.nfirst[c] = j
            self.pleaf[j] = c
            self.ncount[c] += 1
            j = nxt
        for q in range(4):
            c = children[q]
            if self.ncount[c] > self.leaf_cap and depth < self.max_depth:
                self._split(c)

    def nearest(self, x, y):
        """(point index, squared distance); (-1, inf) on an empty tree."""
        if not self.px:
            return -1, _INF
        best = self._search(0, float(x), float(y), -1, _INF)
        return best

    def _search(self, n, x, y, bi, bd2):
        if self.nleaf[n]:
            j = self.nfirst[n]
            px = self.px
            py = self.py
            pnext = self.pnext
            while j != -1:
                dx = px[j] - x
                dy = py[j] - y
                d2 = dx * dx + dy * dy
                if d2 < bd2:
                    bd2 = d2
                    bi = j
                j = pnext[j]
            return bi, bd2
        qfirst = (1 if x >= self.ncx[n] else 0) + (2 if y >= self.ncy[n] else 0)
        children = self.nchild[n]
        c = children[qfirst]
        if self._box_d2(c, x, y) < bd2:
            bi, bd2 = self._search(c, x, y, bi, bd2)
        for q in range(4):
            if q == qfirst:
                continue
            c = children[q]
            if self._box_d2(c, x, y) < bd2:
                bi, bd2 = self._search(c, x, y, bi, bd2)
        return bi, bd2

    def _box_d2(self, n, x, y):
        dx = abs(x - self.ncx[n]) - self.nhalf[n]
        if dx < 0.0:
            dx = 0.0
        dy = abs(y - self.ncy[n]) - self.nhalf[n]
        if dy < 0.0:
            dy = 0.0
        return dx * dx + dy * dy


class PairMemory:
    """Set of (feature id, hypothesis id) pairs scored at the current
    viewpoint. Cleared when the robot reaches a new viewpoint, so the
    footprint stays bounded by the per-viewpoint budget."""

    def __init__(self):
        self._keys = set()

    def clear(self):
        self._keys.clear()

    def __len__(self):
        return len(self._keys)

    def add(self, feat, hyp):
        self._keys.add((feat << 32) | hyp)

    def contains(self, feat, hyp):
        return ((feat << 32) | hyp) in self._keys


def score_pairs(feat_ids, hyp_ids, ftree, hc, hs, htx, hty, s_arr, q_arr,
                gen, gtree, gate2, memory=None):
    """Score explicit (feature, hypothesis) pairs against the landmark index.

    Increments q (and s on inlier) in place. A pair whose feature belongs
    to the hypothesis's own generating triple (``gen`` rows) is skipped:
    those features match landmarks by construction and carry no evidence.
    When ``memory`` is given, already-recorded pairs are skipped (still
    reported) and fresh pairs are recorded. Returns (scored, inlier) uint8
    arrays.
    """
    n = len(feat_ids)
    scored = np.zeros(n, dtype=np.uint8)
    inlier = np.zeros(n, dtype=np.uint8)
    fpx = ftree.px
    fpy = ftree.py
    for k in range(n):
        f = int(feat_ids[k])
        h = int(hyp_ids[k])
        if f == gen[h, 0] or f == gen[h, 1] or f == gen[h, 2]:
            continue
        if memory is not None:
            if memory.contains(f, h):
                continue
            memory.add(f, h)
        c = hc[h]
        sn = hs[h]
        fx = fpx[f]
        fy = fpy[f]
        gx = c * fx - sn * fy + htx[h]
        gy = sn * fx + c * fy + hty[h]
        li, d2 = gtree.nearest(gx, gy)
        q_arr[h] += 1
        scored[k] = 1
        if li >= 0 and d2 <= gate2:
            s_arr[h] += 1
            inlier[k] = 1
    return scored, inlier


def run_hybrid_slots(slots, uniforms, ftree, gtree, rect, hc, hs, htx, hty,
                     s_arr, q_arr, gen, gate2, radius2, memory, n_retry):
    """Budgeted hybrid loop: for each hypothesis slot, pick a feature by
    sampling a mapped-area location and taking the nearest local feature
    under the hypothesis transform, then score the pair.

    A selection is rejected and resampled (up to ``n_retry`` times) when the
    feature belongs to the hypothesis's own generating triple, when no
    feature lies within ``sqrt(radius2)`` of the sampled location (a far
    feature is not the feature "at" that location; accepting it would let
    one edge feature soak up most of the draws), when the feature's
    transformed position falls outside the mapped region (a useless pair:
    no landmark can be near it), or when the pair was already scored this
    viewpoint. A slot still blocked after the retries consumes budget
    without scoring (feature id -1 in the output). Returns
    (feat_out int64, inlier uint8) arrays.
    """
    n = len(slots)
    x0, y0, x1, y1 = rect
    w = x1 - x0
    hgt = y1 - y0
    feat_out = np.full(n, -1, dtype=np.int64)
    inlier = np.zeros(n, dtype=np.uint8)
    fpx = ftree.px
    fpy = ftree.py
    for k in range(n):
        h = int(slots[k])
        c = hc[h]
        sn = hs[h]
        tx = htx[h]
        ty = hty[h]
        g0 = gen[h, 0]
        g1 = gen[h, 1]
        g2 = gen[h, 2]
        f = -1
        gx = 0.0
        gy = 0.0
        for a in range(n_retry + 1):
            lx = x0 + uniforms[k, a, 0] * w
            ly = y0 + uniforms[k, a, 1] * hgt
            dx = lx - tx
            dy = ly - ty
            qx = c * dx + sn * dy
            qy = c * dy - sn * dx
            fi, fd2 = ftree.nearest(qx, qy)
            if fd2 > radius2:
                continue
            if fi == g0 or fi == g1 or fi == g2:
                continue
            fx = fpx[fi]
            fy = fpy[fi]
            gx = c * fx - sn * fy + tx
            gy = sn * fx + c * fy + ty
            if gx < x0 or gx > x1 or gy < y0 or gy > y1:
                continue
            if not memory.contains(fi, h):
                f = fi
                break
        if f < 0:
            continue
        memory.add(f, h)
        li, d2 = gtree.nearest(gx, gy)
        q_arr[h] += 1
        feat_out[k] = f
        if li >= 0 and d2 <= gate2:
            s_arr[h] += 1
            inlier[k] = 1
    return feat_out, inlier


def verify_candidates(fa, fb, fc, la, lb, gtree, vgate2, max_accept):
    """Build a transform per candidate landmark pair correspondence and keep
    it when the third feature lands within the verification gate of some
    landmark. Stops after ``max_accept`` accepted candidates.

    Returns (n_processed, ok, theta, cos, sin, tx, ty) where the arrays
    cover the first n_processed candidates.
    """
    m = la.shape[0]
    ok = np.zeros(m, dtype=np.uint8)
    theta = np.zeros(m, dtype=np.float64)
    cos_a = np.zeros(m, dtype=np.float64)
    sin_a = np.zeros(m, dtype=np.float64)
    tx_a = np.zeros(m, dtype=np.float64)
    ty_a = np.zeros(m, dtype=np.float64)
    fax, fay = fa
    fbx, fby = fb
    fcx, fcy = fc
    base = math.atan2(fby - fay, fbx - fax)
    accepted = 0
    processed = 0
    two_pi = 2.0 * math.pi
    for k in range(m):
        processed = k + 1
        th = math.atan2(lb[k, 1] - la[k, 1], lb[k, 0] - la[k, 0]) - base
        th = math.fmod(th, two_pi)
        if th <= -math.pi:
            th += two_pi
        elif th > math.pi:
            th -= two_pi
        c = math.cos(th)
        sn = math.sin(th)
        tx = la[k, 0] - (c * fax - sn * fay)
        ty = la[k, 1] - (sn * fax + c * fay)
        gx = c * fcx - sn * fcy + tx
        gy = sn * fcx + c * fcy + ty
        li, d2 = gtree.nearest(gx, gy)
        theta[k] = th
        cos_a[k] = c
        sin_a[k] = sn
        tx_a[k] = tx
        ty_a[k] = ty
        if li >= 0 and d2 <= vgate2:
            ok[k] = 1
            accepted += 1
            if accepted >= max_accept:
                break
    return processed, ok, theta, cos_a, sin_a, tx_a, ty_a
