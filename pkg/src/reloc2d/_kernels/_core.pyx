# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled kernels: quadtree index, pair memory, batched pair scoring,
the budgeted hybrid selection loop, and candidate verification.

Mirrors ``_pycore`` operation for operation -- same arithmetic expressions,
same traversal order, same tie handling -- so both backends produce
bit-identical results.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, fmod, sin
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

cdef extern from "<math.h>":
    const double INFINITY

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586

BACKEND_NAME = "compiled"


cdef class Quadtree:
    """Point quadtree over a square region with nearest-point queries.

    Points are stored in leaf singly-linked lists (most recent first).
    Leaves split at ``leaf_cap`` points until ``max_depth``. Points may be
    moved after insertion; the index is patched in place.
    """

    cdef int leaf_cap
    cdef int max_depth
    cdef vector[double] ncx
    cdef vector[double] ncy
    cdef vector[double] nhalf
    cdef vector[int] ndepth
    cdef vector[char] nleaf
    cdef vector[int] nfirst
    cdef vector[int] ncount
    cdef vector[int] nchild  # 4 entries per node
    cdef vector[double] px
    cdef vector[double] py
    cdef vector[int] pnext
    cdef vector[int] pleaf

    def __init__(self, cx, cy, half, leaf_cap=16, max_depth=12):
        self.leaf_cap = leaf_cap
        self.max_depth = max_depth
        self.ncx.push_back(cx)
        self.ncy.push_back(cy)
        self.nhalf.push_back(half)
        self.ndepth.push_back(0)
        self.nleaf.push_back(1)
        self.nfirst.push_back(-1)
        self.ncount.push_back(0)
        for q in range(4):
            self.nchild.push_back(-1)

    @property
    def n_points(self):
        return self.px.size()

    @property
    def extent(self):
        return (self.ncx[0], self.ncy[0], self.nhalf[0])

    def contains(self, double x, double y):
        return (fabs(x - self.ncx[0]) <= self.nhalf[0]
                and fabs(y - self.ncy[0]) <= self.nhalf[0])

    def point(self, int i):
        return (self.px[i], self.py[i])

    def insert(self, double x, double y):
        cdef int i = <int>self.px.size()
        self.px.push_back(x)
        self.py.push_back(y)
        self.pnext.push_back(-1)
        self.pleaf.push_back(-1)
        self._place(i)
        return i

    def move(self, int i, double x, double y):
        cdef int n = self.pleaf[i]
        cdef int j = self.nfirst[n]
        if j == i:
            self.nfirst[n] = self.pnext[i]
        else:
            while self.pnext[j] != i:
                j = self.pnext[j]
            self.pnext[j] = self.pnext[i]
        self.ncount[n] -= 1
        self.px[i] = x
        self.py[i] = y
        self._place(i)

    cdef void _place(self, int i):
        cdef double x = self.px[i]
        cdef double y = self.py[i]
        cdef int n = 0
        cdef int q
        while not self.nleaf[n]:
            q = (1 if x >= self.ncx[n] else 0) + (2 if y >= self.ncy[n] else 0)
            n = self.nchild[4 * n + q]
        self.pnext[i] = self.nfirst[n]
        self.nfirst[n] = i
        self.pleaf[i] = n
        self.ncount[n] += 1
        if self.ncount[n] > self.leaf_cap and self.ndepth[n] < self.max_depth:
            self._split(n)

    cdef void _split(self, int n):
        cdef double h = self.nhalf[n] * 0.5
        cdef double cx = self.ncx[n]
        cdef double cy = self.ncy[n]
        cdef int depth = self.ndepth[n] + 1
        cdef int q, c, j, nxt
        for q in range(4):
            c = <int>self.ncx.size()
            self.nchild[4 * n + q] = c
            self.ncx.push_back(cx + (h if q & 1 else -h))
            self.ncy.push_back(cy + (h if q & 2 else -h))
            self.nhalf.push_back(h)
            self.ndepth.push_back(depth)
            self.nleaf.push_back(1)
            self.nfirst.push_back(-1)
            self.ncount.push_back(0)
            for _ in range(4):
                self.nchild.push_back(-1)
        self.nleaf[n] = 0
        j = self.nfirst[n]
        self.nfirst[n] = -1
        self.ncount[n] = 0
        while j != -1:
            nxt = self.pnext[j]
            q = (1 if self.px[j] >= cx else 0) + (2 if self.py[j] >= cy else 0)
            c = self.nchild[4 * n + q]
            self.pnext[j] = self.nfirst[c]
            self.nfirst[c] = j
            self.pleaf[j] = c
            self.ncount[c] += 1
            j = nxt
        for q in range(4):
            c = self.nchild[4 * n + q]
            if self.ncount[c] > self.leaf_cap and depth < self.max_depth:
                self._split(c)

    def nearest(self, double x, double y):
        """(point index, squared distance); (-1, inf) on an empty tree."""
        cdef int bi = -1
        cdef double bd2 = INFINITY
        if self.px.size() == 0:
            return -1, INFINITY
        self._search(0, x, y, &bi, &bd2)
        return bi, bd2

    cdef inline int _nearest_idx(self, double x, double y) noexcept:
        cdef int bi = -1
        cdef double bd2 = INFINITY
        if self.px.size() > 0:
            self._search(0, x, y, &bi, &bd2)
        return bi

    cdef inline double _nearest_d2(self, double x, double y, int* out_i) noexcept:
        cdef int bi = -1
        cdef double bd2 = INFINITY
        if self.px.size() > 0:
            self._search(0, x, y, &bi, &bd2)
        out_i[0] = bi
        return bd2

    cdef void _search(self, int n, double x, double y, int* bi, double* bd2) noexcept:
        cdef int j, q, qfirst, c
        cdef double dx, dy, d2
        if self.nleaf[n]:
            j = self.nfirst[n]
            while j != -1:
                dx = self.px[j] - x
                dy = self.py[j] - y
                d2 = dx * dx + dy * dy
                if d2 < bd2[0]:
                    bd2[0] = d2
                    bi[0] = j
                j = self.pnext[j]
            return
        qfirst = (1 if x >= self.ncx[n] else 0) + (2 if y >= self.ncy[n] else 0)
        c = self.nchild[4 * n + qfirst]
        if self._box_d2(c, x, y) < bd2[0]:
            self._search(c, x, y, bi, bd2)
        for q in range(4):
            if q == qfirst:
                continue
            c = self.nchild[4 * n + q]
            if self._box_d2(c, x, y) < bd2[0]:
                self._search(c, x, y, bi, bd2)

    cdef inline double _box_d2(self, int n, double x, double y) noexcept:
        cdef double dx = fabs(x - self.ncx[n]) - self.nhalf[n]
        if dx < 0.0:
            dx = 0.0
        cdef double dy = fabs(y - self.ncy[n]) - self.nhalf[n]
        if dy < 0.0:
            dy = 0.0
        return dx * dx + dy * dy


cdef class PairMemory:
    """Set of (feature id, hypothesis id) pairs scored at the current
    viewpoint. Cleared when the robot reaches a new viewpoint, so the
    footprint stays bounded by the per-viewpoint budget."""

    cdef unordered_set[long long] keys

    def clear(self):
        self.keys.clear()

    def __len__(self):
        return self.keys.size()

    def add(self, long long feat, long long hyp):
        self.keys.insert((feat << 32) | hyp)

    def contains(self, long long feat, long long hyp):
        return self.keys.count((feat << 32) | hyp) > 0


def score_pairs(feat_ids, hyp_ids, Quadtree ftree, double[::1] hc,
                double[::1] hs, double[::1] htx, double[::1] hty,
                long long[::1] s_arr, long long[::1] q_arr,
                long long[:, ::1] gen, Quadtree gtree, double gate2,
                memory=None):
    """Score explicit (feature, hypothesis) pairs against the landmark index.

    Increments q (and s on inlier) in place. A pair whose feature belongs
    to the hypothesis's own generating triple (``gen`` rows) is skipped:
    those features match landmarks by construction and carry no evidence.
    When ``memory`` is given, already-recorded pairs are skipped (still
    reported) and fresh pairs are recorded. Returns (scored, inlier) uint8
    arrays.
    """
    cdef long long[::1] fv = np.ascontiguousarray(feat_ids, dtype=np.int64)
    cdef long long[::1] hv = np.ascontiguousarray(hyp_ids, dtype=np.int64)
    cdef Py_ssize_t n = fv.shape[0]
    scored_np = np.zeros(n, dtype=np.uint8)
    inlier_np = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] scored = scored_np
    cdef unsigned char[::1] inlier = inlier_np
    cdef PairMemory mem = None
    if memory is not None:
        mem = <PairMemory>memory
    cdef Py_ssize_t k
    cdef long long f, h, key
    cdef double c, sn, fx, fy, gx, gy, d2
    cdef int li
    for k in range(n):
        f = fv[k]
        h = hv[k]
        if f == gen[h, 0] or f == gen[h, 1] or f == gen[h, 2]:
            continue
        if mem is not None:
            key = (f << 32) | h
            if mem.keys.count(key) > 0:
                continue
            mem.keys.insert(key)
        c = hc[h]
        sn = hs[h]
        fx = ftree.px[f]
        fy = ftree.py[f]
        gx = c * fx - sn * fy + htx[h]
        gy = sn * fx + c * fy + hty[h]
        d2 = gtree._nearest_d2(gx, gy, &li)
        q_arr[h] += 1
        scored[k] = 1
        if li >= 0 and d2 <= gate2:
            s_arr[h] += 1
            inlier[k] = 1
    return scored_np, inlier_np


def run_hybrid_slots(slots, double[:, :, ::1] uniforms, Quadtree ftree,
                     Quadtree gtree, rect, double[::1] hc, double[::1] hs,
                     double[::1] htx, double[::1] hty, long long[::1] s_arr,
                     long long[::1] q_arr, long long[:, ::1] gen,
                     double gate2, double radius2, PairMemory memory,
                     int n_retry):
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
    cdef long long[::1] sv = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t n = sv.shape[0]
    cdef double x0 = rect[0]
    cdef double y0 = rect[1]
    cdef double x1 = rect[2]
    cdef double y1 = rect[3]
    cdef double w = x1 - x0
    cdef double hgt = y1 - y0
    feat_np = np.full(n, -1, dtype=np.int64)
    inlier_np = np.zeros(n, dtype=np.uint8)
    cdef long long[::1] feat_out = feat_np
    cdef unsigned char[::1] inlier = inlier_np
    cdef Py_ssize_t k
    cdef int a, fi, li
    cdef long long h, f, key, g0, g1, g2
    cdef double c, sn, tx, ty, lx, ly, dx, dy, qx, qy, fx, fy, gx, gy, d2, fd2
    for k in range(n):
        h = sv[k]
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
            fi = -1
            fd2 = ftree._nearest_d2(qx, qy, &fi)
            if fd2 > radius2:
                continue
            if fi == g0 or fi == g1 or fi == g2:
                continue
            fx = ftree.px[fi]
            fy = ftree.py[fi]
            gx = c * fx - sn * fy + tx
            gy = sn * fx + c * fy + ty
            if gx < x0 or gx > x1 or gy < y0 or gy > y1:
                continue
            key = ((<long long>fi) << 32) | h
            if memory.keys.count(key) == 0:
                f = fi
                break
        if f < 0:
            continue
        memory.keys.insert((f << 32) | h)
        d2 = gtree._nearest_d2(gx, gy, &li)
        q_arr[h] += 1
        feat_out[k] = f
        if li >= 0 and d2 <= gate2:
            s_arr[h] += 1
            inlier[k] = 1
    return feat_np, inlier_np


def verify_candidates(fa, fb, fc, double[:, ::1] la, double[:, ::1] lb,
                      Quadtree gtree, double vgate2, int max_accept):
    """Build a transform per candidate landmark pair correspondence and keep
    it when the third feature lands within the verification gate of some
    landmark. Stops after ``max_accept`` accepted candidates.

    Returns (n_processed, ok, theta, cos, sin, tx, ty) where the arrays
    cover the first n_processed candidates.
    """
    cdef Py_ssize_t m = la.shape[0]
    ok_np = np.zeros(m, dtype=np.uint8)
    theta_np = np.zeros(m, dtype=np.float64)
    cos_np = np.zeros(m, dtype=np.float64)
    sin_np = np.zeros(m, dtype=np.float64)
    tx_np = np.zeros(m, dtype=np.float64)
    ty_np = np.zeros(m, dtype=np.float64)
    cdef unsigned char[::1] ok = ok_np
    cdef double[::1] theta = theta_np
    cdef double[::1] cos_a = cos_np
    cdef double[::1] sin_a = sin_np
    cdef double[::1] tx_a = tx_np
    cdef double[::1] ty_a = ty_np
    cdef double fax = fa[0]
    cdef double fay = fa[1]
    cdef double fbx = fb[0]
    cdef double fby = fb[1]
    cdef double fcx = fc[0]
    cdef double fcy = fc[1]
    cdef double base = atan2(fby - fay, fbx - fax)
    cdef int accepted = 0
    cdef Py_ssize_t processed = 0
    cdef Py_ssize_t k
    cdef int li
    cdef double th, c, sn, tx, ty, gx, gy, d2
    for k in range(m):
        processed = k + 1
        th = atan2(lb[k, 1] - la[k, 1], lb[k, 0] - la[k, 0]) - base
        th = fmod(th, TWO_PI)
        if th <= -PI:
            th += TWO_PI
        elif th > PI:
            th -= TWO_PI
        c = cos(th)
        sn = sin(th)
        tx = la[k, 0] - (c * fax - sn * fay)
        ty = la[k, 1] - (sn * fax + c * fay)
        gx = c * fcx - sn * fcy + tx
        gy = sn * fcx + c * fcy + ty
        d2 = gtree._nearest_d2(gx, gy, &li)
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
    return processed, ok_np, theta_np, cos_np, sin_np, tx_np, ty_np
