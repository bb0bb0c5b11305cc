"""Candidate transforms from local features to the landmark map.

Hypotheses are generated from minimal covisible feature sets anchored at a
newly arrived feature, scored as inlier counts against the landmark map,
and ranked by the normalized preference rule r = s / q (inlier fraction of
scoring attempts), which corrects for unequal scoring opportunity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point2, Pose2

_GROW = 1024


@dataclass(frozen=True)
class Hypothesis:
    """Snapshot of one candidate local-to-global transform."""

    id: int
    psi: Pose2
    s: int            # inlier count
    q: int            # scoring count
    born_at: int      # viewpoint index
    retired: bool = False

    @property
    def r(self) -> float:
        return self.s / self.q if self.q > 0 else 0.0


class HypothesisStore:
    """Append-only flat storage. Ids are dense indices and never reused;
    retirement only flags a hypothesis out of group sampling, it never
    deletes. The cos/sin/tx/ty and s/q arrays are shared with the scoring
    kernels, which update s and q in place."""

    def __init__(self):
        self.n = 0
        self._cap = _GROW
        self.theta = np.zeros(self._cap)
        self.cos = np.zeros(self._cap)
        self.sin = np.zeros(self._cap)
        self.tx = np.zeros(self._cap)
        self.ty = np.zeros(self._cap)
        self.s = np.zeros(self._cap, dtype=np.int64)
        self.q = np.zeros(self._cap, dtype=np.int64)
        self.born_at = np.zeros(self._cap, dtype=np.int64)
        self.retired = np.zeros(self._cap, dtype=bool)
        # generating feature triple; a hypothesis maps these onto landmarks
        # by construction, so scoring them would be vacuous support
        self.gen = np.full((self._cap, 3), -1, dtype=np.int64)
        # live set (not retired), kept in id order; incremental so the
        # per-viewpoint cost tracks the live population, not total births
        self.live_ids = np.zeros(self._cap, dtype=np.int64)
        self.n_live = 0
        self._dirty = []   # ids scored since the last retirement check

    def _grow(self, need):
        while self._cap < need:
            self._cap *= 2
        for name in ("theta", "cos", "sin", "tx", "ty", "s", "q",
                     "born_at", "retired", "live_ids"):
            arr = getattr(self, name)
            new = np.zeros(self._cap, dtype=arr.dtype)
            new[: arr.shape[0]] = arr
            setattr(self, name, new)
        new = np.full((self._cap, 3), -1, dtype=np.int64)
        new[: self.gen.shape[0]] = self.gen
        self.gen = new

    def add(self, theta, c, sn, tx, ty, born_at, gen=(-1, -1, -1)) -> int:
        i = self.n
        if i >= self._cap:
            self._grow(i + 1)
        self.theta[i] = theta
        self.cos[i] = c
        self.sin[i] = sn
        self.tx[i] = tx
        self.ty[i] = ty
        self.s[i] = 0
        self.q[i] = 0
        self.born_at[i] = born_at
        self.retired[i] = False
        self.gen[i, 0] = gen[0]
        self.gen[i, 1] = gen[1]
        self.gen[i, 2] = gen[2]
        self.live_ids[self.n_live] = i
        self.n_live += 1
        self.n += 1
        return i

    def live_view(self):
        return self.live_ids[: self.n_live]

    def note_scored(self, ids):
        """Remember which hypotheses were scored, for the next retirement
        sweep."""
        if len(ids):
            self._dirty.append(np.asarray(ids, dtype=np.int64))

    def apply_retirement(self, q_threshold, r_threshold):
        """Freeze hypotheses that crossed the retirement thresholds out of
        the live set. Only ids scored since the last sweep can have crossed,
        so the check cost is bounded by the scoring budget."""
        if not self._dirty:
            return 0
        ids = np.unique(np.concatenate(self._dirty))
        self._dirty.clear()
        s = self.s[ids]
        q = self.q[ids]
        cross = (q >= q_threshold) & (s < r_threshold * q) \
            & ~self.retired[ids]
        newly = ids[cross]
        if newly.size:
            self.retired[newly] = True
            live = self.live_ids[: self.n_live]
            keep = live[~np.isin(live, newly)]
            self.n_live = keep.size
            self.live_ids[: keep.size] = keep
        return int(newly.size)

    def get(self, i) -> Hypothesis:
        return Hypothesis(
            id=i,
            psi=Pose2(self.theta[i], self.tx[i], self.ty[i]),
            s=int(self.s[i]),
            q=int(self.q[i]),
            born_at=int(self.born_at[i]),
            retired=bool(self.retired[i]),
        )

    def views(self):
        """(cos, sin, tx, ty, s, q, gen) array views for the kernels."""
        n = self.n
        return (self.cos[:n], self.sin[:n], self.tx[:n], self.ty[:n],
                self.s[:n], self.q[:n], self.gen[:n])

    @property
    def n_retired(self):
        return int(self.retired[: self.n].sum())


def _argbest(values, q, n):
    """Index of the max value; ties go to larger q, then smaller index."""
    best = values.max()
    tied = np.flatnonzero(values == best)
    if tied.size > 1:
        qm = q[tied].max()
        tied = tied[q[tied] == qm]
    return int(tied[0])


def best_hypothesis(store: HypothesisStore, q_min: int):
    """Preference rule: among hypotheses scored at least q_min times, the
    one with the highest inlier ratio r = s/q; with no such hypothesis yet,
    the highest raw score. Ties break to larger q, then smaller id.
    Returns None when the store is empty."""
    n = store.n
    if n == 0:
        return None
    s = store.s[:n]
    q = store.q[:n]
    mature = q >= max(int(q_min), 1)
    if mature.any():
        idx = np.flatnonzero(mature)
        r = s[idx] / q[idx]
        return store.get(int(idx[_argbest(r, q[idx], idx.size)]))
    return store.get(_argbest(s, q, n))


def score_pair(h: Hypothesis, o: Point2, gmap, gate: float):
    """Reference single-pair scoring: count the attempt, and count an inlier
    when the transformed feature lies within ``gate`` of some landmark.
    Returns (updated hypothesis, inlier flag)."""
    if gate <= 0:
        raise ValueError("gate must be > 0")
    c = math.cos(h.psi.theta)
    sn = math.sin(h.psi.theta)
    gx = c * o[0] - sn * o[1] + h.psi.x
    gy = sn * o[0] + c * o[1] + h.psi.y
    hit = gmap.nearest_landmark(Point2(gx, gy))
    inlier = hit is not None and hit[1] <= gate
    updated = Hypothesis(h.id, h.psi, h.s + (1 if inlier else 0), h.q + 1,
                         h.born_at, h.retired)
    return updated, inlier


def generate_hypotheses(lm, gmap, new_id, cfg, rng, store: HypothesisStore,
                        viewpoint: int):
    """Generate hypotheses anchored at a newly arrived feature.

    Draws a covisible triple containing the anchor, takes its widest pair,
    retrieves landmark pairs of congruent separation, builds the transform
    for each candidate correspondence and keeps it only when the remaining
    feature of the triple verifies against the map. Emits at most
    cfg.h_new hypotheses; retries with fresh triples (cfg.t_retry total)
    while none verified. Returns the new hypothesis ids.
    """
    backend = gmap.backend
    vgate2 = cfg.verify_gate * cfg.verify_gate
    new_ids = []
    for _ in range(cfg.t_retry):
        triple = lm.covisible_triple(new_id, rng)
        if triple is None:
            break
        pts = [lm.feature(f) for f in triple]
        # widest-separated pair fixes the transform; the remaining feature
        # is the verification point
        best_pair = None
        best_d2 = -1.0
        for a in range(3):
            for b in range(a + 1, 3):
                dx = pts[a][0] - pts[b][0]
                dy = pts[a][1] - pts[b][1]
                d2 = dx * dx + dy * dy
                if d2 > best_d2:
                    best_d2 = d2
                    best_pair = (a, b)
        d = math.sqrt(best_d2)
        if d <= cfg.min_pair_sep:
            continue
        a, b = best_pair
        cidx = 3 - a - b
        la, lb = gmap.congruent_pairs(d, cfg.pair_tol,
                                      cfg.max_pair_candidates, rng)
        if la.shape[0] == 0:
            continue
        processed, ok, theta, cos_a, sin_a, tx_a, ty_a = \
            backend.verify_candidates(pts[a], pts[b], pts[cidx], la, lb,
                                      gmap.tree, vgate2, cfg.h_new)
        gen = (triple[a], triple[b], triple[cidx])
        for k in range(processed):
            if ok[k]:
                new_ids.append(store.add(theta[k], cos_a[k], sin_a[k],
                                         tx_a[k], ty_a[k], viewpoint, gen))
        if new_ids:
            break
    return new_ids
