"""Scoring-order rules and per-viewpoint budget bookkeeping.

Three order rules share one contract: exactly ``n_pairs`` budget units are
consumed per viewpoint whenever at least one hypothesis and one feature
exist. ``depth`` exhausts features per hypothesis, ``breadth`` exhausts
hypotheses per feature (newest feature first), and ``hybrid`` splits the
budget across preference groups weighted by 2^(m * group), choosing each
scored feature by sampling a mapped-area location and taking the nearest
local feature under the hypothesis transform.

Bookkeeping shared by all rules: lists of not-yet-scored features (S_o) and
hypotheses (S_h), permuted every viewpoint and drained as members get their
first score, plus a per-viewpoint memory of scored pairs so the hybrid rule
avoids duplicates without unbounded storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .world import InvalidParams

SCHEMES = ("depth", "breadth", "hybrid")


@dataclass
class StepStats:
    """Per-viewpoint instrumentation."""

    viewpoint: int = 0
    consumed: int = 0            # budget units used (== n_pairs when active)
    scored: int = 0              # pairs actually scored (skips excluded)
    inliers: int = 0
    primed: int = 0
    new_features: int = 0
    new_hypotheses: int = 0
    memory_peak: int = 0
    group_sizes: np.ndarray | None = None
    group_alloc: np.ndarray | None = None
    pairs: tuple | None = None   # (feat_ids, hyp_ids, inlier) of scored pairs


def _empty_ids():
    return np.empty(0, dtype=np.int64)


@dataclass
class SchemeState:
    """Single-owner per trial; all calls strictly sequential. The unscored
    id lists are numpy arrays so the per-viewpoint permute/drain work stays
    cheap as they grow."""

    scheme: str
    memory: object                      # backend PairMemory
    S_o: np.ndarray = field(default_factory=_empty_ids)
    S_h: np.ndarray = field(default_factory=_empty_ids)
    f_order: list = field(default_factory=list)   # arrival order, permuted per batch
    h_order: list = field(default_factory=list)
    depth_h: int = 0                    # cursor into h_order
    depth_f: int = 0                    # cursor into f_order for current hyp
    breadth_pending: list = field(default_factory=list)  # stack, newest on top
    breadth_cur: int = -1               # current feature id (-1: none)
    breadth_h: int = 0                  # cursor into h_order for current feature


def make_state(scheme, backend) -> SchemeState:
    if scheme not in SCHEMES:
        raise InvalidParams(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return SchemeState(scheme=scheme, memory=backend.PairMemory())


def begin_viewpoint(state: SchemeState, new_features, new_hypotheses, rng):
    """Fold the viewpoint's arrivals into the bookkeeping: extend and
    permute the unscored lists, append the arrivals to the sweep orders
    (each batch in a random order), and clear the pair memory."""
    state.S_o = _extend_permuted(state.S_o, new_features, rng)
    state.S_h = _extend_permuted(state.S_h, new_hypotheses, rng)
    fo = list(new_features)
    _permute(fo, rng)
    state.f_order.extend(fo)
    ho = list(new_hypotheses)
    _permute(ho, rng)
    state.h_order.extend(ho)
    if state.scheme == "breadth":
        state.breadth_pending.extend(fo)
    state.memory.clear()
    return state


def _extend_permuted(ids, new, rng):
    if len(new):
        ids = np.concatenate([ids, np.asarray(new, dtype=np.int64)])
    if ids.size > 1:
        ids = ids[rng.permutation(ids.size)]
    return ids


def _permute(items, rng):
    if len(items) > 1:
        order = rng.permutation(len(items))
        items[:] = [items[i] for i in order]


def classify(s: int, q: int, k_groups: int) -> int:
    """Preference group of a hypothesis: floor(k * s / q), with a perfect
    record capped into the top group and unscored hypotheses in group 0."""
    if k_groups < 1:
        raise InvalidParams("k_groups must be >= 1")
    if q <= 0:
        return 0
    g = (k_groups * s) // q
    return int(min(g, k_groups - 1))


def classify_array(s, q, k_groups):
    g = np.zeros(s.shape[0], dtype=np.int64)
    pos = q > 0
    g[pos] = np.minimum((k_groups * s[pos]) // q[pos], k_groups - 1)
    return g


def allocate(n, n_budget: int, m: int = 1):
    """Split a scoring budget across preference groups.

    Each group i gets ceil(alpha * n(i) * 2^(m*i)) draws, with alpha found
    by bisection so the total meets the budget exactly; ceiling overshoot
    is trimmed from the largest allocations while every nonempty group
    keeps at least one draw. When the budget cannot cover one draw per
    nonempty group, falls back to a largest-remainder split proportional
    to n(i) * 2^(m*i). Deterministic.
    """
    n = np.asarray(n, dtype=np.int64)
    n_budget = int(n_budget)
    if n_budget < 1:
        raise InvalidParams("allocation budget must be >= 1")
    if n.sum() < 1:
        raise InvalidParams("allocate requires at least one hypothesis")
    k = n.shape[0]
    weights = n.astype(np.float64) * np.exp2(m * np.arange(k))
    nonempty = n > 0
    n_nonempty = int(nonempty.sum())
    out = np.zeros(k, dtype=np.int64)

    if n_budget < n_nonempty:
        # largest-remainder apportionment on the weights
        w = weights.copy()
        total = w.sum()
        exact = w * (n_budget / total)
        base = np.floor(exact).astype(np.int64)
        rem = exact - base
        short = n_budget - int(base.sum())
        if short > 0:
            order = np.lexsort((np.arange(k), -rem))
            base[order[:short]] += 1
        return base

    lo, hi = 0.0, float(n_budget)
    idx = np.flatnonzero(nonempty)
    w = weights[idx]

    def total(alpha):
        return int(np.ceil(alpha * w).sum())

    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if total(mid) >= n_budget:
            hi = mid
        else:
            lo = mid
    alloc = np.ceil(hi * w).astype(np.int64)
    excess = int(alloc.sum()) - n_budget
    while excess > 0:
        # trim the ceiling overshoot from the largest allocation; cannot
        # stall because budget >= #nonempty keeps sum(alloc - 1) >= excess
        j = int(np.argmax(alloc))
        cut = min(excess, int(alloc[j]) - 1)
        alloc[j] -= cut
        excess -= cut
    out[idx] = alloc
    return out


def preemption_weight(i: int, m: int = 1) -> float:
    """Group weight 2^(m*i): each level up roughly doubles the chance of
    being scored."""
    return float(2.0 ** (m * i))


# --- per-viewpoint execution -------------------------------------------


def _eliminate(state, feat_ids, hyp_ids):
    if state.S_o.size and len(feat_ids):
        state.S_o = state.S_o[~np.isin(state.S_o, feat_ids)]
    if state.S_h.size and len(hyp_ids):
        state.S_h = state.S_h[~np.isin(state.S_h, hyp_ids)]


def run_viewpoint_hybrid(state, store, lm, gmap, cfg, rng, best_id,
                         new_hyp_ids, stats: StepStats):
    """Hybrid order rule for one viewpoint.

    Phase 1 (priming, capped at beta * n_pairs): every not-yet-scored
    hypothesis gets one pair with a mapped-area-selected feature, then every
    not-yet-scored feature gets one pair with the current best hypothesis,
    so both lists drain and fresh hypotheses enter a meaningful group.
    This viewpoint's arrivals go first; backlog fills the leftover slots.
    Phase 2: classify all live hypotheses, allocate the remaining budget
    across groups, and run the shuffled draw schedule.
    """
    backend = gmap.backend
    budget = cfg.n_pairs
    gate2 = cfg.inlier_gate * cfg.inlier_gate
    radius2 = cfg.select_radius * cfg.select_radius
    rect = gmap.mapped_region
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()

    consumed = 0
    prime_cap = int(cfg.beta_prime * budget)
    rec_f = []
    rec_h = []
    rec_i = []

    # phase 1a: unscored hypotheses in the permuted list order, fresh first
    if len(new_hyp_ids) and state.S_h.size:
        is_fresh = np.isin(state.S_h, np.asarray(new_hyp_ids, dtype=np.int64))
        ordered = np.concatenate([state.S_h[is_fresh], state.S_h[~is_fresh]])
    else:
        ordered = state.S_h
    slots = ordered[:prime_cap]
    if slots.size:
        uniforms = rng.random((slots.size, cfg.pair_retry + 1, 2))
        feats, inl = backend.run_hybrid_slots(
            slots, uniforms, lm.tree, gmap.tree, rect, cos_v, sin_v, tx_v,
            ty_v, s_v, q_v, gen_v, gate2, radius2, state.memory,
            cfg.pair_retry)
        consumed += slots.size
        done = feats >= 0
        stats.scored += int(done.sum())
        stats.inliers += int(inl.sum())
        _eliminate(state, feats[done], slots[done])
        rec_f.append(feats[done])
        rec_h.append(slots[done])
        rec_i.append(inl[done])

    # phase 1b: unscored features against the current best hypothesis
    room = prime_cap - consumed
    if room > 0 and best_id is not None and state.S_o.size:
        feats = state.S_o[:room]
        hyps = np.full(feats.size, best_id, dtype=np.int64)
        scored, inl = backend.score_pairs(
            feats, hyps, lm.tree, cos_v, sin_v, tx_v, ty_v, s_v, q_v,
            gen_v, gmap.tree, gate2, state.memory)
        consumed += feats.size
        done = scored.astype(bool)
        stats.scored += int(done.sum())
        stats.inliers += int(inl.sum())
        _eliminate(state, feats[done], hyps[done])
        rec_f.append(feats[done])
        rec_h.append(hyps[done])
        rec_i.append(inl[done])
    stats.primed = consumed

    # phase 2: grouped allocation over live hypotheses
    remaining = budget - consumed
    if remaining > 0:
        if cfg.retire_enabled:
            for part in rec_h:
                store.note_scored(part)
            store.apply_retirement(cfg.retire_q, cfg.retire_r)
        live = store.live_view()
        if live.size == 0:
            live = np.arange(store.n)  # never let retirement empty the pool
        groups = classify_array(s_v[live], q_v[live], cfg.k_groups)
        sizes = np.bincount(groups, minlength=cfg.k_groups)
        alloc = allocate(sizes, remaining, cfg.m_exponent)
        parts = []
        for g in range(cfg.k_groups):
            if alloc[g] == 0:
                continue
            members = live[groups == g]
            draws = members[rng.integers(0, members.size, size=int(alloc[g]))]
            parts.append(draws)
        schedule = np.concatenate(parts)
        rng.shuffle(schedule)
        uniforms = rng.random((schedule.size, cfg.pair_retry + 1, 2))
        feats, inl = backend.run_hybrid_slots(
            schedule, uniforms, lm.tree, gmap.tree, rect, cos_v, sin_v,
            tx_v, ty_v, s_v, q_v, gen_v, gate2, radius2, state.memory,
            cfg.pair_retry)
        consumed += schedule.size
        done = feats >= 0
        stats.scored += int(done.sum())
        stats.inliers += int(inl.sum())
        _eliminate(state, feats[done], schedule[done])
        if cfg.retire_enabled:
            store.note_scored(schedule[done])
        rec_f.append(feats[done])
        rec_h.append(schedule[done])
        rec_i.append(inl[done])
        stats.group_sizes = sizes
        stats.group_alloc = alloc

    if rec_f:
        stats.pairs = (np.concatenate(rec_f), np.concatenate(rec_h),
                       np.concatenate(rec_i))
    stats.consumed = consumed
    stats.memory_peak = len(state.memory)
    return stats


def _sweep_pairs_depth(state, budget):
    """Contiguous (feature, hypothesis) runs for the depth rule: the current
    hypothesis sweeps every arrived feature, then the cursor moves on and
    never returns, so no pair is ever scored twice. Advancing is lazy: a
    hypothesis that ran out of features keeps folding in new arrivals until
    the next pair is actually requested."""
    feats = []
    hyps = []
    left = budget
    nf = len(state.f_order)
    while left > 0 and state.depth_h < len(state.h_order):
        if state.depth_f >= nf:
            state.depth_h += 1
            state.depth_f = 0
            continue
        take = min(left, nf - state.depth_f)
        feats.append(state.f_order[state.depth_f:state.depth_f + take])
        hyps.append(np.full(take, state.h_order[state.depth_h],
                            dtype=np.int64))
        state.depth_f += take
        left -= take
    return feats, hyps


def _sweep_pairs_breadth(state, budget):
    """Contiguous runs for the breadth rule: the current feature sweeps
    every arrived hypothesis (folding in new ones) before the next pending
    feature -- newest first -- takes over."""
    feats = []
    hyps = []
    left = budget
    nh = len(state.h_order)
    while left > 0:
        if state.breadth_cur >= 0 and state.breadth_h < nh:
            take = min(left, nh - state.breadth_h)
            hyps.append(state.h_order[state.breadth_h:state.breadth_h + take])
            feats.append(np.full(take, state.breadth_cur, dtype=np.int64))
            state.breadth_h += take
            left -= take
            continue
        if not state.breadth_pending or nh == 0:
            break
        state.breadth_cur = state.breadth_pending.pop()
        state.breadth_h = 0
    return feats, hyps


def run_viewpoint_sweep(state, store, lm, gmap, cfg, stats: StepStats):
    """Depth or breadth order rule for one viewpoint. Cursor sweeps resume
    across viewpoints and fold in new arrivals; when every pair is already
    swept the leftover budget is consumed without scoring."""
    backend = gmap.backend
    budget = cfg.n_pairs
    gate2 = cfg.inlier_gate * cfg.inlier_gate
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()

    if state.scheme == "depth":
        feats, hyps = _sweep_pairs_depth(state, budget)
    else:
        feats, hyps = _sweep_pairs_breadth(state, budget)
    if feats:
        feat_ids = np.concatenate([np.asarray(f, dtype=np.int64) for f in feats])
        hyp_ids = np.concatenate([np.asarray(h, dtype=np.int64) for h in hyps])
        scored, inl = backend.score_pairs(
            feat_ids, hyp_ids, lm.tree, cos_v, sin_v, tx_v, ty_v, s_v, q_v,
            gen_v, gmap.tree, gate2, None)
        stats.scored += int(scored.sum())
        stats.inliers += int(inl.sum())
        _eliminate(state, feat_ids, hyp_ids)
        stats.pairs = (feat_ids, hyp_ids, inl)
    stats.consumed = budget
    return stats
