import math
from collections import Counter

import numpy as np
import pytest

from reloc2d import _kernels
from reloc2d.hypotheses import HypothesisStore
from reloc2d.scheduling import (SchemeState, StepStats, allocate,
                                begin_viewpoint, classify, classify_array,
                                make_state, preemption_weight,
                                run_viewpoint_sweep)
from reloc2d.world import InvalidParams


# --- classification ------------------------------------------------------

def test_classify_paper_cases():
    assert classify(7, 7, 10) == 9     # perfect record tops out
    assert classify(0, 5, 10) == 0
    assert classify(7, 20, 10) == 3    # r = 0.35


def test_classify_boundary_table():
    # r in {0, 0.099, 0.1, 0.35, 0.999, 1} -> groups {0, 0, 1, 3, 9, 9}
    cases = [((0, 5), 0), ((99, 1000), 0), ((1, 10), 1), ((7, 20), 3),
             ((999, 1000), 9), ((7, 7), 9)]
    for (s, q), want in cases:
        assert classify(s, q, 10) == want
    s = np.array([c[0][0] for c in cases], dtype=np.int64)
    q = np.array([c[0][1] for c in cases], dtype=np.int64)
    want = np.array([c[1] for c in cases])
    assert np.array_equal(classify_array(s, q, 10), want)


def test_classify_unscored_goes_to_group_zero():
    assert classify(0, 0, 10) == 0


def test_classify_floor_semantics_on_boundaries():
    for j in range(10):
        assert classify(j, 10, 10) == j


def test_preemption_weight_doubles():
    for i in range(9):
        assert preemption_weight(i + 1, 1) / preemption_weight(i, 1) == 2.0


# --- allocation -----------------------------------------------------------

def oracle_allocate(n, n_budget, m):
    """Independent oracle: alpha from a fine grid instead of bisection."""
    n = np.asarray(n, dtype=np.int64)
    idx = np.flatnonzero(n > 0)
    w = n[idx] * np.exp2(m * idx)
    if n_budget < idx.size:
        total = w.sum()
        exact = w * (n_budget / total)
        base = np.floor(exact).astype(np.int64)
        rem = exact - base
        short = n_budget - int(base.sum())
        order = np.lexsort((idx, -rem))
        base[order[:short]] += 1
        out = np.zeros(n.shape[0], dtype=np.int64)
        out[idx] = base
        return out
    grid = np.linspace(0.0, float(n_budget), 200_001)
    totals = np.ceil(grid[:, None] * w[None, :]).sum(axis=1)
    alpha = grid[np.searchsorted(totals >= n_budget, True)]
    alloc = np.ceil(alpha * w).astype(np.int64)
    excess = int(alloc.sum()) - n_budget
    while excess > 0:
        j = int(np.argmax(alloc))
        cut = min(excess, int(alloc[j]) - 1)
        alloc[j] -= cut
        excess -= cut
    out = np.zeros(n.shape[0], dtype=np.int64)
    out[idx] = alloc
    return out


def test_allocate_single_group_gets_everything():
    n = np.zeros(10, dtype=np.int64)
    n[4] = 17
    alloc = allocate(n, 1000, 1)
    assert alloc[4] == 1000 and alloc.sum() == 1000


def test_allocate_spec_example():
    n = np.zeros(10, dtype=np.int64)
    n[0] = 100
    n[9] = 1
    alloc = allocate(n, 1000, 1)
    assert alloc.sum() == 1000
    assert alloc[9] >= 1
    assert np.array_equal(alloc, oracle_allocate(n, 1000, 1))


def test_allocate_agrees_with_grid_oracle_on_totals():
    # the alpha threshold vector is not unique at ceil staircase boundaries,
    # so methods may differ by a boundary tick; the totals never do
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = rng.integers(0, 50, size=10)
        if n.sum() == 0:
            n[0] = 1
        got = allocate(n, 1000, 1)
        want = oracle_allocate(n, 1000, 1)
        assert int(got.sum()) == int(want.sum()) == 1000
        assert np.array_equal(got > 0, want > 0)


def test_allocate_sum_exact_and_feasible():
    rng = np.random.default_rng(18)
    for _ in range(1000):
        n = rng.integers(0, 2000, size=10)
        if n.sum() == 0:
            n[rng.integers(10)] = 1
        budget = int(rng.integers(1, 3000))
        alloc = allocate(n, budget, 1)
        assert int(alloc.sum()) == budget
        assert (alloc[n == 0] == 0).all()
        if budget >= int((n > 0).sum()):
            assert (alloc[n > 0] >= 1).all()
        again = allocate(n, budget, 1)
        assert np.array_equal(alloc, again)


def test_allocate_diversification_and_intensification_shape():
    # realistic profile: group 0 huge, top group tiny; the two ends get the
    # largest shares
    n = np.array([5000, 60, 25, 12, 8, 5, 3, 2, 1, 6], dtype=np.int64)
    alloc = allocate(n, 1000, 1)
    assert int(np.argmax(alloc)) == 0
    assert int(np.argsort(alloc)[-2]) == 9


def test_allocate_underfull_budget_largest_remainder():
    n = np.ones(10, dtype=np.int64)
    alloc = allocate(n, 4, 1)
    assert int(alloc.sum()) == 4
    # proportional split concentrates the scarce budget on heavy groups
    assert alloc[9] == 2 and alloc[8] == 1 and alloc[7] == 1
    assert (alloc[:7] == 0).all()


def test_allocate_rejects_bad_inputs():
    with pytest.raises(InvalidParams):
        allocate(np.zeros(10, dtype=np.int64), 100, 1)
    with pytest.raises(InvalidParams):
        allocate(np.ones(10, dtype=np.int64), 0, 1)


# --- list bookkeeping ------------------------------------------------------

def test_begin_viewpoint_sizes_and_memory(rng):
    st = make_state("hybrid", _kernels.impl)
    st.memory.add(3, 4)
    begin_viewpoint(st, [0, 1, 2], [10, 11, 12, 13, 14], rng)
    assert sorted(st.S_o) == [0, 1, 2]
    assert sorted(st.S_h) == [10, 11, 12, 13, 14]
    assert len(st.memory) == 0
    begin_viewpoint(st, [3], [], rng)
    assert sorted(st.S_o) == [0, 1, 2, 3]
    assert len(st.S_h) == 5


def test_begin_viewpoint_permutation_uniform(rng):
    counts = Counter()
    n = 1000
    for _ in range(n):
        st = make_state("hybrid", _kernels.impl)
        begin_viewpoint(st, [0, 1, 2, 3, 4], [], rng)
        counts[tuple(st.S_o)] += 1
    assert len(counts) == 120
    expect = n / 120
    sigma = math.sqrt(n * (1 / 120) * (119 / 120))
    for c in counts.values():
        assert abs(c - expect) <= 4 * sigma


# --- order rules -----------------------------------------------------------

class _SceneLM:
    """Minimal feature holder compatible with the sweep executors."""

    def __init__(self, positions, backend):
        self.tree = backend.Quadtree(0.0, 0.0, 64.0)
        for x, y in positions:
            self.tree.insert(x, y)
        self.n_features = len(positions)


class _SceneMap:
    def __init__(self, landmarks, backend):
        from reloc2d.global_map import GlobalMap
        from reloc2d.world import Rect
        self._gm = GlobalMap(np.asarray(landmarks, float),
                             Rect(-50, -50, 50, 50), backend=backend)
        self.backend = backend
        self.tree = self._gm.tree
        self.mapped_region = self._gm.mapped_region


def sweep_scene(scheme, n_feats=3, n_hyps=2, budget=6, viewpoints=1,
                arrivals=None):
    """Run the sweep order rule on a crafted scene; ``arrivals(vp)`` gives
    the number of (features, hypotheses) arriving at later viewpoints.
    Returns the emitted pair sequence per viewpoint."""
    backend = _kernels.impl
    rng = np.random.default_rng(5)
    positions = [(float(i), 0.0) for i in range(n_feats)]
    lm = _SceneLM(positions, backend)
    gmap = _SceneMap([(0.0, 0.0), (20.0, 20.0)], backend)
    store = HypothesisStore()
    for _ in range(n_hyps):
        store.add(0.0, 1.0, 0.0, 0.0, 0.0, 0)
    from reloc2d.relocalizer import SchemeConfig
    cfg = SchemeConfig(scheme=scheme, n_pairs=budget)
    st = make_state(scheme, backend)
    out = []
    new_feats = list(range(n_feats))
    new_hyps = list(range(n_hyps))
    for vp in range(viewpoints):
        if vp > 0:
            nf, nh = (arrivals or (lambda v: (0, 0)))(vp)
            new_feats = []
            for _ in range(nf):
                fid = lm.n_features
                lm.tree.insert(float(fid), 1.0)
                lm.n_features += 1
                new_feats.append(fid)
            new_hyps = [store.add(0.0, 1.0, 0.0, 0.0, 0.0, vp)
                        for _ in range(nh)]
        begin_viewpoint(st, new_feats, new_hyps, rng)
        stats = StepStats(viewpoint=vp)
        run_viewpoint_sweep(st, store, lm, gmap, cfg, stats)
        assert stats.consumed == budget
        out.append(stats.pairs)
    return out, st, store


def contiguous_blocks(seq):
    blocks = []
    for v in seq:
        if not blocks or blocks[-1] != v:
            blocks.append(v)
    return blocks


def test_depth_order_exhausts_features_per_hypothesis():
    (pairs,), st, store = sweep_scene("depth", n_feats=3, n_hyps=2, budget=6)
    feats, hyps, _ = pairs
    assert len(feats) == 6
    # all pairs of the first-swept hypothesis come before any of the second
    blocks = contiguous_blocks(list(hyps))
    assert len(blocks) == 2
    assert sorted(feats[:3]) == sorted(feats[3:])
    assert len(set(zip(feats, hyps))) == 6


def test_breadth_order_exhausts_hypotheses_per_feature():
    (pairs,), st, store = sweep_scene("breadth", n_feats=3, n_hyps=2,
                                      budget=6)
    feats, hyps, _ = pairs
    assert len(feats) == 6
    blocks = contiguous_blocks(list(feats))
    assert len(blocks) == 3
    for i in range(0, 6, 2):
        assert sorted(hyps[i:i + 2]) == [0, 1]


def test_sweep_pair_uniqueness_across_viewpoints():
    def arrivals(vp):
        return (1, 2)

    for scheme in ("depth", "breadth"):
        out, st, store = sweep_scene(scheme, n_feats=4, n_hyps=2, budget=5,
                                     viewpoints=6, arrivals=arrivals)
        seen = set()
        for pairs in out:
            if pairs is None:
                continue
            feats, hyps, _ = pairs
            for f, h in zip(feats, hyps):
                assert (f, h) not in seen
                seen.add((int(f), int(h)))


def test_sweep_orders_satisfy_defining_inequality():
    def arrivals(vp):
        return (1, 1)

    out, _, _ = sweep_scene("depth", n_feats=3, n_hyps=2, budget=7,
                            viewpoints=5, arrivals=arrivals)
    hyp_seq = [h for pairs in out if pairs for h in pairs[1]]
    blocks = contiguous_blocks(hyp_seq)
    assert len(blocks) == len(set(blocks))   # no hypothesis revisited

    out, _, _ = sweep_scene("breadth", n_feats=3, n_hyps=2, budget=7,
                            viewpoints=5, arrivals=arrivals)
    feat_seq = [f for pairs in out if pairs for f in pairs[0]]
    blocks = contiguous_blocks(feat_seq)
    assert len(blocks) == len(set(blocks))   # no feature revisited


def test_breadth_newest_feature_first():
    def arrivals(vp):
        return (1, 0)

    out, _, _ = sweep_scene("breadth", n_feats=2, n_hyps=3, budget=3,
                            viewpoints=3, arrivals=arrivals)
    # viewpoint 1 brings feature 2 (id of third inserted feature); the
    # newest pending feature is swept before the older backlog
    feats_vp1 = list(out[1][0])
    assert feats_vp1[0] == 2


# --- hybrid selection kernel ------------------------------------------------

def test_hybrid_single_pair_contract():
    backend = _kernels.impl
    lm = _SceneLM([(0.0, 0.0)], backend)
    gmap = _SceneMap([(0.0, 0.0)], backend)
    store = HypothesisStore()
    store.add(0.0, 1.0, 0.0, 0.0, 0.0, 0)
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()
    mem = backend.PairMemory()
    uniforms = np.random.default_rng(0).random((1, 8, 2))
    feats, inl = backend.run_hybrid_slots(
        np.array([0], dtype=np.int64), uniforms, lm.tree, gmap.tree,
        gmap.mapped_region, cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v,
        0.35 ** 2, 1e12, mem, 7)
    assert feats[0] == 0
    assert inl[0] == 1
    assert s_v[0] == 1 and q_v[0] == 1
    assert len(mem) == 1


def test_hybrid_selection_matches_linear_scan():
    backend = _kernels.impl
    rng = np.random.default_rng(23)
    positions = rng.uniform(-40, 40, size=(300, 2))
    lm = _SceneLM([tuple(p) for p in positions], backend)
    gmap = _SceneMap(rng.uniform(-40, 40, size=(50, 2)), backend)
    store = HypothesisStore()
    n = 10_000
    for _ in range(n):
        th = rng.uniform(-math.pi, math.pi)
        store.add(th, math.cos(th), math.sin(th), *rng.uniform(-5, 5, 2), 0)
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()
    mem = backend.PairMemory()
    uniforms = rng.random((n, 8, 2))
    slots = np.arange(n, dtype=np.int64)
    feats, _ = backend.run_hybrid_slots(
        slots, uniforms, lm.tree, gmap.tree, gmap.mapped_region, cos_v,
        sin_v, tx_v, ty_v, s_v, q_v, gen_v, 0.35 ** 2, 1e12, mem, 7)
    m = gmap.mapped_region
    for k in range(n):
        u1, u2 = uniforms[k, 0]
        lx = m.x0 + u1 * (m.x1 - m.x0)
        ly = m.y0 + u2 * (m.y1 - m.y0)
        c, sn = cos_v[k], sin_v[k]
        dx, dy = lx - tx_v[k], ly - ty_v[k]
        qx = c * dx + sn * dy
        qy = c * dy - sn * dx
        d = (positions[:, 0] - qx) ** 2 + (positions[:, 1] - qy) ** 2
        want = int(np.argmin(d))
        # first attempt always wins here: fresh memory, unlimited radius,
        # images clamped inside the huge mapped rect
        gx = c * positions[want, 0] - sn * positions[want, 1] + tx_v[k]
        gy = sn * positions[want, 0] + c * positions[want, 1] + ty_v[k]
        if m.x0 <= gx <= m.x1 and m.y0 <= gy <= m.y1:
            assert feats[k] == want


def test_hybrid_skips_generating_triple():
    backend = _kernels.impl
    lm = _SceneLM([(0.0, 0.0)], backend)
    gmap = _SceneMap([(0.0, 0.0)], backend)
    store = HypothesisStore()
    store.add(0.0, 1.0, 0.0, 0.0, 0.0, 0, gen=(0, -1, -1))
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()
    mem = backend.PairMemory()
    uniforms = np.random.default_rng(1).random((4, 8, 2))
    feats, _ = backend.run_hybrid_slots(
        np.zeros(4, dtype=np.int64), uniforms, lm.tree, gmap.tree,
        gmap.mapped_region, cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v,
        0.35 ** 2, 1e12, mem, 7)
    assert (feats == -1).all()
    assert q_v[0] == 0


def test_hybrid_duplicate_pair_consumes_without_scoring():
    backend = _kernels.impl
    lm = _SceneLM([(0.0, 0.0)], backend)
    gmap = _SceneMap([(0.0, 0.0)], backend)
    store = HypothesisStore()
    store.add(0.0, 1.0, 0.0, 0.0, 0.0, 0)
    cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v = store.views()
    mem = backend.PairMemory()
    uniforms = np.random.default_rng(2).random((3, 8, 2))
    feats, _ = backend.run_hybrid_slots(
        np.zeros(3, dtype=np.int64), uniforms, lm.tree, gmap.tree,
        gmap.mapped_region, cos_v, sin_v, tx_v, ty_v, s_v, q_v, gen_v,
        0.35 ** 2, 1e12, mem, 7)
    assert feats[0] == 0
    assert (feats[1:] == -1).all()   # same pair blocked by the memory
    assert q_v[0] == 1
