import math

import numpy as np
import pytest

from reloc2d.geometry import IDENTITY, Point2, Pose2, apply, inverse
from reloc2d.local_map import LocalMap
from reloc2d.rng import substream
from reloc2d.world import (Observation, generate_world, quick_params, sense,
                           step_robot, trajectory)

from conftest import make_world


def obs(track_id, rng_, brg):
    return Observation(track_id, rng_, brg)


def test_init_empty():
    lm = LocalMap()
    assert lm.n_features == 0
    assert lm.pose == IDENTITY
    lm.update((0.0, 0.0), [])
    assert lm.n_features == 0 and lm.pose == IDENTITY
    lm2 = LocalMap()
    assert lm2.n_features == lm.n_features and lm2.pose == lm.pose


def test_first_viewpoint_geometry():
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    lm.update((0.0, 0.0), [obs(7, 2.0, 0.0), obs(9, 1.0, math.pi / 2),
                           obs(11, 2.0, math.pi)])
    assert lm.n_features == 3
    assert lm.feature(0) == pytest.approx((2.0, 0.0), abs=1e-12)
    assert lm.feature(1) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert lm.feature(2) == pytest.approx((-2.0, 0.0), abs=1e-12)
    # full covisibility triangle
    assert lm.covis[0] == {1, 2}
    assert lm.covis[1] == {0, 2}
    assert lm.covis[2] == {0, 1}
    assert lm.new_feature_ids == [0, 1, 2]


def test_reobservation_noise_free_stable():
    world = make_world([(3.0, 1.0), (1.0, -2.0), (-2.0, 2.0)])
    rng = substream(0, "sensor")
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    pose = IDENTITY
    lm.update((0.0, 0.0), sense(world, pose, rng))
    first = lm.positions().copy()
    pose2, odo = step_robot(pose, (0.5, 0.1), rng, 0.0)
    lm.update(odo, sense(world, pose2, rng))
    assert np.allclose(lm.positions(), first, atol=1e-9)


def test_noise_free_features_match_truth():
    # with exact measurements every feature equals the landmark position in
    # the start frame
    world = make_world([(4.0, 2.0), (-3.0, 1.0), (2.0, -4.0), (6.0, 6.0)])
    rng = substream(1, "sensor")
    start = Pose2(0.4, 1.0, -2.0)
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    pose = start
    lm.update((0.0, 0.0), sense(world, pose, rng))
    for cmd in [(0.5, 0.0)] * 6 + [(0.0, 0.3), (0.5, 0.0)]:
        pose, odo = step_robot(pose, cmd, rng, 0.0)
        lm.update(odo, sense(world, pose, rng))
    to_local = inverse(start)
    for tid, fid in lm._track_to_fid.items():
        want = apply(to_local, Point2(*world.true[tid]))
        got = lm.feature(fid)
        assert math.hypot(got[0] - want[0], got[1] - want[1]) < 1e-9


def test_feature_count_monotone_and_covis_symmetric():
    world = generate_world(3, quick_params())
    sensor = substream(3, "sensor")
    odom = substream(3, "odometry")
    lm = LocalMap()
    pose = Pose2(0.0, 0.0, -25.0)
    prev = 0
    lm.update((0.0, 0.0), sense(world, pose, sensor))
    for cmd in trajectory(world.params)[:60]:
        pose, odo = step_robot(pose, cmd, odom, 0.01)
        lm.update(odo, sense(world, pose, sensor))
        assert lm.n_features >= prev
        prev = lm.n_features
    for a in range(lm.n_features):
        for b in lm.covis[a]:
            assert a in lm.covis[b]
    assert prev > 20


def test_long_run_feature_error_after_alignment():
    # oracle: optimal rigid alignment over known correspondences; the mean
    # residual bounds the local map's internal consistency
    params = quick_params()
    world = generate_world(4, params)
    sensor = substream(4, "sensor")
    odom = substream(4, "odometry")
    lm = LocalMap(range_sigma=params.range_sigma,
                  bearing_sigma=params.bearing_sigma)
    pose = Pose2(0.0, params.start.x, params.start.y)
    lm.update((0.0, 0.0), sense(world, pose, sensor))
    for cmd in trajectory(params)[:200]:
        pose, odo = step_robot(pose, cmd, odom, params.odom_sigma_frac)
        lm.update(odo, sense(world, pose, sensor))
    est = []
    true = []
    for tid, fid in lm._track_to_fid.items():
        est.append(lm.feature(fid))
        true.append(world.true[tid])
    est = np.asarray(est)
    true = np.asarray(true)
    # least-squares rigid alignment (Kabsch/Umeyama without scale)
    me, mt = est.mean(axis=0), true.mean(axis=0)
    h = (est - me).T @ (true - mt)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, d]) @ u.T
    aligned = (est - me) @ rot.T + mt
    err = np.hypot(*(aligned - true).T)
    assert est.shape[0] > 100
    assert float(err.mean()) < 0.2


def test_covisible_triple_unique_and_missing(rng):
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    lm.update((0.0, 0.0), [obs(0, 1.0, 0.0), obs(1, 2.0, 1.0),
                           obs(2, 3.0, 2.0)])
    lm.update((0.0, 0.0), [obs(5, 4.0, -1.0)])
    triple = lm.covisible_triple(0, rng)
    assert triple[0] == 0 and set(triple[1:]) == {1, 2}
    assert lm.covisible_triple(3, rng) is None


def test_covisible_triple_uniform(rng):
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    many = [obs(i, 1.0 + 0.2 * i, 0.1 * i) for i in range(11)]
    lm.update((0.0, 0.0), many)
    counts = np.zeros(11)
    n = 1000
    for _ in range(n):
        t = lm.covisible_triple(0, rng)
        counts[t[1]] += 1
        counts[t[2]] += 1
    # each partner appears with probability 2/10 per draw
    expect = n * 0.2
    sigma = math.sqrt(n * 0.2 * 0.8)
    assert np.all(np.abs(counts[1:] - expect) <= 3 * sigma)
    assert counts[0] == 0


def test_feature_index_matches_scan():
    world = generate_world(6, quick_params())
    sensor = substream(6, "sensor")
    odom = substream(6, "odometry")
    lm = LocalMap()
    pose = Pose2(0.0, 0.0, -25.0)
    lm.update((0.0, 0.0), sense(world, pose, sensor))
    rng = np.random.default_rng(0)
    for cmd in trajectory(world.params)[:40]:
        pose, odo = step_robot(pose, cmd, odom, 0.01)
        lm.update(odo, sense(world, pose, sensor))
        qx, qy = rng.uniform(-30, 30, 2)
        i, d2 = lm.tree.nearest(qx, qy)
        pos = lm.positions()
        d = (pos[:, 0] - qx) ** 2 + (pos[:, 1] - qy) ** 2
        assert i == int(np.argmin(d))
        assert d2 == d[i]


def test_new_feature_ids_reset_each_update():
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    lm.update((0.0, 0.0), [obs(0, 1.0, 0.0)])
    assert lm.new_feature_ids == [0]
    lm.update((0.0, 0.0), [obs(0, 1.0, 0.0)])
    assert lm.new_feature_ids == []


def test_tree_rebuild_on_far_feature():
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0, tree_half=4.0)
    lm.update((0.0, 0.0), [obs(0, 1.0, 0.0)])
    lm.update((0.0, 0.0), [obs(1, 9.0, 0.0)])   # outside the 4 m root box
    i, d2 = lm.tree.nearest(9.1, 0.0)
    assert i == 1
    assert lm.tree.n_points == 2


def test_dump_features(tmp_path):
    lm = LocalMap(range_sigma=0.0, bearing_sigma=0.0)
    lm.update((0.0, 0.0), [obs(0, 1.0, 0.0), obs(1, 2.0, 0.5)])
    path = tmp_path / "features.txt"
    lm.dump_features(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "reloc2d-features v1"
    assert lines[1] == "features 2"
    assert len(lines) == 4
