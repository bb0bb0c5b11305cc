import math

import numpy as np
import pytest

from reloc2d.geometry import IDENTITY, Pose2
from reloc2d.rng import substream
from reloc2d.world import (InvalidParams, Rect, WorldParams, generate_world,
                           load_world, quick_params, save_world, sense,
                           step_robot, trajectory)

from conftest import make_world


def test_default_parameters_match_protocol():
    p = WorldParams()
    assert p.bounds == Rect(-400.0, -100.0, 400.0, 100.0)
    assert p.n_landmarks == 20000
    assert p.mapped == Rect(-400.0, -20.0, 400.0, 20.0)
    assert p.sensor_range == 10.0
    assert p.range_sigma == 0.01
    assert p.bearing_sigma_deg == 0.5
    assert p.odom_sigma_frac == 0.01
    assert p.step_length == 0.5


def test_generate_world_inside_bounds_and_deterministic():
    w1 = generate_world(42, quick_params(change_ratio=0.3))
    w2 = generate_world(42, quick_params(change_ratio=0.3))
    assert np.array_equal(w1.prior, w2.prior)
    assert np.array_equal(w1.true, w2.true)
    b = w1.bounds
    assert (w1.prior[:, 0] >= b.x0).all() and (w1.prior[:, 0] <= b.x1).all()
    assert (w1.prior[:, 1] >= b.y0).all() and (w1.prior[:, 1] <= b.y1).all()


def test_zero_change_ratio_keeps_landmarks():
    w = generate_world(3, quick_params(change_ratio=0.0))
    assert np.array_equal(w.prior, w.true)
    assert not w.moved.any()


def test_change_ratio_binomial_bound():
    # 3 sigma of binomial(20000, 0.5) is about 212
    w = generate_world(5, WorldParams(change_ratio=0.5))
    moved = int(w.moved.sum())
    assert abs(moved - 10000) <= 212


def test_churn_keeps_ids_and_prior():
    w = generate_world(6, quick_params(change_ratio=0.5))
    moved = np.flatnonzero(w.moved)
    assert moved.size > 0
    assert not np.array_equal(w.prior[moved], w.true[moved])
    still = np.flatnonzero(~w.moved)
    assert np.array_equal(w.prior[still], w.true[still])


def test_invalid_params_rejected():
    with pytest.raises(InvalidParams):
        WorldParams(width=-1).validate()
    with pytest.raises(InvalidParams):
        WorldParams(n_landmarks=-5).validate()
    with pytest.raises(InvalidParams):
        WorldParams(change_ratio=1.5).validate()
    with pytest.raises(InvalidParams):
        WorldParams(mapped=Rect(-500, -20, 400, 20)).validate()


def test_sense_noise_free_geometry(rng):
    world = make_world([(10.0, 0.0), (0.0, 3.0), (30.0, 30.0)], width=100,
                       height=100)
    obs = sense(world, IDENTITY, rng)
    assert [o.track_id for o in obs] == [0, 1]
    assert obs[0].range == pytest.approx(10.0, abs=1e-12)
    assert obs[0].bearing == pytest.approx(0.0, abs=1e-12)
    assert obs[1].range == pytest.approx(3.0, abs=1e-12)
    assert obs[1].bearing == pytest.approx(math.pi / 2, abs=1e-12)


def test_sense_empty_when_out_of_range(rng):
    world = make_world([(50.0, 50.0)], width=200, height=200)
    assert sense(world, IDENTITY, rng) == []


def test_sense_range_noise_sigma():
    world = make_world([(5.0, 0.0)], noise=True, range_sigma=0.01,
                       bearing_sigma_deg=0.5)
    rng = substream(99, "sensor")
    ranges = [sense(world, IDENTITY, rng)[0].range for _ in range(10_000)]
    sd = float(np.std(ranges))
    assert abs(sd - 0.01) < 0.001


def test_sense_visibility_contract():
    rng = substream(4, "sensor")
    world = generate_world(4, quick_params())
    pose = Pose2(0.3, 2.0, -20.0)
    obs = sense(world, pose, rng)
    d = np.hypot(world.true[:, 0] - pose.x, world.true[:, 1] - pose.y)
    p = world.params
    within = set(np.flatnonzero(d <= p.sensor_range - 5 * p.range_sigma))
    got = {o.track_id for o in obs}
    assert within <= got
    for o in obs:
        assert d[o.track_id] <= p.sensor_range
        assert o.range <= p.sensor_range


def test_step_robot_exact_and_noise():
    rng = substream(11, "odometry")
    pose, odo = step_robot(IDENTITY, (0.5, 0.0), rng, odom_sigma_frac=0.0)
    assert pose.x == pytest.approx(0.5) and pose.y == 0.0
    assert odo == (0.5, 0.0)
    pose2, odo2 = step_robot(pose, (0.0, 0.0), rng, odom_sigma_frac=0.01)
    assert pose2 == pose
    assert odo2 == (0.0, 0.0)


def test_step_robot_noise_sigma():
    rng = substream(12, "odometry")
    vals = [step_robot(IDENTITY, (0.5, 0.0), rng, 0.01)[1].d_trans
            for _ in range(10_000)]
    sd = float(np.std(vals))
    assert abs(sd - 0.005) < 0.0005


def test_trajectory_default():
    cmds = trajectory(WorldParams())
    assert cmds[0][0] == 0.0 and cmds[0][1] == pytest.approx(math.pi / 2)
    assert len(cmds) == 401
    assert all(c == (0.5, 0.0) for c in cmds[1:])
    assert sum(c[0] for c in cmds) == pytest.approx(200.0)


def test_trajectory_empty_when_start_is_goal():
    from reloc2d.geometry import Point2
    p = quick_params(start=Point2(0.0, 0.0), goal=Point2(0.0, 0.0))
    assert trajectory(p) == []


def test_world_text_round_trip(tmp_path):
    w = generate_world(21, quick_params(change_ratio=0.4))
    path = tmp_path / "world.txt"
    save_world(w, path)
    back = load_world(path, quick_params())
    assert back.seed == w.seed
    assert np.array_equal(back.prior, w.prior)
    assert np.array_equal(back.true, w.true)
    assert back.params.mapped == w.params.mapped
    assert back.params.change_ratio == w.params.change_ratio


def test_measurement_streams_independent_of_scheme():
    # named substreams: drawing from one consumer does not shift another
    a = substream(5, "sensor")
    b = substream(5, "odometry")
    b.random(1000)
    a2 = substream(5, "sensor")
    assert np.array_equal(a.random(8), a2.random(8))
