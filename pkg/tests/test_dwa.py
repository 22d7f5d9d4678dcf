import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feverbot.nav.dwa import DwaParams, dwa_step, dynamic_window, evaluate, path_target, rollout
from feverbot.nav.grid import OccupancyGrid, clearance_map
from feverbot.world import Pose2D, RobotState, integrate_unicycle

from oracles import dwa_oracle


def corridor(length=6.0, width=2.0, res=0.05, wall_at=None):
    nx, ny = int(round(length / res)), int(round(width / res))
    lo = np.full((ny, nx), -3.5)
    lo[0, :] = lo[-1, :] = 3.5
    if wall_at is not None:
        lo[:, int(wall_at / res)] = 3.5
    return OccupancyGrid(res, nx, ny, (0.0, 0.0), lo, np.ones((ny, nx), dtype=bool))


def straight_path(y=1.0):
    return [Pose2D(x, y, 0.0) for x in np.arange(0.5, 5.5, 0.05)]


def oracle_params(p: DwaParams):
    d = dataclasses.asdict(p)
    d["radius"] = p.robot_radius
    return d


def test_window_bounds():
    p = DwaParams()
    assert dynamic_window(RobotState(Pose2D(0, 0), v=0.0, w=0.0), p) == pytest.approx((0.0, 0.025, -0.15, 0.15))
    assert dynamic_window(RobotState(Pose2D(0, 0), v=0.274, w=1.0), p) == pytest.approx((0.249, 0.274, 0.85, 1.0))


def test_params_validated():
    with pytest.raises(ValueError):
        DwaParams(sim_time=0.1, sim_dt=0.1)
    with pytest.raises(ValueError):
        DwaParams(v_samples=1)


def test_rollout_matches_exact_arc():
    pose = Pose2D(1.0, 2.0, 0.4)
    x, y, th = rollout(pose, np.array([0.2]), np.array([0.7]), 1.5, 0.1)
    p = integrate_unicycle(pose, 0.2, 0.7, 1.5)
    assert (x[0, -1], y[0, -1]) == pytest.approx((p.x, p.y))
    assert x.shape == (1, 15)


def test_empty_corridor_drives_straight():
    g = corridor()
    state = RobotState(Pose2D(0.5, 1.0, 0.0), v=0.2)
    cmd = dwa_step(state, straight_path(), g, DwaParams())
    assert cmd.v > 0 and abs(cmd.w) < 1e-9


def test_small_sample_choice_matches_brute_force():
    g = corridor()
    p = DwaParams(v_samples=3, w_samples=3)
    clear = clearance_map(g)
    for pose, v0, w0 in [(Pose2D(0.5, 1.0, 0.0), 0.2, 0.0), (Pose2D(1.0, 0.7, 0.5), 0.1, -0.3),
                         (Pose2D(2.0, 1.2, -0.2), 0.0, 0.0)]:
        state = RobotState(pose, v=v0, w=w0)
        path = straight_path()
        cmd = dwa_step(state, path, g, p)
        t = path_target(pose, path, p.lookahead)
        want = dwa_oracle(pose.x, pose.y, pose.theta, v0, w0, (t.x, t.y), clear.tolist(), g.origin,
                          g.resolution, oracle_params(p))
        assert (cmd.v, cmd.w) == pytest.approx(want, abs=1e-12)


def test_wall_within_braking_distance_stops_or_turns():
    g = corridor(wall_at=1.0, width=3.0)
    state = RobotState(Pose2D(0.55, 1.5, 0.0), v=0.274)
    ro = evaluate(state, straight_path(1.5), g, DwaParams())
    assert not ro.valid.any()
    cmd = dwa_step(state, straight_path(1.5), g, DwaParams())
    assert cmd.v == pytest.approx(0.249)  # brake as hard as allowed


def test_stopped_at_wall_rotates_in_place():
    g = corridor(wall_at=1.0, width=3.0)
    state = RobotState(Pose2D(0.7, 1.5, 0.0))
    path = [Pose2D(0.7, 1.5 + 0.05 * k, math.pi / 2) for k in range(20)]
    cmd = dwa_step(state, path, g, DwaParams())
    assert cmd.v <= 0.025 and cmd.w > 0


def test_from_rest_speed_bounded_by_window():
    cmd = dwa_step(RobotState(Pose2D(0.5, 1.0, 0.0)), straight_path(), corridor(), DwaParams())
    assert cmd.v <= 0.025 + 1e-12


def test_empty_path_rejected():
    with pytest.raises(ValueError):
        dwa_step(RobotState(Pose2D(0.5, 1.0)), [], corridor(), DwaParams())


@given(x=st.floats(0.4, 5.5), y=st.floats(0.5, 1.5), th=st.floats(-math.pi, math.pi),
       v=st.floats(0.0, 0.274), w=st.floats(-1.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_command_in_window_and_rollout_clear(x, y, th, v, w):
    g = corridor()
    p = DwaParams()
    state = RobotState(Pose2D(x, y, th), v=v, w=w)
    ro = evaluate(state, straight_path(), g, p)
    cmd = dwa_step(state, straight_path(), g, p)
    v_lo, v_hi, w_lo, w_hi = ro.window
    assert v_lo - 1e-12 <= cmd.v <= v_hi + 1e-12
    assert w_lo - 1e-12 <= cmd.w <= w_hi + 1e-12
    if ro.valid.any():
        i = np.flatnonzero((ro.v == cmd.v) & (ro.w == cmd.w))[0]
        assert ro.valid[i]
