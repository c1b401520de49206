import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firecosim import robot
from firecosim.robot import (CameraModel, RobotState, camera_for_robot, camera_from_pose,
                             camera_triplet, render_depth, render_rgb, tick, wrap_angle)
from firecosim.scenario import AxisBox

DOMAIN = (20.0, 10.0)


def state(x=1.0, y=1.0, heading=0.0):
    return RobotState(x=x, y=y, heading=heading, speed=0.0, stamp=0.0)


def test_zero_command_holds_position():
    s = tick(state(), (0.0, 0.0), 0.1, domain=DOMAIN)
    assert (s.x, s.y) == (1.0, 1.0)


def test_euler_step():
    s = tick(state(), (1.0, 0.0), 0.1, domain=DOMAIN)
    assert s.x == pytest.approx(1.1)
    assert s.y == 1.0
    assert s.heading == 0.0
    assert s.speed == 1.0


def test_heading_follows_motion():
    s = state(heading=0.0)
    s = tick(s, (0.0, 1.0), 0.1, domain=DOMAIN)
    assert s.heading == pytest.approx(math.pi / 2)


def test_wall_clamp_stops_at_face():
    wall = AxisBox(min=(2.0, 0.0, 0.0), max=(2.5, 10.0, 2.0), kind="wall")
    s = state(x=1.95, y=5.0)
    for _ in range(20):
        s = tick(s, (1.0, 0.0), 0.05, scene=(wall,), domain=DOMAIN)
    assert s.x < 2.0


def test_wall_slide_along_free_axis():
    wall = AxisBox(min=(2.0, 0.0, 0.0), max=(2.5, 10.0, 2.0), kind="wall")
    s = state(x=1.9, y=5.0)
    s = tick(s, (1.0, 1.0), 0.5, scene=(wall,), domain=DOMAIN)
    assert s.y == pytest.approx(5.5)  # y-motion survives, x clamped
    assert s.x == 1.9


def test_domain_bounds_respected():
    s = state(x=0.1, y=0.1)
    s = tick(s, (-5.0, -5.0), 1.0, domain=DOMAIN)
    assert s.x >= 0.0 and s.y >= 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_no_penetration_property(seed):
    rng = np.random.default_rng(seed)
    boxes = (AxisBox(min=(3.0, 3.0, 0.0), max=(5.0, 5.0, 2.0), kind="obstacle"),
             AxisBox(min=(6.0, 1.0, 0.0), max=(7.0, 9.0, 2.0), kind="wall"))
    s = state(x=1.0, y=1.0)
    for _ in range(120):
        cmd = rng.uniform(-2.0, 2.0, 2)
        s = tick(s, cmd, 0.05, scene=boxes, domain=DOMAIN)
        for b in boxes:
            inside = (b.min[0] < s.x < b.max[0]) and (b.min[1] < s.y < b.max[1])
            assert not inside


def test_heading_wraps():
    assert wrap_angle(math.pi + 0.1) == pytest.approx(-math.pi + 0.1)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_steering_to_velocity():
    vx, vy = robot.steering_to_velocity(90.0, 0.0, 2.0)
    assert vx == pytest.approx(0.0, abs=1e-12)
    assert vy == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# cameras and depth
# ---------------------------------------------------------------------------


def test_depth_empty_scene_is_infinite():
    cam = camera_for_robot(state(), width=32, height=24)
    d = render_depth((), cam)
    assert np.all(np.isinf(d))


def test_depth_center_pixel_analytic_box():
    # unit box 5 m ahead of the camera, directly facing it
    cam = camera_for_robot(state(x=0.0, y=0.0, heading=0.0), width=33, height=25)
    box = AxisBox(min=(5.0, -0.5, 0.0), max=(6.0, 0.5, 1.0), kind="obstacle")
    d = render_depth((box,), cam)
    assert d[12, 16] == pytest.approx(5.0, abs=1e-6)
    # the whole flat front face shares the same z-depth
    face = d[np.isfinite(d)]
    assert np.abs(face - 5.0).max() < 1e-6


def test_depth_inside_box_bounded():
    cam = camera_for_robot(state(x=4.0, y=4.0), width=16, height=12, height_m=1.0)
    box = AxisBox(min=(3.0, 3.0, 0.0), max=(5.0, 5.0, 2.0), kind="obstacle")
    d = render_depth((box,), cam)
    assert np.all(d == 0.0)  # origin inside: entry distance is zero


def test_camera_quaternion_matches_heading():
    for heading in (0.0, 0.7, -2.1, math.pi / 2):
        cam = camera_for_robot(state(heading=heading), width=8, height=8)
        rot = robot.quaternion_to_rotation(cam.quaternion())
        assert np.allclose(rot, cam.rotation, atol=1e-9)
        fwd = rot[:, 2]
        assert fwd[0] == pytest.approx(math.cos(heading), abs=1e-9)
        assert fwd[1] == pytest.approx(math.sin(heading), abs=1e-9)


def test_camera_from_pose_round_trip():
    st_ = state(x=2.0, y=3.0, heading=0.6)
    rgb, depth, pose, cam = camera_triplet(st_, (), width=16, height=12)
    cam2 = camera_from_pose(pose, 16, 12)
    assert np.allclose(cam2.position, cam.position)
    assert np.allclose(cam2.rotation, cam.rotation, atol=1e-9)
    assert rgb.pixels.shape == (12, 16, 3)
    assert depth.depth.shape == (12, 16)


def test_rgb_render_deterministic_and_shaded():
    boxes = (AxisBox(min=(3.0, -1.0, 0.0), max=(4.0, 1.0, 2.0), kind="wall"),)
    cam = camera_for_robot(state(x=0.0, y=0.0), width=24, height=18)
    a = render_rgb(boxes, cam)
    b = render_rgb(boxes, cam)
    assert np.array_equal(a, b)
    assert a.dtype == np.uint8
    # wall pixels darker than the wall base color (distance shading)
    assert a[9, 12, 0] < 150


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(position=np.zeros(3), rotation=np.eye(3), fx=-1.0, fy=1.0,
                    cx=1.0, cy=1.0, width=4, height=4).validate()
    with pytest.raises(ValueError):
        CameraModel(position=np.zeros(3), rotation=np.eye(3), fx=1.0, fy=1.0,
                    cx=99.0, cy=1.0, width=4, height=4).validate()
