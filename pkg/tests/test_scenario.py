import dataclasses

import pytest

from firecosim import scenario as scn_mod
from firecosim.scenario import (Scenario, ScenarioError, builtin_scenarios, load_scenario,
                                mirror_fire, serialize_scenario)

THREE_FIRES_TOML = """
name = "three_fires_file"

[domain]
size = [20.0, 10.0, 4.0]
voxel_size = 0.25

[robot]
start = [16.0, 0.5]
goal = [10.0, 9.5]

[[fires]]
center = [5.0, 5.0, 0.5]
radius = 0.45
heat_release_rate = 15.0

[[fires]]
center = [11.0, 5.0, 0.5]
radius = 0.55
heat_release_rate = 30.0

[[fires]]
center = [16.5, 5.0, 0.6]
radius = 0.7
heat_release_rate = 60.0
"""


def test_load_three_fire_file(tmp_path):
    p = tmp_path / "three.toml"
    p.write_text(THREE_FIRES_TOML)
    s = load_scenario(p)
    assert len(s.fires) == 3
    assert s.domain_size == (20.0, 10.0, 4.0)
    assert all(f.center[1] == 5.0 for f in s.fires)


def test_zero_voxel_size_rejected(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(THREE_FIRES_TOML.replace("voxel_size = 0.25", "voxel_size = 0.0"))
    with pytest.raises(ScenarioError, match="voxel_size must be positive"):
        load_scenario(p)


def test_empty_scene_single_fire_is_valid(tmp_path):
    p = tmp_path / "open.toml"
    p.write_text("""
[domain]
size = [8.0, 8.0, 3.0]
voxel_size = 0.25

[[fires]]
center = [4.0, 4.0, 0.5]
radius = 0.4
heat_release_rate = 20.0
""")
    s = load_scenario(p)
    assert s.scene == ()
    assert len(s.fires) == 1


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "syntax.toml"
    p.write_text("[domain\nsize = [1,1,1]\n")
    with pytest.raises(ScenarioError, match="line"):
        load_scenario(p)


def test_box_outside_domain_rejected(tmp_path):
    p = tmp_path / "box.toml"
    p.write_text("""
[domain]
size = [4.0, 4.0, 2.0]
voxel_size = 0.25

[[scene]]
kind = "wall"
min = [0.0, 0.0, 0.0]
max = [9.0, 1.0, 1.0]
""")
    with pytest.raises(ScenarioError, match="outside the domain"):
        load_scenario(p)


def test_fire_outside_domain_rejected():
    with pytest.raises(ScenarioError, match="outside the domain"):
        Scenario(name="x", domain_size=(4, 4, 2), voxel_size=0.25,
                 fires=(scn_mod.FireSource(center=(9, 1, 0.5), radius=0.3,
                                           heat_release_rate=5.0),)).validate()


def test_builtins_present_and_valid():
    b = builtin_scenarios()
    assert {"three_fires", "bc_corridor", "reactive_line"} <= set(b)
    assert "unknown_name" not in b
    for s in b.values():
        s.validate()


def test_three_fires_geometry():
    s = builtin_scenarios()["three_fires"]
    assert s.robot_start == (16.0, 0.5)
    assert s.robot_goal == (10.0, 9.5)
    hrrs = [f.heat_release_rate for f in s.fires]
    assert hrrs == sorted(hrrs)
    assert all(f.center[1] == 5.0 for f in s.fires)


def test_bc_corridor_geometry():
    s = builtin_scenarios()["bc_corridor"]
    dx = s.robot_goal[0] - s.robot_start[0]
    dy = s.robot_goal[1] - s.robot_start[1]
    assert (dx, dy) == (7.0, 0.0)
    f = s.fires[0]
    assert f.center[0] - s.robot_start[0] == pytest.approx(2.5)
    assert abs(f.center[1] - s.robot_start[1]) == pytest.approx(0.5)


def test_reactive_line_collinear():
    s = builtin_scenarios()["reactive_line"]
    ys = {s.robot_start[1], s.robot_goal[1], s.fires[0].center[1]}
    assert len(ys) == 1


def test_round_trip_serialization(tmp_path):
    for name, s in builtin_scenarios().items():
        text = serialize_scenario(s)
        p = tmp_path / f"{name}.toml"
        p.write_text(text)
        again = load_scenario(p)
        assert again == s, name


def test_spot_cuboid_area():
    spec = scn_mod.spot_cuboid_sensor()
    assert spec.area == pytest.approx(1.71, abs=0.01)
    assert spec.half_extents == scn_mod.SPOT_HALF_EXTENTS


def test_mirror_fire_flips_side():
    s = builtin_scenarios()["bc_corridor"]
    left = mirror_fire(s, "left")
    right = mirror_fire(s, "right")
    assert left.fires[0].center[1] > s.robot_start[1]
    assert right.fires[0].center[1] < s.robot_start[1]
    assert left.fires[0].center[0] == right.fires[0].center[0]


def test_unknown_solver_key_rejected(tmp_path):
    p = tmp_path / "weird.toml"
    p.write_text("""
[domain]
size = [4.0, 4.0, 2.0]
voxel_size = 0.25

[solver]
nonsense = 3
""")
    with pytest.raises(ScenarioError, match="unknown solver keys"):
        load_scenario(p)


def test_injection_rate_default_derives_from_hrr():
    f = scn_mod.FireSource(center=(1, 1, 0.5), radius=0.3, heat_release_rate=50.0)
    assert f.injection_rate(5.0e7) == pytest.approx(50.0e3 / 5.0e7)
    g = dataclasses.replace(f, fuel_injection_rate=0.123)
    assert g.injection_rate(5.0e7) == 0.123
