"""Scenario descriptions: domain extent, scene boxes, fire sources, sensors,
robot start/goal, and solver/radiation parameters.

Scenario files are TOML (see scenarios/three_fires.toml for the schema).
Everything is validated on load; a `Scenario` is immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ScenarioError(ValueError):
    """Raised when a scenario file is malformed or violates an invariant."""


BOX_KINDS = ("wall", "obstacle", "floor", "ceiling")

# Spot chassis as a radiation collector: 1.1 x 0.5 x 0.191 m cuboid,
# total surface area ~1.71 m^2.
SPOT_HALF_EXTENTS = (0.55, 0.25, 0.0955)
SPOT_BODY_HEIGHT = 0.4

# Corner sensor offsets in the robot frame (x forward, y left), body height.
CORNER_OFFSETS = {
    "FL": (0.55, 0.25),
    "FR": (0.55, -0.25),
    "RR": (-0.55, -0.25),
    "RL": (-0.55, 0.25),
}
CORNER_SENSOR_RADIUS = 0.2


@dataclass(frozen=True)
class AxisBox:
    min: tuple
    max: tuple
    kind: str = "obstacle"

    def validate(self):
        if self.kind not in BOX_KINDS:
            raise ScenarioError(f"box kind must be one of {BOX_KINDS}, got {self.kind!r}")
        for a, b in zip(self.min, self.max):
            if not a < b:
                raise ScenarioError(f"box min must be < max componentwise, got {self.min} / {self.max}")

    @property
    def min_arr(self):
        return np.array(self.min, dtype=float)

    @property
    def max_arr(self):
        return np.array(self.max, dtype=float)


@dataclass(frozen=True)
class FireSource:
    center: tuple
    radius: float
    heat_release_rate: float  # kW
    fuel_injection_rate: float | None = None  # kg/s; default derived from HRR
    ignition_temperature: float = 900.0  # K, pilot temperature inside the source

    def validate(self):
        if not self.heat_release_rate > 0:
            raise ScenarioError("heat_release_rate must be positive")
        if not self.radius > 0:
            raise ScenarioError("fire radius must be positive")

    def injection_rate(self, heat_of_combustion: float) -> float:
        """Fuel mass injection in kg/s; defaults to HRR / heat of combustion."""
        if self.fuel_injection_rate is not None:
            return self.fuel_injection_rate
        return self.heat_release_rate * 1e3 / heat_of_combustion


@dataclass(frozen=True)
class SensorSpec:
    id: str
    shape: str  # "sphere" | "cuboid"
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.1
    half_extents: tuple = SPOT_HALF_EXTENTS
    yaw: float = 0.0
    ema_alpha: float = 0.3
    attached_offset: tuple | None = None  # robot-frame (x, y, z); None = fixed in world

    def validate(self):
        if self.shape not in ("sphere", "cuboid"):
            raise ScenarioError(f"sensor shape must be sphere or cuboid, got {self.shape!r}")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ScenarioError("ema_alpha must lie in (0, 1]")
        if self.shape == "sphere" and not self.radius > 0:
            raise ScenarioError("sphere sensor radius must be positive")
        if self.shape == "cuboid" and not all(h > 0 for h in self.half_extents):
            raise ScenarioError("cuboid half_extents must be positive")

    @property
    def area(self) -> float:
        if self.shape == "sphere":
            return 4.0 * np.pi * self.radius**2
        a, b, c = (2 * h for h in self.half_extents)
        return 2.0 * (a * b + b * c + c * a)


@dataclass(frozen=True)
class SolverParams:
    ambient_temperature: float = 293.0  # K
    buoyancy_beta: float = 0.0034  # 1/K, Boussinesq expansion coefficient
    arrhenius_a: float = 2.0e8  # 1/s pre-exponential
    activation_energy: float = 8.0e4  # J/mol
    gas_constant: float = 8.314  # J/(mol K)
    heat_of_combustion: float = 5.0e7  # J/kg fuel
    stoich_ratio: float = 4.0  # kg O2 per kg fuel
    diffusivity: float = 2.0e-3  # m^2/s
    soot_yield: float = 0.02  # kg soot per kg fuel burned
    cfl: float = 0.9
    pressure_iters: int = 80
    # plumbing constants not part of the reaction model proper
    specific_heat: float = 1005.0  # J/(kg K)
    gas_density: float = 1.2  # kg/m^3 reference density
    cooling_rate: float = 0.25  # 1/s relaxation of excess temperature (mixing losses)
    flicker_amplitude: float = 0.0  # pilot temperature modulation (puffing), opt-in
    flicker_hz: float = 1.3
    temperature_floor: float = 50.0  # K, hard lower clamp
    temperature_cap: float = 2000.0  # K, hard upper clamp
    max_velocity: float = 4.5  # m/s, stability clamp
    side_boundaries: str = "wall"  # "wall" | "open"
    top_boundary: str = "open"  # "wall" | "open"

    def validate(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ScenarioError("cfl must lie in (0, 1]")
        if self.pressure_iters < 1:
            raise ScenarioError("pressure_iters must be >= 1")
        if self.side_boundaries not in ("wall", "open") or self.top_boundary not in ("wall", "open"):
            raise ScenarioError("boundaries must be 'wall' or 'open'")


@dataclass(frozen=True)
class RadiationParams:
    sigma: float = 5.670374419e-8  # W/(m^2 K^4)
    emissivity: float = 0.95
    emission_threshold: float = 560.0  # K
    particles_per_emitter_per_step: int = 16
    particle_speed: float = 50.0  # m/s
    max_range: float = 60.0  # m
    instant: bool = False  # trace rays to termination within one step

    def validate(self):
        if not 0.0 <= self.emissivity <= 1.0:
            raise ScenarioError("emissivity must lie in [0, 1]")
        if self.particles_per_emitter_per_step < 1:
            raise ScenarioError("particles_per_emitter_per_step must be >= 1")


@dataclass(frozen=True)
class Scenario:
    name: str
    domain_size: tuple  # (x, y, z) meters
    voxel_size: float
    scene: tuple = ()
    fires: tuple = ()
    sensors: tuple = ()
    robot_start: tuple = (0.0, 0.0)
    robot_goal: tuple = (1.0, 0.0)
    solver: SolverParams = field(default_factory=SolverParams)
    radiation: RadiationParams = field(default_factory=RadiationParams)

    def validate(self):
        if not self.voxel_size > 0:
            raise ScenarioError("voxel_size must be positive")
        if len(self.domain_size) != 3 or not all(d > 0 for d in self.domain_size):
            raise ScenarioError("domain_size must be three positive components")
        for box in self.scene:
            box.validate()
            if any(m < 0 for m in box.min) or any(b > d + 1e-9 for b, d in zip(box.max, self.domain_size)):
                raise ScenarioError(f"scene box {box.min}-{box.max} lies outside the domain")
        for f in self.fires:
            f.validate()
            if any(not 0 <= c <= d for c, d in zip(f.center, self.domain_size)):
                raise ScenarioError(f"fire at {f.center} lies outside the domain")
        for s in self.sensors:
            s.validate()
        self.solver.validate()
        self.radiation.validate()
        return self

    @property
    def dims(self):
        return tuple(int(round(d / self.voxel_size)) for d in self.domain_size)

    @property
    def domain_min(self):
        return np.zeros(3)

    @property
    def domain_max(self):
        return np.array(self.domain_size, dtype=float)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _vec(raw, n, what):
    if not isinstance(raw, (list, tuple)) or len(raw) != n:
        raise ScenarioError(f"{what} must be a {n}-vector, got {raw!r}")
    return tuple(float(v) for v in raw)


def _params_from_table(cls, table, what):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ScenarioError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**table)


def scenario_from_dict(data: dict, name: str = "unnamed") -> Scenario:
    try:
        dom = data["domain"]
    except KeyError:
        raise ScenarioError("missing [domain] table") from None
    scene = []
    for b in data.get("scene", []):
        scene.append(AxisBox(min=_vec(b["min"], 3, "box min"), max=_vec(b["max"], 3, "box max"),
                             kind=b.get("kind", "obstacle")))
    fires = []
    for f in data.get("fires", []):
        fires.append(FireSource(
            center=_vec(f["center"], 3, "fire center"),
            radius=float(f["radius"]),
            heat_release_rate=float(f["heat_release_rate"]),
            fuel_injection_rate=float(f["fuel_injection_rate"]) if "fuel_injection_rate" in f else None,
            ignition_temperature=float(f.get("ignition_temperature", 900.0)),
        ))
    sensors = []
    for s in data.get("sensors", []):
        sensors.append(SensorSpec(
            id=str(s["id"]),
            shape=str(s.get("shape", "sphere")),
            center=_vec(s.get("center", [0, 0, 0]), 3, "sensor center"),
            radius=float(s.get("radius", 0.1)),
            half_extents=_vec(s.get("half_extents", SPOT_HALF_EXTENTS), 3, "sensor half_extents"),
            yaw=float(s.get("yaw", 0.0)),
            ema_alpha=float(s.get("ema_alpha", 0.3)),
            attached_offset=_vec(s["attached_offset"], 3, "attached_offset") if "attached_offset" in s else None,
        ))
    robot = data.get("robot", {})
    scn = Scenario(
        name=str(data.get("name", name)),
        domain_size=_vec(dom["size"], 3, "domain size"),
        voxel_size=float(dom["voxel_size"]),
        scene=tuple(scene),
        fires=tuple(fires),
        sensors=tuple(sensors),
        robot_start=_vec(robot.get("start", [0, 0]), 2, "robot start"),
        robot_goal=_vec(robot.get("goal", [1, 0]), 2, "robot goal"),
        solver=_params_from_table(SolverParams, data.get("solver", {}), "solver"),
        radiation=_params_from_table(RadiationParams, data.get("radiation", {}), "radiation"),
    )
    return scn.validate()


def load_scenario(path) -> Scenario:
    """Load and validate a scenario from a TOML file or a builtin name."""
    builtins = builtin_scenarios()
    if str(path) in builtins:
        return builtins[str(path)]
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"no such scenario file or builtin: {path}")
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        # tomli error messages carry "at line N, column M"
        raise ScenarioError(f"parse error in {p}: {e}") from None
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"parse error in {p}: {e}") from None
    try:
        return scenario_from_dict(data, name=p.stem)
    except KeyError as e:
        raise ScenarioError(f"missing required key {e} in {p}") from None


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def serialize_scenario(scn: Scenario) -> str:
    """Render a Scenario back to TOML; load_scenario on the result round-trips."""
    out = [f'name = "{scn.name}"', "", "[domain]",
           f"size = {_fmt(scn.domain_size)}", f"voxel_size = {_fmt(scn.voxel_size)}", ""]
    out += ["[robot]", f"start = {_fmt(scn.robot_start)}", f"goal = {_fmt(scn.robot_goal)}", ""]
    for box in scn.scene:
        out += ["[[scene]]", f'kind = "{box.kind}"', f"min = {_fmt(box.min)}", f"max = {_fmt(box.max)}", ""]
    for f in scn.fires:
        out += ["[[fires]]", f"center = {_fmt(f.center)}", f"radius = {_fmt(f.radius)}",
                f"heat_release_rate = {_fmt(f.heat_release_rate)}"]
        if f.fuel_injection_rate is not None:
            out.append(f"fuel_injection_rate = {_fmt(f.fuel_injection_rate)}")
        out += [f"ignition_temperature = {_fmt(f.ignition_temperature)}", ""]
    for s in scn.sensors:
        out += ["[[sensors]]", f'id = "{s.id}"', f'shape = "{s.shape}"', f"center = {_fmt(s.center)}",
                f"radius = {_fmt(s.radius)}", f"half_extents = {_fmt(s.half_extents)}",
                f"yaw = {_fmt(s.yaw)}", f"ema_alpha = {_fmt(s.ema_alpha)}"]
        if s.attached_offset is not None:
            out.append(f"attached_offset = {_fmt(s.attached_offset)}")
        out.append("")
    for section, params in (("solver", scn.solver), ("radiation", scn.radiation)):
        out.append(f"[{section}]")
        for fld in dataclasses.fields(params):
            out.append(f"{fld.name} = {_fmt(getattr(params, fld.name))}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Builtin scenarios
# ---------------------------------------------------------------------------


def perimeter_walls(size, thickness=0.2, height=None) -> tuple:
    """Thin wall boxes along the four sides of the domain footprint."""
    sx, sy, sz = size
    h = height if height is not None else sz
    t = thickness
    return (
        AxisBox(min=(0.0, 0.0, 0.0), max=(sx, t, h), kind="wall"),
        AxisBox(min=(0.0, sy - t, 0.0), max=(sx, sy, h), kind="wall"),
        AxisBox(min=(0.0, t, 0.0), max=(t, sy - t, h), kind="wall"),
        AxisBox(min=(sx - t, t, 0.0), max=(sx, sy - t, h), kind="wall"),
    )


def spot_cuboid_sensor(sensor_id="spot", attached=True, ema_alpha=0.3) -> SensorSpec:
    return SensorSpec(
        id=sensor_id, shape="cuboid", half_extents=SPOT_HALF_EXTENTS, ema_alpha=ema_alpha,
        center=(0.0, 0.0, SPOT_BODY_HEIGHT),
        attached_offset=(0.0, 0.0, SPOT_BODY_HEIGHT) if attached else None,
    )


def corner_sensors(ema_alpha=0.3, height=SPOT_BODY_HEIGHT,
                   radius=CORNER_SENSOR_RADIUS) -> tuple:
    """Four sphere sensors at the corners of the robot bounding volume."""
    return tuple(
        SensorSpec(id=name, shape="sphere", radius=radius, ema_alpha=ema_alpha,
                   center=(dx, dy, height), attached_offset=(dx, dy, height))
        for name, (dx, dy) in CORNER_OFFSETS.items()
    )


def builtin_scenarios() -> dict:
    """Named scenarios used by the experiments and tests."""
    scns = {}

    # Three fires of increasing intensity along the y = 5 m centerline of a
    # 20 x 10 m walled domain; start (16, 0.5), goal (10, 9.5).
    size = (20.0, 10.0, 4.0)
    scns["three_fires"] = Scenario(
        name="three_fires",
        domain_size=size,
        voxel_size=0.25,
        scene=perimeter_walls(size),
        fires=(
            FireSource(center=(8.0, 5.0, 0.55), radius=0.85, heat_release_rate=25.0,
                       ignition_temperature=680.0),
            FireSource(center=(11.5, 5.0, 0.55), radius=0.65, heat_release_rate=35.0,
                       ignition_temperature=780.0),
            FireSource(center=(15.5, 5.0, 0.6), radius=0.8, heat_release_rate=65.0,
                       ignition_temperature=1010.0),
        ),
        sensors=(spot_cuboid_sensor(),),
        robot_start=(16.0, 0.5),
        robot_goal=(10.0, 9.5),
    ).validate()

    # Straight 7 m corridor task: fire 2.5 m along the path, offset 0.5 m to
    # one side. The fire side is chosen per run; the stored scenario holds the
    # left-side placement.
    size = (12.0, 6.0, 3.0)
    scns["bc_corridor"] = Scenario(
        name="bc_corridor",
        domain_size=size,
        voxel_size=0.25,
        fires=(FireSource(center=(4.5, 3.5, 0.4), radius=0.5, heat_release_rate=35.0,
                          ignition_temperature=1200.0),),
        sensors=corner_sensors(ema_alpha=0.2, radius=0.3),
        robot_start=(2.0, 3.0),
        robot_goal=(9.0, 3.0),
        radiation=RadiationParams(particles_per_emitter_per_step=32),
    ).validate()

    # Robot, fire, and goal collinear on an open plane.
    size = (12.0, 8.0, 3.0)
    scns["reactive_line"] = Scenario(
        name="reactive_line",
        domain_size=size,
        voxel_size=0.25,
        fires=(FireSource(center=(6.0, 4.0, 0.4), radius=0.5, heat_release_rate=30.0,
                          ignition_temperature=900.0),),
        sensors=corner_sensors(ema_alpha=0.4),
        robot_start=(2.0, 4.0),
        robot_goal=(10.0, 4.0),
    ).validate()

    return scns


def mirror_fire(scn: Scenario, side: str) -> Scenario:
    """bc_corridor helper: place the fire left (+y) or right (-y) of the
    start->goal axis, keeping the offset magnitude."""
    if side not in ("left", "right"):
        raise ScenarioError("fire side must be 'left' or 'right'")
    axis_y = scn.robot_start[1]
    fires = []
    for f in scn.fires:
        off = abs(f.center[1] - axis_y)
        y = axis_y + off if side == "left" else axis_y - off
        fires.append(dataclasses.replace(f, center=(f.center[0], y, f.center[2])))
    return dataclasses.replace(scn, fires=tuple(fires))
