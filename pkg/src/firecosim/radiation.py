"""Particle transport of thermal radiation.

Voxels above an emission threshold emit a fixed number of particles per step.
Each particle carries an equal share of eps*sigma*T^4*A*dt for its voxel,
starts on a voxel face, and flies in a cosine-weighted direction about the
outward face normal at a fixed speed. Segment tracing terminates a particle at
the first of: scene box, sensor surface, ground plane, domain exit, or range
limit. Sensors accumulate incident energy normalized by their surface area.

Ghost sensors tally crossing energy without terminating particles; they are
used for ground-truth exposure probes and never disturb the physical ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .scenario import RadiationParams, Scenario, SensorSpec

FACE_NORMALS = np.array([
    [1.0, 0, 0], [-1.0, 0, 0],
    [0, 1.0, 0], [0, -1.0, 0],
    [0, 0, 1.0], [0, 0, -1.0],
])
# tangent axes per face, used to jitter origins across the face
FACE_TANGENTS = ((1, 2), (1, 2), (0, 2), (0, 2), (0, 1), (0, 1))


@dataclass
class RadiationParticle:
    position: np.ndarray
    direction: np.ndarray
    energy: float
    alive: bool = True


class ParticleBatch:
    """Structure-of-arrays particle set; index access yields RadiationParticle."""

    def __init__(self, position, direction, energy, traveled=None):
        self.position = np.asarray(position, dtype=float).reshape(-1, 3)
        self.direction = np.asarray(direction, dtype=float).reshape(-1, 3)
        self.energy = np.asarray(energy, dtype=float).reshape(-1)
        self.alive = np.ones(len(self.energy), dtype=bool)
        self.traveled = (np.zeros(len(self.energy)) if traveled is None
                         else np.asarray(traveled, dtype=float))

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))

    def __len__(self):
        return len(self.energy)

    def __getitem__(self, i) -> RadiationParticle:
        return RadiationParticle(self.position[i].copy(), self.direction[i].copy(),
                                 float(self.energy[i]), bool(self.alive[i]))

    def compact(self) -> "ParticleBatch":
        """Drop dead particles."""
        keep = self.alive
        out = ParticleBatch(self.position[keep], self.direction[keep],
                            self.energy[keep], self.traveled[keep])
        return out

    def extend(self, other: "ParticleBatch") -> "ParticleBatch":
        if len(self) == 0:
            return other
        if len(other) == 0:
            return self
        merged = ParticleBatch(
            np.concatenate([self.position, other.position]),
            np.concatenate([self.direction, other.direction]),
            np.concatenate([self.energy, other.energy]),
            np.concatenate([self.traveled, other.traveled]),
        )
        merged.alive = np.concatenate([self.alive, other.alive])
        return merged


@dataclass
class ThermalSensor:
    """Runtime radiation collector (sphere or yaw-oriented cuboid)."""

    id: str
    shape: str
    center: np.ndarray
    radius: float = 0.1
    half_extents: tuple = (0.1, 0.1, 0.1)
    yaw: float = 0.0
    area: float = 1.0
    ema_alpha: float = 0.3
    attached_offset: tuple | None = None
    ghost: bool = False
    raw_irradiance: float = 0.0  # kW/m^2
    filtered_irradiance: float = 0.0  # kW/m^2
    dose: float = 0.0  # kJ/m^2
    collected: float = 0.0  # J accumulated during the current step
    history: list = field(default_factory=list)

    @classmethod
    def from_spec(cls, spec: SensorSpec, ghost=False, id_prefix="") -> "ThermalSensor":
        return cls(
            id=id_prefix + spec.id, shape=spec.shape, center=np.array(spec.center, dtype=float),
            radius=spec.radius, half_extents=spec.half_extents, yaw=spec.yaw,
            area=spec.area, ema_alpha=spec.ema_alpha, attached_offset=spec.attached_offset,
            ghost=ghost,
        )


def sensor_world_pose(sensor: ThermalSensor, robot_pose) -> ThermalSensor:
    """Place an attached sensor's geometry at the robot pose (x, y, yaw)."""
    if sensor.attached_offset is None:
        return sensor
    x, y, yaw = robot_pose
    ox, oy, oz = sensor.attached_offset
    c, s = np.cos(yaw), np.sin(yaw)
    sensor.center = np.array([x + c * ox - s * oy, y + s * ox + c * oy, oz])
    sensor.yaw = yaw
    return sensor


def emit(grid, params: RadiationParams, dt: float, rng: np.random.Generator) -> ParticleBatch:
    """Emit radiation particles from every voxel hotter than the threshold."""
    hot = (grid.temperature > params.emission_threshold) & ~grid.solid
    if not hot.any():
        return ParticleBatch.empty()
    h = grid.voxel_size
    ii, jj, kk = np.nonzero(hot)
    temps = grid.temperature[hot]
    n = params.particles_per_emitter_per_step
    area = 6.0 * h * h
    e_vox = params.emissivity * params.sigma * temps**4 * area * dt
    n_em = len(temps)
    total = n_em * n

    centers = (np.stack([ii, jj, kk], axis=1) + 0.5) * h
    centers = np.repeat(centers, n, axis=0)
    energy = np.repeat(e_vox / n, n)
    faces = np.tile(np.arange(n) % 6, n_em)

    pos = np.empty((total, 3))
    dirs = np.empty((total, 3))
    for f in range(6):
        sel = faces == f
        cnt = int(sel.sum())
        if cnt == 0:
            continue
        normal = FACE_NORMALS[f]
        p = centers[sel] + normal * (h / 2.0)
        ta, tb = FACE_TANGENTS[f]
        jitter = rng.uniform(-h / 2.0, h / 2.0, size=(cnt, 2))
        p[:, ta] += jitter[:, 0]
        p[:, tb] += jitter[:, 1]
        pos[sel] = p
        dirs[sel] = geo.cosine_hemisphere(cnt, normal, rng)
    return ParticleBatch(pos, dirs, energy)


def emitted_energy(grid, params: RadiationParams, dt: float) -> float:
    """Closed-form total emission for the current grid state (J)."""
    hot = (grid.temperature > params.emission_threshold) & ~grid.solid
    h = grid.voxel_size
    return float(np.sum(params.emissivity * params.sigma * grid.temperature[hot]**4
                        * 6.0 * h * h * dt))


def advance_and_collect(batch: ParticleBatch, scene_boxes, sensors, ground,
                        dt: float, params: RadiationParams,
                        domain_min, domain_max) -> dict:
    """Move particles one step and resolve first hits.

    Returns the transport ledger for this call:
    {"sensors": J, "solids": J, "ground": J, "exited": J, "inflight": J}.
    Sensor and ground accumulators are mutated in place.
    """
    ledger = {"sensors": 0.0, "solids": 0.0, "ground": 0.0, "exited": 0.0, "inflight": 0.0}
    if len(batch) == 0:
        return ledger
    pos, dirs, energy = batch.position, batch.direction, batch.energy
    n = len(batch)
    if params.instant:
        seg = np.maximum(params.max_range - batch.traveled, 0.0)
    else:
        seg = np.full(n, params.particle_speed * dt)
        seg = np.minimum(seg, np.maximum(params.max_range - batch.traveled, 0.0))

    real = [s for s in sensors if not s.ghost]
    ghosts = [s for s in sensors if s.ghost]

    t_sens = np.full((len(real), n), geo.INF)
    for si, s in enumerate(real):
        t_sens[si] = _sensor_entry(s, pos, dirs)
    t_solid = np.full(n, geo.INF)
    for box in scene_boxes:
        t_solid = np.minimum(t_solid, geo.ray_aabb_entry(pos, dirs, box.min_arr, box.max_arr))
    t_ground = geo.ray_plane_z0(pos, dirs)
    t_exit = geo.ray_aabb_exit(pos, dirs, np.asarray(domain_min, dtype=float),
                               np.asarray(domain_max, dtype=float))

    t_sens_min = t_sens.min(axis=0) if len(real) else np.full(n, geo.INF)
    # termination distance and category; ties resolve sensor < solid < ground < exit
    t_term = np.minimum.reduce([t_sens_min, t_solid, t_ground, t_exit])
    terminates = t_term <= seg

    hit_sensor = terminates & (t_sens_min <= t_term)
    hit_solid = terminates & ~hit_sensor & (t_solid <= t_term)
    hit_ground = terminates & ~hit_sensor & ~hit_solid & (t_ground <= t_term)
    hit_exit = terminates & ~hit_sensor & ~hit_solid & ~hit_ground

    if len(real):
        owner = np.argmin(t_sens, axis=0)  # exact ties go to the lowest index
        for si, s in enumerate(real):
            e = float(energy[hit_sensor & (owner == si)].sum())
            s.collected += e
            ledger["sensors"] += e
    ledger["solids"] = float(energy[hit_solid].sum())
    ledger["exited"] = float(energy[hit_exit].sum())

    if hit_ground.any() and ground is not None:
        gp = pos[hit_ground] + dirs[hit_ground] * t_ground[hit_ground, None]
        ground.deposit(gp[:, 0], gp[:, 1], energy[hit_ground])
    ledger["ground"] = float(energy[hit_ground].sum())

    # ghost tallies: crossing energy up to the termination point, no absorption
    reach = np.where(terminates, t_term, seg)
    for s in ghosts:
        tg = _sensor_entry(s, pos, dirs)
        s.collected += float(energy[tg <= reach].sum())

    # survivors march their full segment
    moved = np.where(terminates, t_term, seg)
    batch.position = pos + dirs * moved[:, None]
    batch.traveled = batch.traveled + moved
    expired = ~terminates & (batch.traveled >= params.max_range - 1e-12)
    ledger["exited"] += float(energy[expired].sum())
    batch.alive = ~(terminates | expired)
    ledger["inflight"] = float(energy[batch.alive].sum())
    return ledger


def _sensor_entry(sensor: ThermalSensor, pos, dirs):
    if sensor.shape == "sphere":
        return geo.ray_sphere_entry(pos, dirs, sensor.center, sensor.radius)
    return geo.ray_obb_entry(pos, dirs, sensor.center, sensor.half_extents, sensor.yaw)


def finalize_step(sensor: ThermalSensor, dt: float) -> ThermalSensor:
    """Convert the energy collected this step into a raw irradiance reading
    (kW/m^2), run the EMA filter, and integrate dose."""
    sensor.raw_irradiance = sensor.collected / (sensor.area * dt) / 1e3
    sensor.collected = 0.0
    ema_update(sensor)
    accumulate_dose(sensor, dt)
    return sensor


def ema_update(sensor: ThermalSensor) -> ThermalSensor:
    a = sensor.ema_alpha
    sensor.filtered_irradiance = a * sensor.raw_irradiance + (1.0 - a) * sensor.filtered_irradiance
    return sensor


def accumulate_dose(sensor: ThermalSensor, dt: float) -> ThermalSensor:
    sensor.dose += sensor.filtered_irradiance * dt
    return sensor


def sensors_for_scenario(scenario: Scenario) -> list:
    return [ThermalSensor.from_spec(s) for s in scenario.sensors]
