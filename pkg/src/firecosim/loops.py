"""Co-simulation loops and experiment runners.

The fire loop owns the voxel grid, radiation transport, sensors, and the
costmap, and composites fire imagery onto the latest camera triplet. The
robot loop integrates the kinematic robot and publishes odometry and camera
triplets. The two communicate only through the bus, so they can be driven
either by the deterministic virtual-time scheduler (experiments, CI) or by
wall-clock threads (teleoperation).

A ghost "truth/body" probe rides the undelayed robot pose inside the fire
loop so latency experiments can report actual thermal exposure even when the
published odometry is delayed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bridge, costmap as costmap_mod, planner as planner_mod
from . import radiation, render, robot as robot_mod, solver
from .bridge import (TOPIC_CMD, TOPIC_COMPOSITE, TOPIC_COSTMAP, TOPIC_DEPTH, TOPIC_ODOM,
                     TOPIC_POSE, TOPIC_RGB, TOPIC_STEERING, TOPIC_THERMAL, TOPIC_TRUTH_POSE,
                     Bus, register_standard_topics)
from .reactive import ReactiveConfig, compute_velocity
from .runtime import Scheduler, VirtualClock
from .scenario import Scenario, load_scenario, spot_cuboid_sensor
from .wire import CmdVelMsg, CompositeMsg, OdomMsg, ThermalMsg, ThermalReading

FIRE_DT = 0.05
ROBOT_DT = 0.01
CAMERA_PERIOD = 1.0 / 15.0

TRUTH_SENSOR_ID = "truth/body"


class FireLoop:
    """Owns the fire grid and everything derived from it."""

    def __init__(self, scenario: Scenario, bus: Bus, seed=0, fire_dt=FIRE_DT,
                 compositor=False, camera_shape=None, costmap_window=None,
                 dump_dir=None, truth_probe=True):
        self.scenario = scenario
        self.bus = bus
        self.fire_dt = fire_dt
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 17])))
        self.grid = solver.allocate(scenario)
        self.batch = radiation.ParticleBatch.empty()
        self.sensors = radiation.sensors_for_scenario(scenario)
        self.truth_sensor = None
        if truth_probe:
            self.truth_sensor = radiation.ThermalSensor.from_spec(
                spot_cuboid_sensor(), ghost=True, id_prefix="truth/")
            self.truth_sensor.id = TRUTH_SENSOR_ID
            self.sensors.append(self.truth_sensor)
        self.ground = costmap_mod.GroundAccumulator.for_domain(scenario.domain_size)
        window = costmap_window or costmap_mod.DEFAULT_WINDOW
        self.costmap = costmap_mod.ThermalCostmap.for_domain(scenario.domain_size,
                                                             window=window)
        self.costmap.mark_lethal_boxes(scenario.scene)
        self.compositor = compositor
        self.camera_shape = camera_shape  # (width, height) shared intrinsics
        self.dump_dir = Path(dump_dir) if dump_dir else None
        self.step_count = 0
        self.ledger_totals = {"emitted": 0.0, "sensors": 0.0, "solids": 0.0,
                              "ground": 0.0, "exited": 0.0}
        self._pilot_pose = (*scenario.robot_start,
                            math.atan2(scenario.robot_goal[1] - scenario.robot_start[1],
                                       scenario.robot_goal[0] - scenario.robot_start[0]))

    def sensor_by_id(self, sensor_id):
        for s in self.sensors:
            if s.id == sensor_id:
                return s
        raise KeyError(sensor_id)

    def _place_attached(self, now):
        lat = self.bus.latest(TOPIC_ODOM, now)
        pose = (lat.payload.x, lat.payload.y, lat.payload.heading) if lat else self._pilot_pose
        truth = self.bus.latest(TOPIC_TRUTH_POSE, now)
        truth_pose = (truth.payload.x, truth.payload.y, truth.payload.heading) if truth else pose
        for s in self.sensors:
            if s.attached_offset is None:
                continue
            radiation.sensor_world_pose(s, truth_pose if s.ghost else pose)

    def tick(self, now):
        scn = self.scenario
        dt = self.fire_dt
        self._place_attached(now)
        self.grid = solver.advance(self.grid, scn, dt)

        fresh = radiation.emit(self.grid, scn.radiation, dt, self.rng)
        self.ledger_totals["emitted"] += float(fresh.energy.sum())
        self.batch = self.batch.extend(fresh)
        ledger = radiation.advance_and_collect(
            self.batch, scn.scene, self.sensors, self.ground, dt, scn.radiation,
            scn.domain_min, scn.domain_max)
        for key in ("sensors", "solids", "ground", "exited"):
            self.ledger_totals[key] += ledger[key]
        self.batch = self.batch.compact()

        readings = []
        for s in self.sensors:
            radiation.finalize_step(s, dt)
            if not s.ghost:
                readings.append(ThermalReading(id=s.id, raw=s.raw_irradiance,
                                               filtered=s.filtered_irradiance, dose=s.dose))
        self.bus.publish(TOPIC_THERMAL, ThermalMsg(readings=readings), _Stamp(now))

        raw = self.ground.raw_irradiance(dt)
        self.costmap.push_frame(costmap_mod.normalize_frame(raw, self.costmap.irradiance_scale))
        self.bus.publish(TOPIC_COSTMAP,
                         costmap_mod.to_occupancy_message(self.costmap, stamp=now),
                         _Stamp(now))

        if self.compositor:
            self._composite(now)
        if self.dump_dir is not None:
            self._dump_frame(now)
        self.step_count += 1

    def _composite(self, now):
        rgb = self.bus.latest(TOPIC_RGB, now)
        depth = self.bus.latest(TOPIC_DEPTH, now)
        pose = self.bus.latest(TOPIC_POSE, now)
        if rgb is None or depth is None or pose is None or self.camera_shape is None:
            return
        if not (rgb.seq == depth.seq == pose.seq):
            return  # mid-update triplet; next step will see a consistent one
        w, h = self.camera_shape
        cam = robot_mod.camera_from_pose(pose.payload, w, h)
        fire_img = render.raymarch(self.grid, cam, depth.payload.depth, source_seq=pose.seq)
        comp = render.composite_msg(rgb.payload, fire_img)
        self.bus.publish(TOPIC_COMPOSITE,
                         CompositeMsg(source_seq=pose.seq, image=comp), _Stamp(now))

    def _dump_frame(self, now):
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        kz = self.grid.dims[2] // 2
        temp = self.grid.temperature[:, :, kz].astype("<f4")
        soot = self.grid.soot[:, :, kz].astype("<f4")
        base = self.dump_dir / f"frame_{self.step_count:06d}"
        with open(base.with_suffix(".bin"), "wb") as fh:
            fh.write(temp.tobytes())
            fh.write(soot.tobytes())
        header = {"step": self.step_count, "time": now, "slice_z_index": kz,
                  "fields": ["temperature", "soot"], "dtype": "<f4",
                  "shape": list(temp.shape)}
        base.with_suffix(".json").write_text(json.dumps(header, sort_keys=True))


class _Stamp:
    """Minimal clock adapter so publishes carry an explicit timestamp."""

    def __init__(self, t):
        self.t = t

    def now(self):
        return self.t


class RobotLoop:
    """Kinematic robot at a fixed tick rate; camera triplets on demand or on
    a periodic schedule."""

    def __init__(self, scenario: Scenario, bus: Bus, robot_dt=ROBOT_DT,
                 control="none", speed=1.0, camera_shape=None):
        self.scenario = scenario
        self.bus = bus
        self.robot_dt = robot_dt
        self.control = control
        self.speed = speed
        self.camera_shape = camera_shape
        goal = scenario.robot_goal
        start = scenario.robot_start
        self.axis_heading = math.atan2(goal[1] - start[1], goal[0] - start[0])
        self.state = robot_mod.RobotState(x=start[0], y=start[1],
                                          heading=self.axis_heading, speed=0.0, stamp=0.0)
        self.hold = False  # park the robot (e.g. during fire warmup)
        self.tick_count = 0

    def publish_odom(self, now):
        msg = OdomMsg(x=self.state.x, y=self.state.y,
                      heading=self.state.heading, speed=self.state.speed)
        seq = self.bus.publish(TOPIC_ODOM, msg, _Stamp(now))
        self.bus.publish(TOPIC_TRUTH_POSE, msg, _Stamp(now))
        return seq

    def _command(self, now):
        if self.control == "cmd_vel":
            lat = self.bus.latest(TOPIC_CMD, now)
            if lat is not None:
                return (lat.payload.vx, lat.payload.vy)
        elif self.control == "steering":
            lat = self.bus.latest(TOPIC_STEERING, now)
            deg = lat.payload.degrees if lat is not None else 0.0
            return robot_mod.steering_to_velocity(deg, self.axis_heading, self.speed)
        return (0.0, 0.0)

    def tick(self, now):
        cmd = (0.0, 0.0) if self.hold else self._command(now)
        self.state = robot_mod.tick(self.state, cmd, self.robot_dt,
                                    scene=self.scenario.scene,
                                    domain=self.scenario.domain_size)
        self.state.stamp = now
        self.publish_odom(now)
        self.tick_count += 1

    def camera_tick(self, now):
        if self.camera_shape is None:
            return None
        w, h = self.camera_shape
        rgb, depth, pose, _ = robot_mod.camera_triplet(self.state, self.scenario.scene, w, h)
        self.bus.publish(TOPIC_RGB, rgb, _Stamp(now))
        self.bus.publish(TOPIC_DEPTH, depth, _Stamp(now))
        return self.bus.publish(TOPIC_POSE, pose, _Stamp(now))


class CoSim:
    """Deterministic in-process co-simulation on a virtual clock."""

    def __init__(self, scenario: Scenario, seed=0, fire_dt=FIRE_DT, robot_dt=ROBOT_DT,
                 control="none", robot_speed=1.0, camera_shape=None,
                 camera_period=None, compositor=False, costmap_window=None,
                 dump_dir=None):
        self.scenario = scenario
        self.seed = seed
        self.fire_dt = fire_dt
        self.robot_dt = robot_dt
        self.clock = VirtualClock()
        self.scheduler = Scheduler(self.clock)
        self.bus = Bus()
        register_standard_topics(self.bus, fire_period=fire_dt, robot_period=robot_dt)
        self.fire = FireLoop(scenario, self.bus, seed=seed, fire_dt=fire_dt,
                             compositor=compositor, camera_shape=camera_shape,
                             costmap_window=costmap_window, dump_dir=dump_dir)
        self.robot = RobotLoop(scenario, self.bus, robot_dt=robot_dt, control=control,
                               speed=robot_speed, camera_shape=camera_shape)
        # event priorities: controllers 0, robot 1, camera 2, fire 3
        self.scheduler.every(robot_dt, self.robot.tick, priority=1)
        if camera_shape is not None and camera_period is not None:
            self.scheduler.every(camera_period, self.robot.camera_tick, priority=2)
        self.scheduler.every(fire_dt, self.fire.tick, priority=3)
        self.robot.publish_odom(0.0)

    def add_controller(self, fn, period):
        self.scheduler.every(period, fn, priority=0)

    def run_for(self, duration):
        self.scheduler.run_for(duration)

    def run_until(self, t):
        self.scheduler.run_until(t)

    @property
    def now(self):
        return self.clock.t

    # hooks used by bridge.measure_roundtrip
    def publish_triplet(self):
        return self.robot.camera_tick(self.clock.t)

    def wait_for_composite(self, seq, timeout=10.0):
        deadline = self.clock.t + timeout
        while self.clock.t < deadline:
            self.scheduler.run_until(self.clock.t + self.robot_dt)
            lat = self.bus.latest(TOPIC_COMPOSITE, self.clock.t)
            if lat is not None and lat.payload.source_seq >= seq:
                return self.clock.t
        return None


class SensorWalkSim:
    """Fire-only harness for costmap warmup and deterministic sensor walks."""

    def __init__(self, scenario: Scenario, seed=0, fire_dt=FIRE_DT, costmap_window=None):
        self.scenario = scenario
        self.fire_dt = fire_dt
        self.clock = VirtualClock()
        self.bus = Bus()
        register_standard_topics(self.bus, fire_period=fire_dt)
        self.fire = FireLoop(scenario, self.bus, seed=seed, fire_dt=fire_dt,
                             costmap_window=costmap_window)
        self.walk_sensor = None
        for s in self.fire.sensors:
            if not s.ghost and s.attached_offset is not None:
                self.walk_sensor = s
                break
        if self.walk_sensor is None:
            raise ValueError("scenario has no attached sensor for the walk")
        start = scenario.robot_start
        self._publish_pose((start[0], start[1], 0.0))

    def _publish_pose(self, pose):
        msg = OdomMsg(x=pose[0], y=pose[1], heading=pose[2], speed=0.0)
        self.bus.publish(TOPIC_ODOM, msg, _Stamp(self.clock.t))
        self.bus.publish(TOPIC_TRUTH_POSE, msg, _Stamp(self.clock.t))

    def warmup(self, seconds):
        steps = int(round(seconds / self.fire_dt))
        for _ in range(steps):
            self.clock.t += self.fire_dt
            self.fire.tick(self.clock.t)

    def walk_step(self, pose) -> float:
        self._publish_pose(pose)
        self.clock.t += self.fire_dt
        self.fire.tick(self.clock.t)
        return self.walk_sensor.filtered_irradiance

    def reset_walk_sensor(self):
        self.walk_sensor.raw_irradiance = 0.0
        self.walk_sensor.filtered_irradiance = 0.0

    def costmap_snapshot(self) -> costmap_mod.ThermalCostmap:
        src = self.fire.costmap
        cm = costmap_mod.ThermalCostmap(
            width=src.width, height=src.height, resolution=src.resolution,
            origin=src.origin, irradiance_scale=src.irradiance_scale, window=src.window)
        cm.values = src.values.copy()
        cm.lethal = src.lethal.copy()
        return cm


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ReactiveResult:
    reached: bool
    time_to_goal: float
    trajectory: list = field(default_factory=list)  # (t, x, y, heading)
    sensor_log: list = field(default_factory=list)  # (t, fl, fr, rr, rl) filtered kW/m^2
    peak_reading: float = 0.0
    truth_dose: float = 0.0
    fire_entry: bool = False
    min_clearance: float = math.inf


def run_reactive_experiment(scenario_name, cfg: ReactiveConfig, seed=0, delay_ms=0.0,
                            duration_limit=60.0, out_dir=None, avoid=True,
                            control_period=None,
                            delay_direction="fire->robot") -> ReactiveResult:
    """Drive the reactive controller (or the straight-line baseline when
    avoid=False) against a live fire sim; returns trajectory and exposure."""
    scenario = load_scenario(scenario_name)
    sim = CoSim(scenario, seed=seed, control="cmd_vel")
    if delay_ms:
        bridge.inject_delay(sim.bus, delay_direction, delay_ms)
    goal = np.array(scenario.robot_goal)
    fire_centers = [np.array(f.center[:2]) for f in scenario.fires]
    fire_radii = [f.radius for f in scenario.fires]
    result = ReactiveResult(reached=False, time_to_goal=math.inf)
    order = cfg.sensor_ids

    def controller(now):
        st = sim.robot.state
        pose = (st.x, st.y, st.heading)
        lat = sim.bus.latest(TOPIC_THERMAL, now)
        readings = {name: 0.0 for name in order}
        if lat is not None:
            for r in lat.payload.readings:
                if r.id in readings:
                    readings[r.id] = r.filtered
        if avoid:
            v = compute_velocity(readings, pose, goal, cfg)
        else:
            to_goal = goal - np.array([st.x, st.y])
            n = np.linalg.norm(to_goal)
            v = to_goal / n if n > 1e-9 else np.zeros(2)
        sim.bus.publish(TOPIC_CMD, CmdVelMsg(vx=float(v[0] * cfg.speed),
                                             vy=float(v[1] * cfg.speed)), _Stamp(now))
        result.trajectory.append((now, st.x, st.y, st.heading))
        result.sensor_log.append((now, *(readings[name] for name in order)))
        result.peak_reading = max(result.peak_reading, max(readings.values()))
        for c, r in zip(fire_centers, fire_radii):
            d = float(np.linalg.norm(np.array([st.x, st.y]) - c))
            result.min_clearance = min(result.min_clearance, d)
            if d < r:
                result.fire_entry = True
        if np.linalg.norm(np.array([st.x, st.y]) - goal) <= cfg.goal_tolerance:
            if not result.reached:
                result.reached = True
                result.time_to_goal = now

    sim.add_controller(controller, control_period or sim.robot_dt)
    while not result.reached and sim.now < duration_limit:
        sim.run_for(0.25)
    result.truth_dose = sim.fire.truth_sensor.dose
    if out_dir is not None:
        _write_reactive_csvs(result, Path(out_dir), order)
    return result


def _write_reactive_csvs(result: ReactiveResult, out: Path, order):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w") as fh:
        fh.write("t,x,y,heading\n")
        for row in result.trajectory:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
    with open(out / "sensors.csv", "w") as fh:
        fh.write("t," + ",".join(f"q_{n.lower()}" for n in order) + "\n")
        for row in result.sensor_log:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def run_latency_experiment(scenario_name="reactive_line", cfg=None, seed=0,
                           delays_ms=(0, 500, 1000, 2000), duration_limit=60.0):
    cfg = cfg or ReactiveConfig()
    results = []
    for d in delays_ms:
        results.append((d, run_reactive_experiment(scenario_name, cfg, seed=seed,
                                                   delay_ms=d,
                                                   duration_limit=duration_limit)))
    return results


@dataclass
class PlanExperimentResult:
    weights: list
    paths: list  # PlannedPath per weight
    reports: list  # DoseReport per weight
    costmap: costmap_mod.ThermalCostmap
    predicted_peaks: list = field(default_factory=list)  # swept-footprint kW/m^2


def run_plan_experiment(scenario_name="three_fires", weights=(0, 5, 30), seed=7,
                        warmup_s=30.0, walk_speed=1.0, out_dir=None,
                        costmap_window=None) -> PlanExperimentResult:
    """Warm the fire to a quasi-steady state, snapshot the averaged costmap,
    plan one path per weight, and dose-evaluate each with the sensor walk."""
    scenario = load_scenario(scenario_name)
    sim = SensorWalkSim(scenario, seed=seed, costmap_window=costmap_window)
    sim.warmup(warmup_s)
    cm = sim.costmap_snapshot()
    paths, reports, preds = [], [], []
    for w in weights:
        req = planner_mod.PlanRequest(start=scenario.robot_start,
                                      goal=scenario.robot_goal, weight=w, costmap=cm)
        path = planner_mod.plan(req)
        sim.reset_walk_sensor()
        reports.append(planner_mod.sensor_walk(path, walk_speed, sim))
        paths.append(path)
        preds.append(planner_mod.swept_peak(path, cm))
    result = PlanExperimentResult(weights=list(weights), paths=paths,
                                  reports=reports, costmap=cm,
                                  predicted_peaks=preds)
    if out_dir is not None:
        _write_plan_outputs(result, Path(out_dir))
    return result


def _write_plan_outputs(result: PlanExperimentResult, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "dose_table.csv", "w") as fh:
        fh.write("weight,distance_m,dose_kj_m2,peak_kw_m2,predicted_peak_kw_m2\n")
        for w, path, rep, pred in zip(result.weights, result.paths, result.reports,
                                      result.predicted_peaks):
            fh.write(f"{w},{path.length:.10g},{rep.dose:.10g},"
                     f"{rep.peak_irradiance:.10g},{pred:.10g}\n")
    for w, path in zip(result.weights, result.paths):
        with open(out / f"path_w{w}.csv", "w") as fh:
            fh.write("x,y\n")
            for x, y in path.waypoints:
                fh.write(f"{x:.10g},{y:.10g}\n")
    (out / "costmap.csv").write_text(costmap_mod.to_csv(result.costmap))
    (out / "costmap.pgm").write_bytes(costmap_mod.to_pgm(result.costmap))
    (out / "costmap_paths.ppm").write_bytes(overlay_ppm(result.costmap, result.paths))


def overlay_ppm(cm: costmap_mod.ThermalCostmap, paths) -> bytes:
    """Heat-colored costmap raster with planned paths overlaid in white."""
    v = cm.values.T[::-1, :].astype(float) / 100.0  # rows top-down
    img = np.zeros((cm.height, cm.width, 3))
    img[..., 0] = np.clip(v * 3.0, 0, 1)
    img[..., 1] = np.clip(v * 3.0 - 1.0, 0, 1)
    img[..., 2] = np.clip(v * 3.0 - 2.0, 0, 1)
    img[cm.lethal.T[::-1, :]] = (0.25, 0.25, 0.35)
    out = np.rint(img * 255).astype(np.uint8)
    for path in paths:
        for ix, iy in path.cells:
            out[cm.height - 1 - iy, ix] = (255, 255, 255)
    header = f"P6\n{cm.width} {cm.height}\n255\n".encode()
    return header + out.tobytes()
