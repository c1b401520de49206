"""Headless demonstration recording and closed-loop policy rollouts on the
corridor scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import bridge
from ..loops import CoSim, _Stamp
from ..scenario import load_scenario, mirror_fire
from ..wire import SteeringMsg
from .dataset import Demo, DemoSample, load_demo_dir, write_demo_csv
from .model import infer, train
from .operator import ScriptedOperator

CONTROL_RATE = 20.0  # Hz, also the demo sampling rate
SPEED = 1.0  # m/s
GOAL_TOLERANCE = 0.5
SENSOR_ORDER = ("FL", "FR", "RR", "RL")


@dataclass
class RolloutResult:
    reached: bool
    duration: float
    trajectory: list = field(default_factory=list)  # (t, x, y)
    min_clearance: float = math.inf
    fire_entry: bool = False
    dose: float = 0.0


def _corridor(side: str):
    return mirror_fire(load_scenario("bc_corridor"), side)


def _read_corner_irradiances(bus, now):
    readings = dict.fromkeys(SENSOR_ORDER, 0.0)
    lat = bus.latest(bridge.TOPIC_THERMAL, now)
    if lat is not None:
        for r in lat.payload.readings:
            if r.id in readings:
                readings[r.id] = r.filtered
    return tuple(readings[k] for k in SENSOR_ORDER)


def _drive(scenario, steering_fn, seed, duration_limit=25.0, start_jitter=None,
           warmup_s=4.0, on_sample=None):
    """Shared runner: steer with steering_fn(now, robot_state, readings) at the
    control rate until the goal plane is crossed or time runs out."""
    sim = CoSim(scenario, seed=seed, control="steering", robot_speed=SPEED)
    if start_jitter is not None:
        sim.robot.state.y += start_jitter
    goal = np.array(scenario.robot_goal)
    fire = np.array(scenario.fires[0].center[:2])
    fire_r = scenario.fires[0].radius
    sim.robot.hold = True  # park during fire warmup
    sim.run_for(warmup_s)
    sim.robot.hold = False
    t0 = sim.now
    result = RolloutResult(reached=False, duration=0.0)

    def controller(now):
        st = sim.robot.state
        readings = _read_corner_irradiances(sim.bus, now)
        if result.reached:
            deg = 0.0
        else:
            deg = float(np.clip(steering_fn(now, st, readings), -90.0, 90.0))
        sim.bus.publish(bridge.TOPIC_STEERING, SteeringMsg(degrees=deg), _Stamp(now))
        result.trajectory.append((now - t0, st.x, st.y))
        d = float(np.hypot(st.x - fire[0], st.y - fire[1]))
        result.min_clearance = min(result.min_clearance, d)
        if d < fire_r:
            result.fire_entry = True
        if on_sample is not None and not result.reached:
            on_sample(now - t0, st, readings, deg)
        if not result.reached and np.hypot(st.x - goal[0], st.y - goal[1]) <= GOAL_TOLERANCE:
            result.reached = True
            result.duration = now - t0

    sim.add_controller(controller, 1.0 / CONTROL_RATE)
    while not result.reached and sim.now - t0 < duration_limit:
        sim.run_for(0.5)
    if not result.reached:
        result.duration = sim.now - t0
    result.dose = sim.fire.truth_sensor.dose
    return result


def scripted_demo(side: str, seed: int, out_dir=None) -> tuple:
    """Record one scripted-operator demonstration; returns (Demo, RolloutResult).

    The swerve depth and width vary per demo so the dataset covers the
    (progress, lateral-offset) plane instead of a single nominal profile;
    the learner then keys its correction on the achieved offset."""
    scenario = _corridor(side)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 300])))
    op = ScriptedOperator(scenario, rng,
                          clearance=float(rng.uniform(1.1, 1.5)),
                          bulge_width=float(rng.uniform(0.8, 1.2)))
    goal = np.array(scenario.robot_goal)
    samples = []

    def on_sample(t, st, readings, deg):
        samples.append(DemoSample(stamp=t, q=readings,
                                  dx=float(goal[0] - st.x), dy=float(goal[1] - st.y),
                                  steering=deg, side=side))

    def steering_fn(now, st, readings):
        return op.steering((st.x, st.y, st.heading))

    res = _drive(scenario, steering_fn, seed=seed, on_sample=on_sample)
    demo = Demo(samples=samples, side=side, valid=res.reached and len(samples) > 0)
    if out_dir is not None:
        write_demo_csv(Path(out_dir) / f"demo_{side}_{seed:04d}.csv", demo)
    return demo, res


def record_demos(n_per_side=10, seed=0, out_dir=None):
    """Record n demos per fire side; returns (demos, results)."""
    demos, results = [], []
    for i in range(n_per_side):
        for side in ("left", "right"):
            d, r = scripted_demo(side, seed=seed * 1000 + i * 2 + (side == "right"),
                                 out_dir=out_dir)
            demos.append(d)
            results.append(r)
    return demos, results


def rollout(net, side: str, seed: int, start_jitter=0.0) -> RolloutResult:
    """Run the trained policy closed-loop on the corridor task."""
    scenario = _corridor(side)
    goal = np.array(scenario.robot_goal)

    def steering_fn(now, st, readings):
        return infer(net, readings, float(goal[0] - st.x), float(goal[1] - st.y))

    return _drive(scenario, steering_fn, seed=seed, start_jitter=start_jitter)


def demo_clearances(demos, scenario_name="bc_corridor"):
    """Minimum fire clearance per demo, reconstructed from dx/dy."""
    out = []
    for d in demos:
        scn = _corridor(d.side)
        goal = np.array(scn.robot_goal)
        fire = np.array(scn.fires[0].center[:2])
        pos = goal - np.stack([[s.dx, s.dy] for s in d.samples])
        out.append(float(np.min(np.linalg.norm(pos - fire, axis=1))))
    return out


def run_bc_pipeline(n_per_side=10, seed=7, n_trials=20, out_dir=None):
    """Record, train, and evaluate; returns a summary dict (the §IV-C style
    experiment, fully scripted)."""
    demos, _ = record_demos(n_per_side=n_per_side, seed=seed, out_dir=out_dir)
    valid = [d for d in demos if d.valid]
    net, metrics = train(valid, seed=seed)
    clearances = demo_clearances(valid)
    median_clearance = float(np.median(clearances))

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 400])))
    trials = []
    for i in range(n_trials):
        side = "left" if i % 2 == 0 else "right"
        jitter = float(rng.uniform(-0.15, 0.15))
        trials.append(rollout(net, side, seed=9000 + seed * 100 + i, start_jitter=jitter))
    return {
        "net": net,
        "metrics": metrics,
        "demos": valid,
        "demo_median_clearance": median_clearance,
        "trials": trials,
        "successes": sum(1 for t in trials if t.reached),
        "min_trial_clearance": min(t.min_clearance for t in trials),
    }
