"""Reactive hazard avoidance: corner-sensor repulsion plus goal attraction.

Each corner sensor contributes a planar unit vector pointing from the sensor
toward the robot center, scaled by its filtered irradiance over q_max; a unit
goal-attraction vector is added and the sum is normalized to give the
commanded direction. The function is pure; the runner wires it to the live
simulation through the bus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import CORNER_OFFSETS

DEGENERATE_NORM = 1e-9


@dataclass(frozen=True)
class ReactiveConfig:
    q_max: float = 1.8  # kW/m^2 at which one sensor's repulsion reaches unit length
    goal_tolerance: float = 0.5  # m
    speed: float = 1.0  # m/s
    sensor_ids: tuple = ("FL", "FR", "RR", "RL")

    def __post_init__(self):
        if not self.q_max > 0:
            raise ValueError("q_max must be positive")
        if not self.speed > 0:
            raise ValueError("speed must be positive")


def sensor_positions(robot_pose, sensor_ids=("FL", "FR", "RR", "RL")) -> dict:
    """Planar world positions of the corner sensors for a robot pose."""
    x, y, yaw = robot_pose
    c, s = np.cos(yaw), np.sin(yaw)
    out = {}
    for name in sensor_ids:
        ox, oy = CORNER_OFFSETS[name]
        out[name] = np.array([x + c * ox - s * oy, y + s * ox + c * oy])
    return out

def compute_velocity(readings, robot_pose, goal, cfg: ReactiveConfig) -> np.ndarray:
    """Unit planar velocity command from four filtered irradiances (kW/m^2).

    `readings` maps sensor id -> irradiance (or is a sequence in
    cfg.sensor_ids order). Falls back to the pure goal direction when the
    aggregate cancels out.
    """
    if not isinstance(readings, dict):
        readings = dict(zip(cfg.sensor_ids, readings))
    center = np.array([robot_pose[0], robot_pose[1]])
    to_goal = np.array(goal, dtype=float) - center
    norm_goal = np.linalg.norm(to_goal)
    v_t = to_goal / norm_goal if norm_goal > DEGENERATE_NORM else np.zeros(2)

    positions = sensor_positions(robot_pose, cfg.sensor_ids)
    v = v_t.copy()
    for name in cfg.sensor_ids:
        u = center - positions[name]
        n = np.linalg.norm(u)
        if n <= DEGENERATE_NORM:
            continue
        v += (float(readings[name]) / cfg.q_max) * (u / n)
    norm = np.linalg.norm(v)
    if norm < DEGENERATE_NORM:
        return v_t
    return v / norm


def run_reactive(scenario_name="reactive_line", cfg: ReactiveConfig | None = None,
                 seed=0, delay_ms=0.0, duration_limit=60.0, out_dir=None):
    """Run the reactive controller against the live fire sim; returns the
    experiment result (trajectory, sensor log, dose metrics)."""
    from . import loops

    cfg = cfg or ReactiveConfig()
    return loops.run_reactive_experiment(scenario_name, cfg, seed=seed,
                                         delay_ms=delay_ms,
                                         duration_limit=duration_limit,
                                         out_dir=out_dir)
