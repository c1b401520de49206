"""Scripted teleoperator for the corridor task.

A fire-position-aware avoidance script with added steering noise: it tracks a
lateral offset profile that bulges away from the fire around its position
along the corridor and steers toward a lookahead point on that profile, the
way a human swerves and corrects back. Used to generate training
demonstrations headlessly; the teleop UI produces the same CSV schema.
"""

from __future__ import annotations

import math

import numpy as np


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-max(-30.0, min(30.0, z))))


class ScriptedOperator:
    def __init__(self, scenario, rng: np.random.Generator, clearance=1.25,
                 bulge_width=0.9, lookahead=0.9, noise_deg=4.0):
        self.start = np.array(scenario.robot_start)
        self.goal = np.array(scenario.robot_goal)
        fire = scenario.fires[0]
        self.fire_xy = np.array(fire.center[:2])
        axis = self.goal - self.start
        self.axis_heading = math.atan2(axis[1], axis[0])
        # unit vectors along and across the corridor
        self.u = axis / np.linalg.norm(axis)
        self.n = np.array([-self.u[1], self.u[0]])
        fire_lateral = float(np.dot(self.fire_xy - self.start, self.n))
        self.fire_along = float(np.dot(self.fire_xy - self.start, self.u))
        # swerve away from the fire side
        self.direction = -math.copysign(1.0, fire_lateral)
        self.clearance = clearance
        self.bulge_width = bulge_width
        self.lookahead = lookahead
        self.noise_deg = noise_deg
        self.rng = rng

    def desired_offset(self, along: float) -> float:
        # plateau profile: commit to full offset before the fire, hold it
        # through the pass, and release after; sharper than a gaussian bump
        rise = _sigmoid((along - (self.fire_along - 1.5 * self.bulge_width)) / 0.45)
        fall = _sigmoid((along - (self.fire_along + 1.1 * self.bulge_width)) / 0.45)
        return self.direction * self.clearance * (rise - fall)

    def steering(self, pose) -> float:
        """Steering angle (degrees, relative to the task axis) for a robot
        pose (x, y, heading)."""
        p = np.array([pose[0], pose[1]])
        along = float(np.dot(p - self.start, self.u))
        lateral = float(np.dot(p - self.start, self.n))
        target_lat = self.desired_offset(along + self.lookahead)
        angle = math.degrees(math.atan2(target_lat - lateral, self.lookahead))
        angle += float(self.rng.normal(0.0, self.noise_deg))
        return float(np.clip(angle, -90.0, 90.0))
