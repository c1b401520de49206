"""Demonstration files.

One CSV per demonstration, schema:
    stamp,q_fl,q_fr,q_rr,q_rl,dx,dy,steering,side
Readings are the EMA-filtered corner irradiances (kW/m^2), dx/dy the world
frame offsets to the goal (m), steering the commanded angle in degrees
relative to the task axis, side the fire placement ("left"/"right").
Demos that did not reach the goal are written with an `.invalid.csv` suffix
and skipped by the loader.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER = ["stamp", "q_fl", "q_fr", "q_rr", "q_rl", "dx", "dy", "steering", "side"]


@dataclass
class DemoSample:
    stamp: float
    q: tuple  # (FL, FR, RR, RL) kW/m^2
    dx: float
    dy: float
    steering: float  # degrees in [-90, 90]
    side: str

    def features(self):
        return np.array([*self.q, self.dx, self.dy])


@dataclass
class Demo:
    samples: list
    side: str
    valid: bool = True

    def __len__(self):
        return len(self.samples)

    def feature_matrix(self):
        return np.stack([s.features() for s in self.samples])

    def labels(self):
        return np.array([s.steering for s in self.samples])


def write_demo_csv(path, demo: Demo) -> Path:
    path = Path(path)
    if not demo.valid and not path.name.endswith(".invalid.csv"):
        path = path.with_name(path.stem + ".invalid.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for s in demo.samples:
            w.writerow([repr(s.stamp), *(repr(q) for q in s.q),
                        repr(s.dx), repr(s.dy), repr(s.steering), s.side])
    return path


def read_demo_csv(path) -> Demo:
    path = Path(path)
    samples = []
    side = "left"
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if head != HEADER:
            raise ValueError(f"unexpected demo header in {path}: {head}")
        for row in r:
            side = row[8]
            if not -90.0 <= float(row[7]) <= 90.0:
                raise ValueError(f"steering out of range in {path}")
            samples.append(DemoSample(
                stamp=float(row[0]),
                q=tuple(float(v) for v in row[1:5]),
                dx=float(row[5]), dy=float(row[6]),
                steering=float(row[7]), side=side,
            ))
    return Demo(samples=samples, side=side, valid=not path.name.endswith(".invalid.csv"))


def load_demo_dir(directory) -> list:
    """All valid demos in a directory, sorted by filename."""
    directory = Path(directory)
    demos = []
    for p in sorted(directory.glob("*.csv")):
        if p.name.endswith(".invalid.csv"):
            continue
        demo = read_demo_csv(p)
        if len(demo):
            demos.append(demo)
    return demos
