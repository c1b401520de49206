"""Thermally weighted A* on the averaged costmap, a Dijkstra oracle, and the
deterministic sensor-walk dose evaluation of planned paths.

Edge cost from cell u to 8-neighbor v is d(u,v) * (1 + w * C[v]/100) with d
the Euclidean step length. Diagonal moves may not cut corners past lethal
cells. Ties in the open list break on (f, h, cell index) so paths are
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .costmap import ThermalCostmap

SQRT2 = math.sqrt(2.0)

NEIGHBORS = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))


class NoPathError(RuntimeError):
    pass


class PlanError(ValueError):
    pass


@dataclass
class PlanRequest:
    start: tuple  # meters
    goal: tuple  # meters
    weight: float
    costmap: ThermalCostmap

    def validate(self):
        cm = self.costmap
        if self.weight < 0:
            raise PlanError("weight must be >= 0")
        for name, p in (("start", self.start), ("goal", self.goal)):
            ix, iy = cm.cell_of(*p)
            if not (0 <= ix < cm.width and 0 <= iy < cm.height):
                raise PlanError(f"{name} {p} outside the costmap")
            if cm.lethal[ix, iy]:
                raise PlanError(f"{name} {p} lies in a lethal cell")
        return self


@dataclass
class PlannedPath:
    waypoints: list  # [(x, y)] meters, cell centers
    cells: list  # [(ix, iy)]
    length: float  # meters
    cost: float  # total Eq-style traversal cost
    predicted_peak: float  # kW/m^2, max averaged-map value along the path


@dataclass
class DoseReport:
    dose: float  # kJ/m^2
    peak_irradiance: float  # kW/m^2
    duration: float  # s
    samples: list = field(default_factory=list)  # [(t_k, q_k)]

    def recompute_dose(self) -> float:
        total = 0.0
        for k, (t_k, q_k) in enumerate(self.samples):
            t_next = self.samples[k + 1][0] if k + 1 < len(self.samples) else self.duration
            total += q_k * (t_next - t_k)
        return total


def _neighbors(cell, cm):
    ix, iy = cell
    for dx, dy, d in NEIGHBORS:
        nx, ny = ix + dx, iy + dy
        if not (0 <= nx < cm.width and 0 <= ny < cm.height):
            continue
        if cm.lethal[nx, ny]:
            continue
        if dx != 0 and dy != 0:
            # no corner cutting past lethal cells
            if cm.lethal[ix + dx, iy] or cm.lethal[ix, iy + dy]:
                continue
        yield (nx, ny), d


def edge_cost(cm: ThermalCostmap, step_units: float, dest, weight: float) -> float:
    return step_units * cm.resolution * (1.0 + weight * float(cm.values[dest]) / 100.0)


def path_cost(cells, cm: ThermalCostmap, weight: float) -> float:
    """Canonical cost of a cell path: straight and diagonal contributions are
    summed separately so equal-cost paths compare exactly equal."""
    straight = 0.0
    diag = 0.0
    for a, b in zip(cells, cells[1:]):
        c = 100.0 + weight * float(cm.values[b])
        if a[0] != b[0] and a[1] != b[1]:
            diag += c
        else:
            straight += c
    return cm.resolution * (straight + SQRT2 * diag) / 100.0


def _search(cm, start_cell, goal_cell, weight, heuristic):
    w, h = cm.width, cm.height
    idx = lambda c: c[0] * h + c[1]
    g = {start_cell: 0.0}
    came = {}
    closed = set()
    open_heap = [(heuristic(start_cell), heuristic(start_cell), idx(start_cell), start_cell)]
    while open_heap:
        f, _, _, cell = heappop(open_heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal_cell:
            path = [cell]
            while cell in came:
                cell = came[cell]
                path.append(cell)
            path.reverse()
            return path
        for nb, d in _neighbors(cell, cm):
            if nb in closed:
                continue
            cand = g[cell] + edge_cost(cm, d, nb, weight)
            if cand < g.get(nb, math.inf):
                g[nb] = cand
                came[nb] = cell
                hh = heuristic(nb)
                heappush(open_heap, (cand + hh, hh, idx(nb), nb))
    return None


def plan(req: PlanRequest) -> PlannedPath:
    """Weighted A* (Euclidean heuristic, admissible since cost >= distance)."""
    req.validate()
    cm = req.costmap
    start_cell = cm.cell_of(*req.start)
    goal_cell = cm.cell_of(*req.goal)
    res = cm.resolution

    def heuristic(c):
        return math.hypot((c[0] - goal_cell[0]) * res, (c[1] - goal_cell[1]) * res)

    cells = _search(cm, start_cell, goal_cell, req.weight, heuristic)
    if cells is None:
        raise NoPathError(f"no path from {req.start} to {req.goal}")
    return _as_path(cells, cm, req.weight)


def _as_path(cells, cm, weight):
    length = 0.0
    for a, b in zip(cells, cells[1:]):
        length += (SQRT2 if (a[0] != b[0] and a[1] != b[1]) else 1.0) * cm.resolution
    peak_value = max(int(cm.values[c]) for c in cells)
    return PlannedPath(
        waypoints=[cm.center_of(*c) for c in cells],
        cells=list(cells),
        length=length,
        cost=path_cost(cells, cm, weight),
        predicted_peak=cm.irradiance_at_value(peak_value),
    )


def dijkstra(req: PlanRequest):
    """Exhaustive uniform-cost search; the optimality oracle for plan()."""
    req.validate()
    cm = req.costmap
    cells = _search(cm, cm.cell_of(*req.start), cm.cell_of(*req.goal),
                    req.weight, lambda c: 0.0)
    return None if cells is None else _as_path(cells, cm, req.weight)


def verify_optimal(req: PlanRequest) -> bool:
    """True iff plan() matches the Dijkstra oracle cost exactly (canonical
    cost comparison; both reporting no-path also counts as agreement)."""
    try:
        a = plan(req)
    except NoPathError:
        a = None
    d = dijkstra(req)
    if a is None or d is None:
        return a is None and d is None
    return a.cost == d.cost


def swept_peak(path: PlannedPath, cm: ThermalCostmap, radius: float = 0.6) -> float:
    """Predicted peak irradiance over the cells a sensor body of the given
    half-width sweeps while following the path (kW/m^2). The per-cell
    `predicted_peak` only samples the waypoint line; a 1.1 m cuboid also
    overlaps the neighboring cells."""
    reach = int(math.ceil(radius / cm.resolution)) + 1
    best = 0
    for ix, iy in path.cells:
        cx, cy = cm.center_of(ix, iy)
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                nx, ny = ix + dx, iy + dy
                if not (0 <= nx < cm.width and 0 <= ny < cm.height):
                    continue
                px, py = cm.center_of(nx, ny)
                if math.hypot(px - cx, py - cy) <= radius:
                    best = max(best, int(cm.values[nx, ny]))
    return cm.irradiance_at_value(best)


def walk_pose_at(path: PlannedPath, s: float):
    """Pose (x, y, yaw) a distance s along the waypoint polyline."""
    pts = path.waypoints
    yaw = 0.0
    remaining = s
    for a, b in zip(pts, pts[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if seg <= 0.0:
            continue
        yaw = math.atan2(b[1] - a[1], b[0] - a[0])
        if remaining <= seg:
            t = remaining / seg
            return a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), yaw
        remaining -= seg
    return pts[-1][0], pts[-1][1], yaw


def sensor_walk(path: PlannedPath, speed: float, sim) -> DoseReport:
    """Translate the sim's walk sensor along the path at constant speed,
    logging the filtered irradiance each fire step and integrating dose.

    `sim` is a live fire-simulation handle exposing `fire_dt` and
    `walk_step(pose) -> kW/m^2` (see loops.SensorWalkSim).
    """
    if not path.waypoints:
        raise PlanError("sensor_walk needs a non-empty path")
    dt = sim.fire_dt
    duration = path.length / speed
    steps = max(1, int(math.ceil(duration / dt)))
    samples = []
    dose = 0.0
    peak = 0.0
    for k in range(steps):
        t_k = k * dt
        pose = walk_pose_at(path, min(t_k * speed, path.length))
        q_k = sim.walk_step(pose)
        t_next = min((k + 1) * dt, duration)
        dose += q_k * (t_next - t_k)
        peak = max(peak, q_k)
        samples.append((t_k, q_k))
    return DoseReport(dose=dose, peak_irradiance=peak, duration=duration, samples=samples)
