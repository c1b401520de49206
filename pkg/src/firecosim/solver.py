"""Gas-phase fire solver on an Eulerian voxel grid.

State per voxel: velocity (collocated, m/s), temperature (K), species mass
fractions (fuel, O2, CO2, H2O; the remainder is inert), and soot density
(kg/m^3). One `step` applies, in order: source injection, single-step
combustion, buoyancy, semi-Lagrangian advection, diffusion, pressure
projection, and boundary conditions.

The solver is deterministic (no RNG) and owns no threads; callers hand out
read-only copies of the grid to radiation and rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .scenario import Scenario, SolverParams

GRAVITY = 9.81  # m/s^2
AMBIENT_O2 = 0.23  # mass fraction of oxygen in ambient air
CO2_PRODUCT_FRACTION = 0.55  # mass split of combustion products
H2O_PRODUCT_FRACTION = 0.45

SPECIES = ("fuel", "o2", "co2", "h2o")


class CflError(RuntimeError):
    """dt exceeds the advective CFL bound; the caller must subcycle."""


class SolverDivergence(RuntimeError):
    """A field became non-finite; the solve is aborted with a diagnostic."""


@dataclass
class FireGrid:
    dims: tuple
    voxel_size: float
    velocity: np.ndarray  # (nx, ny, nz, 3)
    temperature: np.ndarray  # (nx, ny, nz)
    species: dict  # name -> (nx, ny, nz) mass fraction
    soot: np.ndarray  # (nx, ny, nz) kg/m^3
    solid: np.ndarray  # (nx, ny, nz) bool
    time: float = 0.0  # simulated seconds since allocation

    def copy(self) -> "FireGrid":
        return FireGrid(
            dims=self.dims,
            voxel_size=self.voxel_size,
            velocity=self.velocity.copy(),
            temperature=self.temperature.copy(),
            species={k: v.copy() for k, v in self.species.items()},
            soot=self.soot.copy(),
            solid=self.solid,  # static
            time=self.time,
        )

    def max_speed(self) -> float:
        return float(np.abs(self.velocity).max(initial=0.0))

    def validate(self, params: SolverParams):
        total = np.zeros_like(self.temperature)
        for name, y in self.species.items():
            if y.min() < -1e-12 or y.max() > 1.0 + 1e-9:
                raise AssertionError(f"mass fraction {name} out of [0,1]")
            total += y
        if total.max() > 1.0 + 1e-6:
            raise AssertionError("species fractions sum above 1")
        if self.temperature.min() <= 0.0:
            raise AssertionError("temperature at or below 0 K")
        if np.abs(self.velocity[self.solid]).max(initial=0.0) > 0.0:
            raise AssertionError("nonzero velocity inside solid voxels")
        return self


@lru_cache(maxsize=32)
def _static_masks(scenario: Scenario):
    """Solid mask, per-fire source masks, and per-voxel flicker phases."""
    nx, ny, nz = scenario.dims
    h = scenario.voxel_size
    idx = np.indices((nx, ny, nz), dtype=float)
    centers = np.stack([(idx[a] + 0.5) * h for a in range(3)], axis=-1)
    solid = np.zeros((nx, ny, nz), dtype=bool)
    for box in scenario.scene:
        inside = np.all((centers >= box.min_arr) & (centers <= box.max_arr), axis=-1)
        solid |= inside
    sources = []
    phases = []
    for fire in scenario.fires:
        d2 = np.sum((centers - np.array(fire.center)) ** 2, axis=-1)
        mask = (d2 <= fire.radius**2) & ~solid
        if not mask.any():
            # degenerate radius below voxel size: take the containing voxel
            i = tuple(min(max(int(c / h), 0), n - 1) for c, n in zip(fire.center, (nx, ny, nz)))
            mask = np.zeros_like(solid)
            mask[i] = not solid[i]
        sources.append(mask)
        # spatial phase across the source so the pilot sloshes side to side
        rel = centers[mask] - np.array(fire.center)
        phases.append(np.pi * rel[:, 1] / max(fire.radius, h))
    return solid, tuple(sources), tuple(phases)


def allocate(scenario: Scenario) -> FireGrid:
    """Ambient quiescent grid for a scenario."""
    nx, ny, nz = scenario.dims
    if min(nx, ny, nz) < 2:
        raise ValueError("grid needs at least 2 voxels per axis")
    p = scenario.solver
    solid, _, _ = _static_masks(scenario)
    return FireGrid(
        dims=(nx, ny, nz),
        voxel_size=scenario.voxel_size,
        velocity=np.zeros((nx, ny, nz, 3)),
        temperature=np.full((nx, ny, nz), p.ambient_temperature),
        species={
            "fuel": np.zeros((nx, ny, nz)),
            "o2": np.full((nx, ny, nz), AMBIENT_O2),
            "co2": np.zeros((nx, ny, nz)),
            "h2o": np.zeros((nx, ny, nz)),
        },
        soot=np.zeros((nx, ny, nz)),
        solid=solid,
    )


# ---------------------------------------------------------------------------
# Substeps. Each takes and returns a FireGrid; inputs are not aliased by the
# output (step() works on a private copy).
# ---------------------------------------------------------------------------


def inject_sources(grid: FireGrid, scenario: Scenario, dt: float) -> FireGrid:
    g = grid.copy()
    g.time = grid.time + dt
    _inject_inplace(g, scenario, dt)
    return g


def _inject_inplace(g: FireGrid, scenario: Scenario, dt: float):
    p = scenario.solver
    _, sources, phases = _static_masks(scenario)
    h3 = g.voxel_size**3
    for fire, mask, phase in zip(scenario.fires, sources, phases):
        n = int(mask.sum())
        if n == 0:
            continue
        dyf = fire.injection_rate(p.heat_of_combustion) * dt / (p.gas_density * n * h3)
        total = sum(g.species[s][mask] for s in SPECIES)
        room = np.maximum(1.0 - total, 0.0)
        g.species["fuel"][mask] += np.minimum(dyf, room)
        # buoyant flames puff and slosh; a deterministic flicker on the pilot
        # reproduces that instability on a grid too coarse to develop it
        pilot = fire.ignition_temperature * (
            1.0 + p.flicker_amplitude * np.sin(
                2.0 * np.pi * p.flicker_hz * g.time + phase))
        g.temperature[mask] = np.maximum(g.temperature[mask], pilot)


def combustion_substep(grid: FireGrid, params: SolverParams, dt: float) -> FireGrid:
    """Single-step reaction: rate A*Y_fuel*Y_O2*exp(-Ea/(R T)), clamped so no
    species goes negative; products split by fixed mass fractions."""
    g = grid.copy()
    _combust_inplace(g, params, dt)
    return g


def _combust_inplace(g: FireGrid, params: SolverParams, dt: float):
    yf, yo2 = g.species["fuel"], g.species["o2"]
    rate = params.arrhenius_a * yf * yo2 * np.exp(
        -params.activation_energy / (params.gas_constant * g.temperature))
    burned = np.minimum(rate * dt, np.minimum(yf, yo2 / params.stoich_ratio))
    burned = np.maximum(burned, 0.0)
    burned[g.solid] = 0.0
    yf -= burned
    yo2 -= params.stoich_ratio * burned
    products = (1.0 + params.stoich_ratio) * burned
    g.species["co2"] += CO2_PRODUCT_FRACTION * products
    g.species["h2o"] += H2O_PRODUCT_FRACTION * products
    g.temperature += params.heat_of_combustion * burned / params.specific_heat
    np.minimum(g.temperature, params.temperature_cap, out=g.temperature)
    g.soot += params.soot_yield * burned * params.gas_density


def buoyancy_substep(grid: FireGrid, params: SolverParams, dt: float) -> FireGrid:
    """Boussinesq buoyancy: vertical velocity += dt*beta*(T - T_amb)*g."""
    g = grid.copy()
    _buoyancy_inplace(g, params, dt)
    return g


def _buoyancy_inplace(g: FireGrid, params: SolverParams, dt: float):
    dv = dt * params.buoyancy_beta * (g.temperature - params.ambient_temperature) * GRAVITY
    dv[g.solid] = 0.0
    g.velocity[..., 2] += dv


def advect_substep(grid: FireGrid, params: SolverParams, dt: float) -> FireGrid:
    g = grid.copy()
    _advect_inplace(g, params, dt)
    return g


def _advect_inplace(g: FireGrid, params: SolverParams, dt: float):
    closed = params.side_boundaries == "wall" and params.top_boundary == "wall"
    if closed:
        before = [float(g.species[s].sum()) for s in SPECIES] + [float(g.soot.sum())]
    stack = np.stack([g.velocity[..., 0], g.velocity[..., 1], g.velocity[..., 2],
                      g.temperature, *(g.species[s] for s in SPECIES), g.soot])
    out = _kernels.advect_fields(stack, g.velocity, g.voxel_size, dt)
    g.velocity = np.stack([out[0], out[1], out[2]], axis=-1)
    g.temperature = out[3]
    for n, name in enumerate(SPECIES):
        g.species[name] = out[4 + n]
    g.soot = out[8]
    if closed:
        # semi-Lagrangian interpolation is not conservative; in a sealed
        # domain restore each scalar's pre-advection total (global fixer)
        fields = [g.species[s] for s in SPECIES] + [g.soot]
        for field, b in zip(fields, before):
            after = float(field.sum())
            if after > 0.0 and b > 0.0:
                field *= b / after


def diffuse_substep(grid: FireGrid, params: SolverParams, dt: float) -> FireGrid:
    g = grid.copy()
    _diffuse_inplace(g, params, dt)
    return g


def _axis_flux_diffuse(field, fluid, k):
    """Explicit flux-form diffusion with zero flux across solid faces and
    domain boundaries; exactly conservative."""
    out = field.copy()
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        open_face = fluid[lo] & fluid[hi]
        flux = k * (field[hi] - field[lo]) * open_face
        out[lo] += flux
        out[hi] -= flux
    return out


def _diffuse_inplace(g: FireGrid, params: SolverParams, dt: float):
    k = params.diffusivity * dt / g.voxel_size**2
    fluid = ~g.solid
    g.temperature = _axis_flux_diffuse(g.temperature, fluid, k)
    for name in SPECIES:
        g.species[name] = _axis_flux_diffuse(g.species[name], fluid, k)
    g.soot = _axis_flux_diffuse(g.soot, fluid, k)
    for a in range(3):
        g.velocity[..., a] = _axis_flux_diffuse(g.velocity[..., a], fluid, k)


def _neighbor_for_poisson(p, axis, side, solid, open_axis):
    """Neighbor pressure values for the 7-point Laplacian. Solid neighbors and
    closed domain faces are Neumann (mirror the center); open faces are
    Dirichlet 0."""
    shifted = np.empty_like(p)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    edge = [slice(None)] * 3
    if side == 0:  # neighbor at index-1
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
        edge[axis] = 0
    else:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
        edge[axis] = -1
    shifted[tuple(dst)] = p[tuple(src)]
    shifted[tuple(edge)] = 0.0 if open_axis else p[tuple(edge)]
    solid_nb = np.empty_like(solid)
    solid_nb[tuple(dst)] = solid[tuple(src)]
    solid_nb[tuple(edge)] = False
    return np.where(solid_nb, p, shifted)


def _boundary_openness(params: SolverParams):
    sides_open = params.side_boundaries == "open"
    top_open = params.top_boundary == "open"
    # (axis, side) -> open?  side 0 is the low face, side 1 the high face
    return {
        (0, 0): sides_open, (0, 1): sides_open,
        (1, 0): sides_open, (1, 1): sides_open,
        (2, 0): False,  # floor is always closed
        (2, 1): top_open,
    }


def _central_gradient(p, axis, solid, openness):
    hi = _neighbor_for_poisson(p, axis, 1, solid, openness[(axis, 1)])
    lo = _neighbor_for_poisson(p, axis, 0, solid, openness[(axis, 0)])
    return hi - lo  # caller divides by 2h


def divergence(g: FireGrid, params: SolverParams) -> np.ndarray:
    """Central-difference divergence with boundary-aware ghost values."""
    openness = _boundary_openness(params)
    h = g.voxel_size
    div = np.zeros_like(g.temperature)
    for a in range(3):
        comp = np.where(g.solid, 0.0, g.velocity[..., a])
        hi = _neighbor_for_velocity(comp, a, 1, g.solid, openness[(a, 1)])
        lo = _neighbor_for_velocity(comp, a, 0, g.solid, openness[(a, 0)])
        div += (hi - lo) / (2.0 * h)
    div[g.solid] = 0.0
    return div


def _neighbor_for_velocity(comp, axis, side, solid, open_axis):
    """Ghost velocities: zero beyond closed faces and inside solids, copied
    beyond open faces."""
    shifted = np.empty_like(comp)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    edge = [slice(None)] * 3
    if side == 0:
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
        edge[axis] = 0
    else:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
        edge[axis] = -1
    shifted[tuple(dst)] = comp[tuple(src)]
    shifted[tuple(edge)] = comp[tuple(edge)] if open_axis else 0.0
    return shifted


def project_incompressible(grid: FireGrid, params: SolverParams) -> FireGrid:
    g = grid.copy()
    _project_inplace(g, params)
    return g


def solve_pressure(g: FireGrid, params: SolverParams):
    """Jacobi solve of the pressure Poisson equation; returns (p, rhs)."""
    h = g.voxel_size
    openness = _boundary_openness(params)
    rhs = divergence(g, params) * h * h
    p = _kernels.jacobi_pressure(
        rhs, g.solid, params.pressure_iters,
        openness[(0, 0)], openness[(0, 1)], openness[(1, 0)], openness[(1, 1)],
        openness[(2, 0)], openness[(2, 1)])
    return p, rhs


def _project_inplace(g: FireGrid, params: SolverParams):
    h = g.voxel_size
    openness = _boundary_openness(params)
    p, _ = solve_pressure(g, params)
    for a in range(3):
        g.velocity[..., a] -= _central_gradient(p, a, g.solid, openness) / (2.0 * h)
    g.velocity[g.solid] = 0.0


def poisson_residual(g: FireGrid, params: SolverParams, p: np.ndarray, rhs: np.ndarray):
    openness = _boundary_openness(params)
    acc = np.zeros_like(p)
    for a in range(3):
        acc += _neighbor_for_poisson(p, a, 0, g.solid, openness[(a, 0)])
        acc += _neighbor_for_poisson(p, a, 1, g.solid, openness[(a, 1)])
    return acc - 6.0 * p - rhs


def apply_boundary_conditions(g: FireGrid, params: SolverParams, dt: float = 0.0) -> None:
    """Clamp fields, relax excess temperature (unresolved mixing losses),
    zero velocity inside solids, and block flow through closed domain faces.
    Mutates in place; called as the final substep."""
    if dt > 0.0 and params.cooling_rate > 0.0:
        decay = math.exp(-params.cooling_rate * dt)
        g.temperature = params.ambient_temperature + decay * (
            g.temperature - params.ambient_temperature)
    np.clip(g.velocity, -params.max_velocity, params.max_velocity, out=g.velocity)
    if params.side_boundaries == "wall":
        g.velocity[0, :, :, 0] = np.maximum(g.velocity[0, :, :, 0], 0.0)
        g.velocity[-1, :, :, 0] = np.minimum(g.velocity[-1, :, :, 0], 0.0)
        g.velocity[:, 0, :, 1] = np.maximum(g.velocity[:, 0, :, 1], 0.0)
        g.velocity[:, -1, :, 1] = np.minimum(g.velocity[:, -1, :, 1], 0.0)
    g.velocity[:, :, 0, 2] = np.maximum(g.velocity[:, :, 0, 2], 0.0)
    if params.top_boundary == "wall":
        g.velocity[:, :, -1, 2] = np.minimum(g.velocity[:, :, -1, 2], 0.0)
    g.velocity[g.solid] = 0.0

    np.clip(g.temperature, params.temperature_floor, params.temperature_cap, out=g.temperature)
    g.temperature[g.solid] = params.ambient_temperature
    total = np.zeros_like(g.temperature)
    for name in SPECIES:
        np.clip(g.species[name], 0.0, 1.0, out=g.species[name])
        total += g.species[name]
    over = total > 1.0
    if over.any():
        scale = np.where(over, 1.0 / np.maximum(total, 1e-300), 1.0)
        for name in SPECIES:
            g.species[name] *= scale
    np.clip(g.soot, 0.0, None, out=g.soot)


def _check_finite(g: FireGrid):
    for name, arr in (("velocity", g.velocity), ("temperature", g.temperature),
                      ("soot", g.soot), *((f"Y_{k}", v) for k, v in g.species.items())):
        if not np.isfinite(arr).all():
            raise SolverDivergence(f"non-finite values in {name}; reduce dt or source intensity")


def cfl_limit(grid: FireGrid, params: SolverParams) -> float:
    return params.cfl * grid.voxel_size / max(grid.max_speed(), 1e-9)


def step(grid: FireGrid, scenario: Scenario, dt: float) -> FireGrid:
    """One solver step; dt must satisfy the CFL bound (see `advance`)."""
    params = scenario.solver
    limit = cfl_limit(grid, params)
    if dt > limit * (1.0 + 1e-12):
        raise CflError(f"dt={dt:.4g}s exceeds CFL limit {limit:.4g}s; subcycle")
    g = grid.copy()
    g.time = grid.time + dt
    _inject_inplace(g, scenario, dt)
    _combust_inplace(g, params, dt)
    _buoyancy_inplace(g, params, dt)
    _advect_inplace(g, params, dt)
    _diffuse_inplace(g, params, dt)
    _project_inplace(g, params)
    apply_boundary_conditions(g, params, dt)
    _check_finite(g)
    return g


def advance(grid: FireGrid, scenario: Scenario, dt: float) -> FireGrid:
    """Advance by dt, subcycling as needed to respect the CFL bound."""
    remaining = dt
    g = grid
    while remaining > 1e-12:
        sub = min(remaining, cfl_limit(g, scenario.solver))
        # avoid a sliver substep at the end
        n = max(1, math.ceil(remaining / sub - 1e-9))
        sub = remaining / n
        g = step(g, scenario, sub)
        remaining -= sub
    return g


def species_mass(g: FireGrid, name: str, rho: float = 1.2) -> float:
    """Total mass of one species in kg (reference-density approximation)."""
    return float(g.species[name].sum()) * rho * g.voxel_size**3
