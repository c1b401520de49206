"""Volumetric raymarching of the fire grid and depth-aware compositing.

Rays march in fixed half-voxel world steps from the camera. Each sample adds
blackbody emission where the gas is hot and gray extinction from soot;
accumulation is front-to-back and stops at the depth buffer, at near-full
opacity, or when the ray leaves the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .robot import CameraModel
from .wire import ImageMsg

SOOT_EXTINCTION = 120.0  # m^2/kg: sigma_s = SOOT_EXTINCTION * soot_density
FLAME_EXTINCTION = 2.5  # 1/m at full emission strength
FLAME_T_LOW = 600.0  # K, below this only soot contributes
FLAME_T_HIGH = 1700.0
ALPHA_CUTOFF = 0.995
SMOKE_COLOR = np.array([0.28, 0.27, 0.26])

# temperature (K) -> linear RGB, interpolated piecewise
_BLACKBODY_STOPS = np.array([600.0, 900.0, 1100.0, 1400.0, 1700.0])
_BLACKBODY_COLORS = np.array([
    [0.25, 0.01, 0.0],
    [0.95, 0.18, 0.02],
    [1.0, 0.45, 0.05],
    [1.0, 0.75, 0.25],
    [1.0, 0.97, 0.85],
])


class RenderError(ValueError):
    pass


@dataclass
class FireImage:
    width: int
    height: int
    rgba: np.ndarray  # (h, w, 4) float in [0, 1]
    source_seq: int = 0


def blackbody_color(temps: np.ndarray) -> np.ndarray:
    """Piecewise-linear flame color for temperatures in kelvin."""
    t = np.clip(temps, _BLACKBODY_STOPS[0], _BLACKBODY_STOPS[-1])
    out = np.empty(t.shape + (3,))
    for c in range(3):
        out[..., c] = np.interp(t, _BLACKBODY_STOPS, _BLACKBODY_COLORS[:, c])
    return out


def emission_strength(temps: np.ndarray) -> np.ndarray:
    s = np.clip((temps - FLAME_T_LOW) / (FLAME_T_HIGH - FLAME_T_LOW), 0.0, 1.0)
    return s * s


def _sample_fields(grid, pts):
    """Trilinear temperature and soot at world points; zero weight outside."""
    h = grid.voxel_size
    nx, ny, nz = grid.dims
    size = np.array([nx, ny, nz]) * h
    inside = np.all((pts >= 0.0) & (pts <= size), axis=-1)
    g = pts / h - 0.5
    i0 = np.clip(np.floor(g).astype(np.int64), 0, np.array([nx, ny, nz]) - 2)
    f = np.clip(g - i0, 0.0, 1.0)
    ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]

    def tri(field):
        wx, wy, wz = 1 - fx, 1 - fy, 1 - fz
        return (field[ix, iy, iz] * wx * wy * wz
                + field[ix + 1, iy, iz] * fx * wy * wz
                + field[ix, iy + 1, iz] * wx * fy * wz
                + field[ix, iy, iz + 1] * wx * wy * fz
                + field[ix + 1, iy + 1, iz] * fx * fy * wz
                + field[ix + 1, iy, iz + 1] * fx * wy * fz
                + field[ix, iy + 1, iz + 1] * wx * fy * fz
                + field[ix + 1, iy + 1, iz + 1] * fx * fy * fz)

    temp = np.where(inside, tri(grid.temperature), 0.0)
    soot = np.where(inside, tri(grid.soot), 0.0)
    return temp, soot


def raymarch(grid, camera: CameraModel, depth: np.ndarray, source_seq: int = 0) -> FireImage:
    """Render the fire volume against a depth buffer from the camera pose."""
    if depth.shape != (camera.height, camera.width):
        raise RenderError(f"depth resolution {depth.shape} does not match camera "
                          f"{(camera.height, camera.width)}")
    step = grid.voxel_size * 0.5
    dirs = camera.rays().reshape(-1, 3)
    dz = dirs @ camera.forward  # z-rate along each ray
    zlimit = depth.reshape(-1)
    n = len(dirs)

    # march only while a ray can still be inside the domain
    size = np.array(grid.dims) * grid.voxel_size
    max_dist = float(np.linalg.norm(size)) + step
    n_steps = int(np.ceil(max_dist / step))

    rgb = np.zeros((n, 3))
    alpha = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    for k in range(n_steps):
        s = (k + 0.5) * step
        z = s * dz
        active = alive & (z < zlimit)
        if not active.any():
            break
        pts = camera.position + dirs[active] * s
        temp, soot = _sample_fields(grid, pts)
        em = emission_strength(temp)
        sigma_f = FLAME_EXTINCTION * em
        sigma_s = SOOT_EXTINCTION * soot
        sigma = sigma_f + sigma_s
        a_step = 1.0 - np.exp(-sigma * step)
        with np.errstate(invalid="ignore", divide="ignore"):
            w_f = np.where(sigma > 0, sigma_f / np.maximum(sigma, 1e-300), 0.0)
        color = blackbody_color(temp) * w_f[:, None] + SMOKE_COLOR * (1.0 - w_f)[:, None]
        trans = 1.0 - alpha[active]
        contrib = trans * a_step
        rgb[active] += contrib[:, None] * color
        alpha[active] += contrib
        newly_done = np.zeros(n, dtype=bool)
        newly_done[active] = alpha[active] > ALPHA_CUTOFF
        alive &= ~newly_done
    rgba = np.concatenate([rgb, alpha[:, None]], axis=1)
    return FireImage(width=camera.width, height=camera.height,
                     rgba=rgba.reshape(camera.height, camera.width, 4),
                     source_seq=source_seq)


def composite(rgb: np.ndarray, fire: FireImage) -> np.ndarray:
    """Blend the fire image over an RGB frame: out = a*fire + (1-a)*rgb."""
    if rgb.shape[:2] != (fire.height, fire.width):
        raise RenderError("rgb resolution does not match the fire image")
    a = fire.rgba[..., 3:4]
    fire_rgb = np.clip(fire.rgba[..., :3], 0.0, 1.0) * 255.0
    out = a * fire_rgb + (1.0 - a) * rgb.astype(np.float64)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def composite_msg(rgb_msg: ImageMsg, fire: FireImage) -> ImageMsg:
    return ImageMsg(width=rgb_msg.width, height=rgb_msg.height,
                    pixels=composite(rgb_msg.pixels, fire))
