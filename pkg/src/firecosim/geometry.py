"""Ray and box intersection helpers shared by radiation transport, the depth
renderer, and robot collision clamping.

All routines are vectorized over rays; boxes are iterated because scenes are
small (tens of boxes at most). Directions are assumed unit length unless
noted. Distances are returned in meters along the ray; misses are +inf.
"""

from __future__ import annotations

import numpy as np

INF = np.inf


def normalize_rows(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(n, eps)


def ray_aabb_entry(origins, dirs, box_min, box_max):
    """Entry distance of N rays into one axis-aligned box.

    Rays starting inside the box report 0. Misses report +inf.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (box_min - origins) * inv
        t2 = (box_max - origins) * inv
    # where dirs == 0 the products above are +-inf or nan; nan means the
    # origin coordinate sits exactly on a slab plane, which counts as inside
    lo = np.fmin(t1, t2)
    hi = np.fmax(t1, t2)
    tmin = np.max(np.where(np.isnan(lo), -INF, lo), axis=-1)
    tmax = np.min(np.where(np.isnan(hi), INF, hi), axis=-1)
    entry = np.where(tmin < 0.0, 0.0, tmin)
    hit = (tmax >= tmin) & (tmax > 0.0)
    return np.where(hit, entry, INF)


def ray_aabb_exit(origins, dirs, box_min, box_max):
    """Exit distance out of one box for rays assumed to start inside it."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (box_min - origins) * inv
        t2 = (box_max - origins) * inv
    hi = np.fmax(t1, t2)
    return np.min(np.where(np.isnan(hi), INF, hi), axis=-1)


def ray_sphere_entry(origins, dirs, center, radius):
    """Entry distance of N rays into a sphere; inside counts as 0."""
    oc = origins - center
    b = np.einsum("ij,ij->i", oc, dirs)
    c0 = np.einsum("ij,ij->i", oc, oc) - radius * radius
    disc = b * b - c0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t_near = -b - sq
    t_far = -b + sq
    t = np.where(t_near >= 0.0, t_near, np.where(t_far >= 0.0, 0.0, INF))
    return np.where(disc >= 0.0, t, INF)


def ray_obb_entry(origins, dirs, center, half_extents, yaw):
    """Entry distance into a z-axis-rotated box (yaw radians)."""
    c, s = np.cos(yaw), np.sin(yaw)
    rel = origins - center
    # rotate world -> local by -yaw about z
    lx = c * rel[:, 0] + s * rel[:, 1]
    ly = -s * rel[:, 0] + c * rel[:, 1]
    lo = np.stack([lx, ly, rel[:, 2]], axis=1)
    dx = c * dirs[:, 0] + s * dirs[:, 1]
    dy = -s * dirs[:, 0] + c * dirs[:, 1]
    ld = np.stack([dx, dy, dirs[:, 2]], axis=1)
    he = np.asarray(half_extents, dtype=float)
    return ray_aabb_entry(lo, ld, -he, he)


def ray_plane_z0(origins, dirs):
    """Distance to the z=0 ground plane for downward-going rays."""
    oz, dz = origins[:, 2], dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -oz / dz
    return np.where((dz < 0.0) & (t >= 0.0), t, INF)


def cosine_hemisphere(n: int, normal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample n unit directions with density proportional to cos(theta) about
    an axis-aligned unit normal."""
    u1 = rng.random(n)
    u2 = rng.random(n)
    z = np.sqrt(1.0 - u1)
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    local = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    axis = int(np.argmax(np.abs(normal)))
    sign = 1.0 if normal[axis] > 0 else -1.0
    out = np.empty_like(local)
    # map local z to the normal axis; the other two axes fill in order
    others = [a for a in (0, 1, 2) if a != axis]
    out[:, axis] = sign * local[:, 2]
    out[:, others[0]] = local[:, 0]
    out[:, others[1]] = local[:, 1]
    return out


def point_in_aabb_2d(p, box_min, box_max) -> bool:
    return box_min[0] <= p[0] <= box_max[0] and box_min[1] <= p[1] <= box_max[1]
