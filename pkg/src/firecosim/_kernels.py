"""Numba kernels for the two solver hot spots: the Jacobi pressure solve and
semi-Lagrangian field gathering. Each output cell is written by exactly one
thread, so results are bit-identical across thread counts.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def jacobi_pressure(rhs, solid, iters,
                    open_xlo, open_xhi, open_ylo, open_yhi, open_zlo, open_zhi):
    """Jacobi iterations on the 7-point Poisson problem. Solid neighbors and
    closed domain faces mirror the center (Neumann); open faces read 0."""
    nx, ny, nz = rhs.shape
    p = np.zeros_like(rhs)
    q = np.zeros_like(rhs)
    for _ in range(iters):
        for i in prange(nx):
            for j in range(ny):
                for k in range(nz):
                    if solid[i, j, k]:
                        q[i, j, k] = 0.0
                        continue
                    c = p[i, j, k]
                    acc = 0.0
                    if i > 0:
                        acc += c if solid[i - 1, j, k] else p[i - 1, j, k]
                    else:
                        acc += 0.0 if open_xlo else c
                    if i < nx - 1:
                        acc += c if solid[i + 1, j, k] else p[i + 1, j, k]
                    else:
                        acc += 0.0 if open_xhi else c
                    if j > 0:
                        acc += c if solid[i, j - 1, k] else p[i, j - 1, k]
                    else:
                        acc += 0.0 if open_ylo else c
                    if j < ny - 1:
                        acc += c if solid[i, j + 1, k] else p[i, j + 1, k]
                    else:
                        acc += 0.0 if open_yhi else c
                    if k > 0:
                        acc += c if solid[i, j, k - 1] else p[i, j, k - 1]
                    else:
                        acc += 0.0 if open_zlo else c
                    if k < nz - 1:
                        acc += c if solid[i, j, k + 1] else p[i, j, k + 1]
                    else:
                        acc += 0.0 if open_zhi else c
                    q[i, j, k] = (acc - rhs[i, j, k]) / 6.0
        p, q = q, p
    return p


@njit(cache=True, parallel=True)
def advect_fields(fields, velocity, h, dt):
    """Backtrace every cell through the velocity field and trilinearly sample
    all fields at once. fields has shape (F, nx, ny, nz)."""
    nf, nx, ny, nz = fields.shape
    out = np.empty_like(fields)
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                gx = i - dt * velocity[i, j, k, 0] / h
                gy = j - dt * velocity[i, j, k, 1] / h
                gz = k - dt * velocity[i, j, k, 2] / h
                if gx < 0.0:
                    gx = 0.0
                elif gx > nx - 1.0:
                    gx = nx - 1.0
                if gy < 0.0:
                    gy = 0.0
                elif gy > ny - 1.0:
                    gy = ny - 1.0
                if gz < 0.0:
                    gz = 0.0
                elif gz > nz - 1.0:
                    gz = nz - 1.0
                i0 = int(gx)
                j0 = int(gy)
                k0 = int(gz)
                if i0 > nx - 2:
                    i0 = nx - 2
                if j0 > ny - 2:
                    j0 = ny - 2
                if k0 > nz - 2:
                    k0 = nz - 2
                if i0 < 0:
                    i0 = 0
                if j0 < 0:
                    j0 = 0
                if k0 < 0:
                    k0 = 0
                fx = gx - i0
                fy = gy - j0
                fz = gz - k0
                wx = 1.0 - fx
                wy = 1.0 - fy
                wz = 1.0 - fz
                for f in range(nf):
                    fld = fields[f]
                    out[f, i, j, k] = (
                        fld[i0, j0, k0] * wx * wy * wz
                        + fld[i0 + 1, j0, k0] * fx * wy * wz
                        + fld[i0, j0 + 1, k0] * wx * fy * wz
                        + fld[i0, j0, k0 + 1] * wx * wy * fz
                        + fld[i0 + 1, j0 + 1, k0] * fx * fy * wz
                        + fld[i0 + 1, j0, k0 + 1] * fx * wy * fz
                        + fld[i0, j0 + 1, k0 + 1] * wx * fy * fz
                        + fld[i0 + 1, j0 + 1, k0 + 1] * fx * fy * fz)
    return out
