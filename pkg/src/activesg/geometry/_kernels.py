# Numba kernels for voxel traversal (Amanatides & Woo). All coordinates are in
# voxel units relative to the grid origin; flat index = (i * ny + j) * nz + k.
import math

import numpy as np
from numba import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2


@njit(cache=True)
def integrate_points(cells, start, ends):
    nx, ny, nz = cells.shape
    sx = min(max(int(math.floor(start[0])), 0), nx - 1)
    sy = min(max(int(math.floor(start[1])), 0), ny - 1)
    sz = min(max(int(math.floor(start[2])), 0), nz - 1)
    for k in range(ends.shape[0]):
        ex = min(max(int(math.floor(ends[k, 0])), 0), nx - 1)
        ey = min(max(int(math.floor(ends[k, 1])), 0), ny - 1)
        ez = min(max(int(math.floor(ends[k, 2])), 0), nz - 1)
        dx = ends[k, 0] - start[0]
        dy = ends[k, 1] - start[1]
        dz = ends[k, 2] - start[2]
        ix, iy, iz = sx, sy, sz
        # remaining steps per axis; an exhausted axis is never stepped again so
        # the walk always terminates exactly at the end voxel
        rx, ry, rz = abs(ex - ix), abs(ey - iy), abs(ez - iz)
        stx = 1 if ex > ix else -1
        sty = 1 if ey > iy else -1
        stz = 1 if ez > iz else -1
        inf = np.inf
        if rx > 0 and dx != 0.0:
            tdx = abs(1.0 / dx)
            tmx = ((ix + 1 - start[0]) / dx) if dx > 0 else ((ix - start[0]) / dx)
        else:
            tdx = inf
            tmx = inf if rx == 0 else 0.0
        if ry > 0 and dy != 0.0:
            tdy = abs(1.0 / dy)
            tmy = ((iy + 1 - start[1]) / dy) if dy > 0 else ((iy - start[1]) / dy)
        else:
            tdy = inf
            tmy = inf if ry == 0 else 0.0
        if rz > 0 and dz != 0.0:
            tdz = abs(1.0 / dz)
            tmz = ((iz + 1 - start[2]) / dz) if dz > 0 else ((iz - start[2]) / dz)
        else:
            tdz = inf
            tmz = inf if rz == 0 else 0.0
        remaining = rx + ry + rz
        while remaining > 1:
            if tmx <= tmy and tmx <= tmz:
                ix += stx
                rx -= 1
                tmx = tmx + tdx if rx > 0 else inf
            elif tmy <= tmz:
                iy += sty
                ry -= 1
                tmy = tmy + tdy if ry > 0 else inf
            else:
                iz += stz
                rz -= 1
                tmz = tmz + tdz if rz > 0 else inf
            remaining -= 1
            if cells[ix, iy, iz] != OCCUPIED:
                cells[ix, iy, iz] = FREE
        cells[ex, ey, ez] = OCCUPIED


@njit(cache=True)
def _cast(occ, mask, touched, nt, full, ox, oy, oz, dx, dy, dz, nx, ny, nz, tlim):
    ix = int(math.floor(ox))
    iy = int(math.floor(oy))
    iz = int(math.floor(oz))
    if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
        return nt
    inf = np.inf
    if dx > 0:
        stx, tdx, tmx = 1, 1.0 / dx, (ix + 1 - ox) / dx
    elif dx < 0:
        stx, tdx, tmx = -1, -1.0 / dx, (ix - ox) / dx
    else:
        stx, tdx, tmx = 0, inf, inf
    if dy > 0:
        sty, tdy, tmy = 1, 1.0 / dy, (iy + 1 - oy) / dy
    elif dy < 0:
        sty, tdy, tmy = -1, -1.0 / dy, (iy - oy) / dy
    else:
        sty, tdy, tmy = 0, inf, inf
    if dz > 0:
        stz, tdz, tmz = 1, 1.0 / dz, (iz + 1 - oz) / dz
    elif dz < 0:
        stz, tdz, tmz = -1, -1.0 / dz, (iz - oz) / dz
    else:
        stz, tdz, tmz = 0, inf, inf
    alive = full
    while True:
        v = (ix * ny + iy) * nz + iz
        if mask[v] == 0:
            touched[nt] = v
            nt += 1
        mask[v] |= alive
        alive &= ~occ[v]
        if alive == 0:
            break
        if tmx <= tmy and tmx <= tmz:
            t = tmx
            ix += stx
            tmx += tdx
            if ix < 0 or ix >= nx:
                break
        elif tmy <= tmz:
            t = tmy
            iy += sty
            tmy += tdy
            if iy < 0 or iy >= ny:
                break
        else:
            t = tmz
            iz += stz
            tmz += tdz
            if iz < 0 or iz >= nz:
                break
        if t >= tlim:
            break
    return nt


def touched_capacity(n_rays, tlim, nvox):
    return int(min(nvox, n_rays * (int(1.8 * tlim) + 4)) + 1)


@njit(cache=True)
def cast_from(occ, full, dims, origin, rot, dirs, tlim, cap):
    """Voxels reached from one pose; returns (flat indices, sample-reach masks) in first-touch order."""
    nx, ny, nz = dims[0], dims[1], dims[2]
    mask = np.zeros(nx * ny * nz, np.int64)
    touched = np.empty(cap, np.int64)
    nt = 0
    for r in range(dirs.shape[0]):
        d0, d1, d2 = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        dx = rot[0, 0] * d0 + rot[0, 1] * d1 + rot[0, 2] * d2
        dy = rot[1, 0] * d0 + rot[1, 1] * d1 + rot[1, 2] * d2
        dz = rot[2, 0] * d0 + rot[2, 1] * d1 + rot[2, 2] * d2
        nt = _cast(occ, mask, touched, nt, full, origin[0], origin[1], origin[2], dx, dy, dz, nx, ny, nz, tlim)
    idx = touched[:nt].copy()
    masks = np.empty(nt, np.int64)
    for k in range(nt):
        masks[k] = mask[idx[k]]
    return idx, masks


@njit(cache=True)
def score_poses(occ, full, weights, dims, origins, rots, dirs, tlim, cap):
    """Sum ``weights`` over voxels reached under every sample bit, per pose."""
    nx, ny, nz = dims[0], dims[1], dims[2]
    mask = np.zeros(nx * ny * nz, np.int64)
    touched = np.empty(cap, np.int64)
    n = origins.shape[0]
    scores = np.zeros(n)
    for c in range(n):
        nt = 0
        for r in range(dirs.shape[0]):
            d0, d1, d2 = dirs[r, 0], dirs[r, 1], dirs[r, 2]
            dx = rots[c, 0, 0] * d0 + rots[c, 0, 1] * d1 + rots[c, 0, 2] * d2
            dy = rots[c, 1, 0] * d0 + rots[c, 1, 1] * d1 + rots[c, 1, 2] * d2
            dz = rots[c, 2, 0] * d0 + rots[c, 2, 1] * d1 + rots[c, 2, 2] * d2
            nt = _cast(occ, mask, touched, nt, full, origins[c, 0], origins[c, 1], origins[c, 2], dx, dy, dz, nx, ny, nz, tlim)
        s = 0.0
        for k in range(nt):
            v = touched[k]
            if mask[v] == full:
                s += weights[v]
            mask[v] = 0
        scores[c] = s
    return scores
