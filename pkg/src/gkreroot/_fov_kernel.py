"""Compiled feature-counting kernels over a bucketed feature grid."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def count_visible(poses, pts, cell_start, origin_n, origin_e, cell, n_rows, n_cols, radius, cos_half, cap):
    """Number of features inside each pose's sector, stopping early at ``cap``.

    ``pts`` are feature positions sorted by grid cell and ``cell_start`` the
    CSR offsets (row-major, ``n_rows * n_cols + 1`` entries).
    """
    m = poses.shape[0]
    out = np.zeros(m, dtype=np.int64)
    r2 = radius * radius + 1e-9
    for i in range(m):
        pn = poses[i, 0]
        pe = poses[i, 1]
        ch = math.cos(poses[i, 2])
        sh = math.sin(poses[i, 2])
        r0 = int(math.floor((pn - radius - origin_n) / cell))
        r1 = int(math.floor((pn + radius - origin_n) / cell))
        c0 = int(math.floor((pe - radius - origin_e) / cell))
        c1 = int(math.floor((pe + radius - origin_e) / cell))
        if r0 < 0:
            r0 = 0
        if c0 < 0:
            c0 = 0
        if r1 > n_rows - 1:
            r1 = n_rows - 1
        if c1 > n_cols - 1:
            c1 = n_cols - 1
        cnt = 0
        for r in range(r0, r1 + 1):
            if cnt >= cap:
                break
            for c in range(c0, c1 + 1):
                k = r * n_cols + c
                for j in range(cell_start[k], cell_start[k + 1]):
                    dn = pts[j, 0] - pn
                    de = pts[j, 1] - pe
                    d2 = dn * dn + de * de
                    if d2 > r2:
                        continue
                    if dn * ch + de * sh >= math.sqrt(d2) * cos_half - 1e-9:
                        cnt += 1
                if cnt >= cap:
                    break
        out[i] = cnt
    return out



@njit(cache=True)
def band_membership(states, orbits, radius_tol, heading_tol):
    """Row of ``orbits`` ((k, 3): center north, center east, radius) whose band holds each state.

    -1 means no band, -2 means more than one band.
    """
    two_pi = 2.0 * math.pi
    out = np.full(states.shape[0], -1, dtype=np.int64)
    for i in range(states.shape[0]):
        for j in range(orbits.shape[0]):
            dn = states[i, 0] - orbits[j, 0]
            de = states[i, 1] - orbits[j, 1]
            if abs(math.hypot(dn, de) - orbits[j, 2]) > radius_tol:
                continue
            tangent = math.atan2(de, dn) - math.pi / 2
            dpsi = abs((states[i, 2] - tangent + math.pi) % two_pi - math.pi)
            if dpsi <= heading_tol:
                out[i] = j if out[i] == -1 else -2
    return out
