"""Compiled single-trajectory stepping loop.

Mirrors the numpy implementations in ``geometry``, ``potential`` and
``dynamics`` for one state at a time; ``tests/test_dynamics.py`` checks the
two paths against each other.
"""

import math

import numpy as np
from numba import njit

BOUNDARY_TOL2 = 1e-24


@njit(cache=True)
def _even_odd(px, py, starts, ends):
    inside = False
    for k in range(starts.shape[0]):
        ax, ay = starts[k, 0], starts[k, 1]
        bx, by = ends[k, 0], ends[k, 1]
        if (ay > py) != (by > py):
            xc = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < xc:
                inside = not inside
    return inside


@njit(cache=True)
def _closest_boundary_point(px, py, starts, edges, sq_len):
    best = np.inf
    qx, qy = 0.0, 0.0
    for k in range(starts.shape[0]):
        ex, ey = edges[k, 0], edges[k, 1]
        g = ((px - starts[k, 0]) * ex + (py - starts[k, 1]) * ey) / sq_len[k]
        g = min(1.0, max(0.0, g))
        fx = starts[k, 0] + g * ex
        fy = starts[k, 1] + g * ey
        d2 = (px - fx) ** 2 + (py - fy) ** 2
        if d2 < best:
            best = d2
            qx, qy = fx, fy
    return qx, qy, best


@njit(cache=True)
def _penalty(px, py, lam, starts, ends, edges, sq_len):
    if _even_odd(px, py, starts, ends):
        return 0.0, 0.0
    qx, qy, d2 = _closest_boundary_point(px, py, starts, edges, sq_len)
    if d2 <= BOUNDARY_TOL2:
        return 0.0, 0.0
    return (px - qx) / lam, (py - qy) / lam


@njit(cache=True)
def _select_center(px, py, alphas, centers, precs):
    nj = alphas.shape[0]
    if nj == 0:
        return -1
    if nj == 1:
        return 0
    best = -np.inf
    arg = 0
    for j in range(nj):
        dx = px - centers[j, 0]
        dy = py - centers[j, 1]
        bx = precs[j, 0, 0] * dx + precs[j, 0, 1] * dy
        by = precs[j, 1, 0] * dx + precs[j, 1, 1] * dy
        q = dx * bx + dy * by
        nrm = bx * bx + by * by
        if nrm > 0.0:
            val = 2.0 * math.log(2.0) + 2.0 * math.log(alphas[j]) - 2.0 * q + math.log(nrm)
        else:
            val = -np.inf
        if val > best:
            best = val
            arg = j
    return arg


@njit(cache=True)
def _residual_velocity(px, py, l, alphas, centers, precs, penalized, lam, starts, ends, edges, sq_len):
    gx, gy = 0.0, 0.0
    if penalized:
        gx, gy = _penalty(px, py, lam, starts, ends, edges, sq_len)
    for j in range(alphas.shape[0]):
        dx = px - centers[j, 0]
        dy = py - centers[j, 1]
        bx = precs[j, 0, 0] * dx + precs[j, 0, 1] * dy
        by = precs[j, 1, 0] * dx + precs[j, 1, 1] * dy
        e = math.exp(-(dx * bx + dy * by))
        if j == l:
            coef = 2.0 * alphas[j] * (e - 1.0)
        else:
            coef = 2.0 * alphas[j] * e
        gx += coef * bx
        gy += coef * by
    return gx, gy


@njit(cache=True)
def simulate_kernel(u0, h, z, strang, exp_bank, fac_bank, fixed_bank,
                    alphas, centers, precs, penalized, lam, starts, ends, edges, sq_len):
    """Returns (states, failed_step); failed_step is -1 on success."""
    n = z.shape[0]
    out = np.empty((n + 1, 4))
    u = u0.copy()
    out[0] = u
    tmp = np.empty(4)
    eta = np.empty(4)
    first = h if not strang else 0.5 * h
    for k in range(n):
        l = _select_center(u[0], u[1], alphas, centers, precs)
        b = l if l >= 0 else 0
        gx, gy = _residual_velocity(u[0], u[1], l, alphas, centers, precs, penalized, lam,
                                    starts, ends, edges, sq_len)
        tmp[0] = u[0] - fixed_bank[b, 0]
        tmp[1] = u[1] - fixed_bank[b, 1]
        tmp[2] = u[2] - first * gx - fixed_bank[b, 2]
        tmp[3] = u[3] - first * gy - fixed_bank[b, 3]
        for i in range(4):
            acc = 0.0
            noise = 0.0
            for m in range(4):
                acc += exp_bank[b, i, m] * tmp[m]
                noise += fac_bank[b, i, m] * z[k, m]
            eta[i] = noise
            u[i] = acc + fixed_bank[b, i] + eta[i]
        if strang:
            gx, gy = _residual_velocity(u[0], u[1], l, alphas, centers, precs, penalized, lam,
                                        starts, ends, edges, sq_len)
            u[2] -= 0.5 * h * gx
            u[3] -= 0.5 * h * gy
        for i in range(4):
            if not math.isfinite(u[i]):
                return out[: k + 1], k + 1
        out[k + 1] = u
    return out, -1
