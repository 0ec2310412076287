"""Numba path-tracing kernel.

Random numbers come from a stateless hash of ``(seed, pixel, sample,
dimension)``, so every sample path is reproducible independently of thread
scheduling and of which other samples are traced in the same batch.
"""

from __future__ import annotations

import math
import os

import numba as nb
import numpy as np

# the TBB layer probes (and warns about) the system TBB; the built-in pool is enough here
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "workqueue"

INV_PI = 1.0 / math.pi
RAY_EPS = 1e-4
DIMS_PER_BOUNCE = 8

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_G = np.uint64(0x9E3779B97F4A7C15)
_K1 = np.uint64(0xD1B54A32D192ED03)
_K2 = np.uint64(0xABC98388FB8FAC03)
_K3 = np.uint64(0x8CB92BA72F3D8DD7)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


@nb.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def hash_uniform(seed, pixel, sample, dim):
    """Uniform double in [0, 1) from a 4-component counter (splitmix64 finaliser chain)."""
    h = _mix(np.uint64(seed) + _G)
    h = _mix(h ^ (np.uint64(pixel) * _K1))
    h = _mix(h ^ (np.uint64(sample) * _K2))
    h = _mix(h ^ (np.uint64(dim) * _K3))
    return float(h >> _S11) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _intersect(ox, oy, oz, dx, dy, dz, origin, eu, ev, normal, wvec, dvals, tmax):
    best_t = tmax
    best_q = -1
    for q in range(origin.shape[0]):
        nx, ny, nz = normal[q, 0], normal[q, 1], normal[q, 2]
        denom = nx * dx + ny * dy + nz * dz
        if abs(denom) < 1e-12:
            continue
        t = (dvals[q] - (nx * ox + ny * oy + nz * oz)) / denom
        if t <= RAY_EPS or t >= best_t:
            continue
        px = ox + t * dx - origin[q, 0]
        py = oy + t * dy - origin[q, 1]
        pz = oz + t * dz - origin[q, 2]
        # barycentric-style coordinates on the parallelogram
        ux, uy, uz = eu[q, 0], eu[q, 1], eu[q, 2]
        vx, vy, vz = ev[q, 0], ev[q, 1], ev[q, 2]
        wx, wy, wz = wvec[q, 0], wvec[q, 1], wvec[q, 2]
        a = wx * (py * vz - pz * vy) + wy * (pz * vx - px * vz) + wz * (px * vy - py * vx)
        if a < 0.0 or a > 1.0:
            continue
        b = wx * (uy * pz - uz * py) + wy * (uz * px - ux * pz) + wz * (ux * py - uy * px)
        if b < 0.0 or b > 1.0:
            continue
        best_t = t
        best_q = q
    return best_q, best_t


@nb.njit(cache=True)
def _trace_one(
    ox, oy, oz, dx, dy, dz,
    origin, eu, ev, normal, wvec, dvals, albedo, emission,
    lights, light_cdf, light_area_total,
    seed, pixel, sample, max_depth, nee, out,
):
    lr = 0.0
    lg = 0.0
    lb = 0.0
    br = 1.0
    bg = 1.0
    bb = 1.0
    for depth in range(max_depth):
        q, t = _intersect(ox, oy, oz, dx, dy, dz, origin, eu, ev, normal, wvec, dvals, 1e30)
        if q < 0:
            break
        px = ox + t * dx
        py = oy + t * dy
        pz = oz + t * dz
        nx, ny, nz = normal[q, 0], normal[q, 1], normal[q, 2]
        cos_in = nx * dx + ny * dy + nz * dz
        if cos_in < 0.0 and (depth == 0 or not nee):
            lr += br * emission[q, 0]
            lg += bg * emission[q, 1]
            lb += bb * emission[q, 2]
        ar, ag, ab = albedo[q, 0], albedo[q, 1], albedo[q, 2]
        if ar == 0.0 and ag == 0.0 and ab == 0.0:
            break
        if depth == max_depth - 1:
            break
        if cos_in > 0.0:
            nx, ny, nz = -nx, -ny, -nz
        base = depth * DIMS_PER_BOUNCE
        if nee:
            r0 = hash_uniform(seed, pixel, sample, base + 0)
            k = 0
            while k < lights.shape[0] - 1 and light_cdf[k] < r0:
                k += 1
            lq = lights[k]
            s1 = hash_uniform(seed, pixel, sample, base + 1)
            s2 = hash_uniform(seed, pixel, sample, base + 2)
            lx = origin[lq, 0] + s1 * eu[lq, 0] + s2 * ev[lq, 0]
            ly = origin[lq, 1] + s1 * eu[lq, 1] + s2 * ev[lq, 1]
            lz = origin[lq, 2] + s1 * eu[lq, 2] + s2 * ev[lq, 2]
            wx, wy, wz = lx - px, ly - py, lz - pz
            d2 = wx * wx + wy * wy + wz * wz
            dist = math.sqrt(d2)
            wx /= dist
            wy /= dist
            wz /= dist
            cos_s = nx * wx + ny * wy + nz * wz
            cos_l = -(normal[lq, 0] * wx + normal[lq, 1] * wy + normal[lq, 2] * wz)
            if cos_s > 0.0 and cos_l > 0.0:
                sq, _ = _intersect(
                    px, py, pz, wx, wy, wz, origin, eu, ev, normal, wvec, dvals, dist * (1.0 - 1e-6)
                )
                if sq < 0:
                    g = cos_s * cos_l / d2 * light_area_total * INV_PI
                    lr += br * ar * emission[lq, 0] * g
                    lg += bg * ag * emission[lq, 1] * g
                    lb += bb * ab * emission[lq, 2] * g
        # cosine-weighted hemisphere sample around the shading normal
        u1 = hash_uniform(seed, pixel, sample, base + 3)
        u2 = hash_uniform(seed, pixel, sample, base + 4)
        r = math.sqrt(u1)
        phi = 2.0 * math.pi * u2
        lx_ = r * math.cos(phi)
        ly_ = r * math.sin(phi)
        lz_ = math.sqrt(max(0.0, 1.0 - u1))
        # orthonormal basis (Frisvad / Duff et al.)
        sign = 1.0 if nz >= 0.0 else -1.0
        a_ = -1.0 / (sign + nz)
        b_ = nx * ny * a_
        tx, ty, tz = 1.0 + sign * nx * nx * a_, sign * b_, -sign * nx
        sx, sy, sz = b_, sign + ny * ny * a_, -ny
        dx = lx_ * tx + ly_ * sx + lz_ * nx
        dy = lx_ * ty + ly_ * sy + lz_ * ny
        dz = lx_ * tz + ly_ * sz + lz_ * nz
        ox, oy, oz = px, py, pz
        br *= ar
        bg *= ag
        bb *= ab
    out[0] = lr
    out[1] = lg
    out[2] = lb


@nb.njit(cache=True, parallel=True)
def trace_samples(
    pix_x, pix_y, sub_u, sub_v, sample_ids,
    cam, origin, eu, ev, normal, wvec, dvals, albedo, emission,
    lights, light_cdf, light_area_total,
    seed, max_depth, nee, clamp,
):
    """Radiance for camera rays through pixel ``(pix_x, pix_y)`` at offsets ``(sub_u, sub_v)``.

    Offsets are in the pixel window ``[-1/2, 1/2]^2`` (u to the right, v
    downwards).  Returns an ``(N, 3)`` array.
    """
    n = pix_x.shape[0]
    res = np.empty((n, 3))
    cx, cy, cz = cam[0], cam[1], cam[2]
    tan_half = cam[12]
    width = cam[13]
    height = cam[14]
    aspect = width / height
    for i in nb.prange(n):
        sx = (2.0 * (pix_x[i] + 0.5 + sub_u[i]) / width - 1.0) * tan_half * aspect
        sy = (1.0 - 2.0 * (pix_y[i] + 0.5 + sub_v[i]) / height) * tan_half
        dx = cam[3] + sx * cam[6] + sy * cam[9]
        dy = cam[4] + sx * cam[7] + sy * cam[10]
        dz = cam[5] + sx * cam[8] + sy * cam[11]
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        pixel = pix_y[i] * int(width) + pix_x[i]
        out = np.empty(3)
        _trace_one(
            cx, cy, cz, dx / norm, dy / norm, dz / norm,
            origin, eu, ev, normal, wvec, dvals, albedo, emission,
            lights, light_cdf, light_area_total,
            seed, pixel, sample_ids[i], max_depth, nee, out,
        )
        for c in range(3):
            v = out[c]
            if v > clamp:
                v = clamp
            res[i, c] = v
    return res


@nb.njit(cache=True, parallel=True)
def first_hits(pix_x, pix_y, sub_u, sub_v, cam, origin, eu, ev, normal, wvec, dvals):
    """Index of the primitive seen first by each camera ray (-1 for a miss)."""
    n = pix_x.shape[0]
    res = np.empty(n, dtype=np.int64)
    tan_half = cam[12]
    width = cam[13]
    height = cam[14]
    aspect = width / height
    for i in nb.prange(n):
        sx = (2.0 * (pix_x[i] + 0.5 + sub_u[i]) / width - 1.0) * tan_half * aspect
        sy = (1.0 - 2.0 * (pix_y[i] + 0.5 + sub_v[i]) / height) * tan_half
        dx = cam[3] + sx * cam[6] + sy * cam[9]
        dy = cam[4] + sx * cam[7] + sy * cam[10]
        dz = cam[5] + sx * cam[8] + sy * cam[11]
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        q, _ = _intersect(
            cam[0], cam[1], cam[2], dx / norm, dy / norm, dz / norm, origin, eu, ev, normal, wvec, dvals, 1e30
        )
        res[i] = q
    return res
