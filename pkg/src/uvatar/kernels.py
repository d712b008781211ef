"""Hot numeric kernels with numba and pure-numpy implementations.

The capsule rasterizer and the UV texel scatter dominate the interactive
loop, so both carry an ``@njit`` build next to a vectorized numpy build.
Set ``UVATAR_NUMBA=0`` to force the numpy path (useful on machines where
numba is unavailable or for benchmarking; see benchmarks/bench_kernels.py).

Both paths evaluate the same per-element formulas in the same order so
their discrete outputs (part ids, texel indices, scatter winners) agree;
floats agree to within an ulp.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("UVATAR_NUMBA", "").strip().lower()
if _flag in ("0", "false", "off", "no"):
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        NUMBA_ENABLED = False

ACTIVE_PATH = "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Capsule rasterizer.
#
# Capsules are given in camera space already scaled to pixel units:
# endpoints (ax, ay, az) / (bx, by, bz), radius r.  Larger z is closer to
# the camera.  For every covered pixel we recover the front surface point,
# rotate its radial offset into the bone-local frame (rows of M: local x,
# bone axis, local front) and derive the texel column from the angle around
# the bone and the texel row from the position along it.
# ---------------------------------------------------------------------------

def _raster_np(ax, ay, az, bx, by, bz, rr, part, M, r0, r1, c0, c1, flip, h, w):
    zbuf = np.full((h, w), -1e30, dtype=np.float32)
    pid = np.full((h, w), -1, dtype=np.int8)
    uf = np.full((h, w), -1.0, dtype=np.float32)
    vf = np.full((h, w), -1.0, dtype=np.float32)
    for k in range(ax.shape[0]):
        lox = max(int(math.floor(min(ax[k], bx[k]) - rr[k])), 0)
        hix = min(int(math.ceil(max(ax[k], bx[k]) + rr[k])), w - 1)
        loy = max(int(math.floor(min(ay[k], by[k]) - rr[k])), 0)
        hiy = min(int(math.ceil(max(ay[k], by[k]) + rr[k])), h - 1)
        if lox > hix or loy > hiy:
            continue
        ys, xs = np.mgrid[loy:hiy + 1, lox:hix + 1]
        pcx = xs + 0.5
        pcy = ys + 0.5
        dx = bx[k] - ax[k]
        dy = by[k] - ay[k]
        len2 = dx * dx + dy * dy
        if len2 > 0.0:
            t = ((pcx - ax[k]) * dx + (pcy - ay[k]) * dy) / len2
        else:
            t = np.zeros_like(pcx)
        tc = np.minimum(np.maximum(t, 0.0), 1.0)
        ex = ax[k] + tc * dx
        ey = ay[k] + tc * dy
        ddx = pcx - ex
        ddy = pcy - ey
        d2 = ddx * ddx + ddy * ddy
        r2 = rr[k] * rr[k]
        inside = d2 <= r2
        hh = np.sqrt(np.maximum(r2 - d2, 0.0))
        zs = (az[k] + tc * (bz[k] - az[k]) + hh).astype(np.float32)
        zview = zbuf[loy:hiy + 1, lox:hix + 1]
        win = inside & (zs > zview)
        if not win.any():
            continue
        xl = M[k, 0, 0] * ddx + M[k, 0, 1] * ddy + M[k, 0, 2] * hh
        zl = M[k, 2, 0] * ddx + M[k, 2, 1] * ddy + M[k, 2, 2] * hh
        den = np.abs(xl) + np.abs(zl)
        xn = np.where(den > 0.0, xl / np.where(den > 0.0, den, 1.0), 0.0)
        wp = float(c1[k] - c0[k])
        hw = wp / 2.0
        cf_front = hw * (0.5 * (xn + 1.0))
        cf = np.where(zl >= 0.0, cf_front, wp - cf_front)
        cf = np.minimum(np.maximum(cf, 0.0), wp - 1e-3)
        ufk = (c0[k] + cf).astype(np.float32)
        tv = 1.0 - tc if flip[k] else tc
        vspan = float(r1[k] - r0[k])
        vfk = (r0[k] + np.minimum(np.maximum(tv * vspan, 0.0), vspan - 1e-3)).astype(np.float32)
        zview[win] = zs[win]
        pview = pid[loy:hiy + 1, lox:hix + 1]
        pview[win] = part[k]
        uview = uf[loy:hiy + 1, lox:hix + 1]
        uview[win] = ufk[win]
        vview = vf[loy:hiy + 1, lox:hix + 1]
        vview[win] = vfk[win]
    return zbuf, pid, uf, vf


def _raster_scalar_source():
    # Shared scalar kernel body; compiled by numba below.
    def impl(ax, ay, az, bx, by, bz, rr, part, M, r0, r1, c0, c1, flip, zbuf, pid, uf, vf):
        h, w = zbuf.shape
        for k in range(ax.shape[0]):
            rk = rr[k]
            lox = max(int(math.floor(min(ax[k], bx[k]) - rk)), 0)
            hix = min(int(math.ceil(max(ax[k], bx[k]) + rk)), w - 1)
            loy = max(int(math.floor(min(ay[k], by[k]) - rk)), 0)
            hiy = min(int(math.ceil(max(ay[k], by[k]) + rk)), h - 1)
            dx = bx[k] - ax[k]
            dy = by[k] - ay[k]
            len2 = dx * dx + dy * dy
            r2 = rk * rk
            wp = float(c1[k] - c0[k])
            hw = wp / 2.0
            vspan = float(r1[k] - r0[k])
            for py in range(loy, hiy + 1):
                pcy = py + 0.5
                for px in range(lox, hix + 1):
                    pcx = px + 0.5
                    if len2 > 0.0:
                        t = ((pcx - ax[k]) * dx + (pcy - ay[k]) * dy) / len2
                    else:
                        t = 0.0
                    tc = min(max(t, 0.0), 1.0)
                    ex = ax[k] + tc * dx
                    ey = ay[k] + tc * dy
                    ddx = pcx - ex
                    ddy = pcy - ey
                    d2 = ddx * ddx + ddy * ddy
                    if d2 > r2:
                        continue
                    hh = math.sqrt(max(r2 - d2, 0.0))
                    zs = np.float32(az[k] + tc * (bz[k] - az[k]) + hh)
                    if zs <= zbuf[py, px]:
                        continue
                    xl = M[k, 0, 0] * ddx + M[k, 0, 1] * ddy + M[k, 0, 2] * hh
                    zl = M[k, 2, 0] * ddx + M[k, 2, 1] * ddy + M[k, 2, 2] * hh
                    den = abs(xl) + abs(zl)
                    xn = xl / den if den > 0.0 else 0.0
                    cf_front = hw * (0.5 * (xn + 1.0))
                    cf = cf_front if zl >= 0.0 else wp - cf_front
                    cf = min(max(cf, 0.0), wp - 1e-3)
                    tv = 1.0 - tc if flip[k] else tc
                    vv = min(max(tv * vspan, 0.0), vspan - 1e-3)
                    zbuf[py, px] = zs
                    pid[py, px] = part[k]
                    uf[py, px] = np.float32(c0[k] + cf)
                    vf[py, px] = np.float32(r0[k] + vv)
    return impl


if NUMBA_ENABLED:
    _raster_nb_core = njit(cache=True)(_raster_scalar_source())

    def _raster_nb(ax, ay, az, bx, by, bz, rr, part, M, r0, r1, c0, c1, flip, h, w):
        zbuf = np.full((h, w), -1e30, dtype=np.float32)
        pid = np.full((h, w), -1, dtype=np.int8)
        uf = np.full((h, w), -1.0, dtype=np.float32)
        vf = np.full((h, w), -1.0, dtype=np.float32)
        _raster_nb_core(ax, ay, az, bx, by, bz, rr, part, M, r0, r1, c0, c1, flip,
                        zbuf, pid, uf, vf)
        return zbuf, pid, uf, vf
else:
    _raster_nb = None


def rasterize(caps: dict, h: int, w: int, path: str | None = None):
    """Rasterize capsules into (zbuf, part, uf, vf) buffers.

    ``caps`` holds float64 arrays ax..bz, rr, M (k,3,3) plus int arrays
    part, r0, r1, c0, c1 and bool flip.  ``uf``/``vf`` are continuous
    texel coordinates; zbuf is -1e30 and part is -1 on background.
    """
    args = (caps["ax"], caps["ay"], caps["az"], caps["bx"], caps["by"], caps["bz"],
            caps["rr"], caps["part"], caps["M"], caps["r0"], caps["r1"],
            caps["c0"], caps["c1"], caps["flip"], h, w)
    impl = path or ACTIVE_PATH
    if impl == "numba" and _raster_nb is not None:
        return _raster_nb(*args)
    return _raster_np(*args)


# ---------------------------------------------------------------------------
# Depth-resolved scatter: pick, per UV texel, the closest source pixel.
# ---------------------------------------------------------------------------

def _scatter_np(tv, tu, depth, pix, h_uv, w_uv):
    lin = tv * w_uv + tu
    order = np.lexsort((pix, depth, lin))
    lin_sorted = lin[order]
    first = np.ones(lin_sorted.shape, dtype=bool)
    first[1:] = lin_sorted[1:] != lin_sorted[:-1]
    out = np.full(h_uv * w_uv, -1, dtype=np.int64)
    out[lin_sorted[first]] = pix[order][first]
    return out.reshape(h_uv, w_uv)


def _scatter_scalar_source():
    def impl(tv, tu, depth, pix, out, best):
        for i in range(tv.shape[0]):
            r = tv[i]
            c = tu[i]
            if out[r, c] < 0 or depth[i] < best[r, c]:
                out[r, c] = pix[i]
                best[r, c] = depth[i]
    return impl


if NUMBA_ENABLED:
    _scatter_nb_core = njit(cache=True)(_scatter_scalar_source())

    def _scatter_nb(tv, tu, depth, pix, h_uv, w_uv):
        out = np.full((h_uv, w_uv), -1, dtype=np.int64)
        best = np.full((h_uv, w_uv), np.inf, dtype=np.float32)
        _scatter_nb_core(tv, tu, depth, pix, out, best)
        return out
else:
    _scatter_nb = None


def scatter(tv, tu, depth, pix, h_uv, w_uv, path: str | None = None):
    """Winner-per-texel scatter: smallest depth wins, earliest pixel on ties."""
    impl = path or ACTIVE_PATH
    if impl == "numba" and _scatter_nb is not None:
        return _scatter_nb(tv, tu, depth, pix, h_uv, w_uv)
    return _scatter_np(tv, tu, depth, pix, h_uv, w_uv)


def available_paths():
    paths = ["numpy"]
    if NUMBA_ENABLED:
        paths.append("numba")
    return paths
