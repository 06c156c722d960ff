"""Compiled RK4 block steppers for grid sweeps.

A field opts in by returning ``(local, params)`` from ``kernel()``, where
``local(x, y, params)`` is a numba function giving
``(f, g, f_x, f_y, g_x, g_y)``. Fields without a kernel fall back to the
numpy path in :mod:`stabctl.classifier`.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def bvp_local(x, y, p):
    a, b, c, r = p[0], p[1], p[2], p[3]
    return (c * (x - x * x * x / 3.0 + y - r), -(x - a + b * y) / c,
            c * (1.0 - x * x), c, -1.0 / c, -b / c)


@njit(cache=True)
def circle_local(x, y, p):
    s = 1.0 - x * x - y * y
    return (y + x * s, -x + y * s, s - 2.0 * x * x, 1.0 - 2.0 * x * y,
            -1.0 - 2.0 * x * y, s - 2.0 * y * y)


@njit(cache=True)
def poly_local(x, p):
    """Horner evaluation of f and f' for coefficients p (highest degree first)."""
    f = 0.0
    d = 0.0
    for c in p:
        d = d * x + f
        f = f * x + c
    return f, d


@njit(cache=True)
def _builtin_local(kind, x, y, p):
    if kind == 0:
        return bvp_local(x, y, p)
    return circle_local(x, y, p)


@njit(cache=True)
def _builtin_rates(kind, s0, s1, s2, s3, rho, ex, ey, p):
    f, g, fx, fy, gx, gy = _builtin_local(kind, s0, s1, p)
    return (f + ex * s2, g + ey * s3,
            -(rho + fx) * s2 - gx * s3, -fy * s2 - (rho + gy) * s3)


@njit(cache=True)
def _builtin_step(S, h, n, rho, ex, ey, p, kind):
    # same scheme as _make_aug_stepper, compiled once and cached on disk
    hh = 0.5 * h
    h6 = h / 6.0
    for j in range(S.shape[1]):
        x0, x1, x2, x3 = S[0, j], S[1, j], S[2, j], S[3, j]
        for _ in range(n):
            a0, a1, a2, a3 = _builtin_rates(kind, x0, x1, x2, x3, rho, ex, ey, p)
            b0, b1, b2, b3 = _builtin_rates(kind, x0 + hh * a0, x1 + hh * a1, x2 + hh * a2,
                                            x3 + hh * a3, rho, ex, ey, p)
            c0, c1, c2, c3 = _builtin_rates(kind, x0 + hh * b0, x1 + hh * b1, x2 + hh * b2,
                                            x3 + hh * b3, rho, ex, ey, p)
            d0, d1, d2, d3 = _builtin_rates(kind, x0 + h * c0, x1 + h * c1, x2 + h * c2,
                                            x3 + h * c3, rho, ex, ey, p)
            x0 = x0 + h6 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
            x1 = x1 + h6 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
            x2 = x2 + h6 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
            x3 = x3 + h6 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        S[0, j], S[1, j], S[2, j], S[3, j] = x0, x1, x2, x3


@njit(cache=True)
def _poly_step(S, h, n, rho, p):
    hh = 0.5 * h
    h6 = h / 6.0
    for j in range(S.shape[1]):
        x, q = S[0, j], S[1, j]
        for _ in range(n):
            f, d = poly_local(x, p)
            a0, a1 = f + q, -(rho + d) * q
            f, d = poly_local(x + hh * a0, p)
            qb = q + hh * a1
            b0, b1 = f + qb, -(rho + d) * qb
            f, d = poly_local(x + hh * b0, p)
            qc = q + hh * b1
            c0, c1 = f + qc, -(rho + d) * qc
            f, d = poly_local(x + h * c0, p)
            qd = q + h * c1
            d0, d1 = f + qd, -(rho + d) * qd
            x = x + h6 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
            q = q + h6 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        S[0, j], S[1, j] = x, q


_BUILTIN = {bvp_local: 0, circle_local: 1}
_AUG_CACHE = {}
_ONED_CACHE = {poly_local: _poly_step}


def _make_aug_stepper(local):
    @njit(cache=False)
    def rates(s0, s1, s2, s3, rho, ex, ey, p):
        f, g, fx, fy, gx, gy = local(s0, s1, p)
        return (f + ex * s2, g + ey * s3,
                -(rho + fx) * s2 - gx * s3, -fy * s2 - (rho + gy) * s3)

    @njit(cache=False)
    def step(S, h, n, rho, ex, ey, p):
        hh = 0.5 * h
        h6 = h / 6.0
        for j in range(S.shape[1]):
            x0, x1, x2, x3 = S[0, j], S[1, j], S[2, j], S[3, j]
            for _ in range(n):
                a0, a1, a2, a3 = rates(x0, x1, x2, x3, rho, ex, ey, p)
                b0, b1, b2, b3 = rates(x0 + hh * a0, x1 + hh * a1, x2 + hh * a2,
                                       x3 + hh * a3, rho, ex, ey, p)
                c0, c1, c2, c3 = rates(x0 + hh * b0, x1 + hh * b1, x2 + hh * b2,
                                       x3 + hh * b3, rho, ex, ey, p)
                d0, d1, d2, d3 = rates(x0 + h * c0, x1 + h * c1, x2 + h * c2,
                                       x3 + h * c3, rho, ex, ey, p)
                x0 = x0 + h6 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
                x1 = x1 + h6 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
                x2 = x2 + h6 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
                x3 = x3 + h6 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
            S[0, j], S[1, j], S[2, j], S[3, j] = x0, x1, x2, x3

    return step


def _make_oned_stepper(local):
    @njit(cache=False)
    def step(S, h, n, rho, p):
        hh = 0.5 * h
        h6 = h / 6.0
        for j in range(S.shape[1]):
            x, q = S[0, j], S[1, j]
            for _ in range(n):
                f, d = local(x, p)
                a0, a1 = f + q, -(rho + d) * q
                f, d = local(x + hh * a0, p)
                qb = q + hh * a1
                b0, b1 = f + qb, -(rho + d) * qb
                f, d = local(x + hh * b0, p)
                qc = q + hh * b1
                c0, c1 = f + qc, -(rho + d) * qc
                f, d = local(x + h * c0, p)
                qd = q + h * c1
                d0, d1 = f + qd, -(rho + d) * qd
                x = x + h6 * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
                q = q + h6 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
            S[0, j], S[1, j] = x, q

    return step


def aug_block_stepper(sys):
    """Return ``advance(s, h, n) -> s`` for an AugSystem, or None."""
    kern = getattr(sys.field, "kernel", None)
    spec = kern() if kern is not None else None
    if spec is None:
        return None
    local, params = spec
    ex, ey = sys.mode.injection
    p = np.ascontiguousarray(params, dtype=float)
    rho = float(sys.rho)
    kind = _BUILTIN.get(local)
    if kind is not None:
        def advance(s, h, n):
            out = np.ascontiguousarray(s, dtype=float).copy()
            _builtin_step(out, float(h), int(n), rho, float(ex), float(ey), p, kind)
            return out
        return advance
    if local not in _AUG_CACHE:
        _AUG_CACHE[local] = _make_aug_stepper(local)
    step = _AUG_CACHE[local]

    def advance(s, h, n):
        out = np.ascontiguousarray(s, dtype=float).copy()
        step(out, float(h), int(n), rho, float(ex), float(ey), p)
        return out

    return advance


def oned_block_stepper(field, rho):
    kern = getattr(field, "kernel", None)
    spec = kern() if kern is not None else None
    if spec is None:
        return None
    local, params = spec
    if local not in _ONED_CACHE:
        _ONED_CACHE[local] = _make_oned_stepper(local)
    step = _ONED_CACHE[local]
    p = np.ascontiguousarray(params, dtype=float)

    def advance(s, h, n):
        out = np.ascontiguousarray(s, dtype=float).copy()
        step(out, float(h), int(n), float(rho), p)
        return out

    return advance


@njit(cache=True)
def adjacent_segment_distance(z, pts, idx):
    """Min distance from z[i] to the polyline segments touching vertices idx[i].

    ``pts`` is the closed polyline (last row repeats the first).
    """
    n = pts.shape[0] - 1
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        zx, zy = z[i, 0], z[i, 1]
        best = np.inf
        for c in idx[i]:
            for s in ((c - 1) % n, c):
                ax, ay = pts[s, 0], pts[s, 1]
                ex, ey = pts[s + 1, 0] - ax, pts[s + 1, 1] - ay
                wx, wy = zx - ax, zy - ay
                den = ex * ex + ey * ey
                t = 0.0
                if den > 0.0:
                    t = (wx * ex + wy * ey) / den
                    t = min(1.0, max(0.0, t))
                dx, dy = wx - t * ex, wy - t * ey
                d = np.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
        out[i] = best
    return out
