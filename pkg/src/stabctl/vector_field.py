"""Planar vector fields with analytic first and second derivatives.

Every field evaluates componentwise on broadcastable arrays, so the same
object serves single-point analysis and batched grid integration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PlanarField:
    """Smooth planar field F = (f, g) with exact derivatives.

    Subclasses implement :meth:`eval`, :meth:`jac` and
    :meth:`second_partials` on arrays ``x, y`` of any common shape. Fields
    are immutable value objects (and picklable, which the parallel sweep
    relies on).
    """

    name: str = "planar"

    def eval(self, x, y):
        """Return ``(f, g)``."""
        raise NotImplementedError

    def jac(self, x, y):
        """Return ``(f_x, f_y, g_x, g_y)``."""
        raise NotImplementedError

    def second_partials(self, x, y):
        """Return ``(f_xx, f_xy, f_yy, g_xx, g_xy, g_yy)``."""
        raise NotImplementedError

    # point-wise conveniences
    def F(self, z) -> np.ndarray:
        f, g = self.eval(z[0], z[1])
        return np.array([f, g], dtype=float)

    def DF(self, z) -> np.ndarray:
        fx, fy, gx, gy = np.broadcast_arrays(*self.jac(z[0], z[1]))
        return np.array([[fx, fy], [gx, gy]], dtype=float)

    def default_box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (-3.0, 3.0), (-3.0, 3.0)

    def kernel(self):
        """Optional compiled point evaluator for sweeps; see :mod:`stabctl.kernels`."""
        return None


@dataclass(frozen=True)
class BvpParams:
    a: float = 0.7
    b: float = 0.8
    c: float = 3.0
    r: float = 0.342

    def __post_init__(self):
        if self.c == 0:
            raise ValueError("BvP parameter c must be nonzero")


@dataclass(frozen=True)
class BvpField(PlanarField):
    """Bonhoeffer-van der Pol oscillator.

    f = c (x - x^3/3 + y - r),  g = -(x - a + b y) / c
    """

    params: BvpParams = BvpParams()
    name: str = "bvp"

    def eval(self, x, y):
        a, b, c, r = self.params.a, self.params.b, self.params.c, self.params.r
        return c * (x - x * x * x / 3.0 + y - r), -(x - a + b * y) / c

    def jac(self, x, y):
        b, c = self.params.b, self.params.c
        one = np.ones_like(np.asarray(x, dtype=float))
        return c * (1.0 - x * x), c * one, -one / c, -b * one / c

    def second_partials(self, x, y):
        c = self.params.c
        zero = np.zeros_like(np.asarray(x, dtype=float))
        return -2.0 * c * x, zero, zero, zero, zero, zero

    def default_box(self):
        return (-4.0, 4.0), (-6.0, 6.0)

    def kernel(self):
        from .kernels import bvp_local
        p = self.params
        return bvp_local, np.array([p.a, p.b, p.c, p.r])


@dataclass(frozen=True)
class CircleField(PlanarField):
    """Radial normal form with the unit circle as stable cycle of period 2*pi."""

    name: str = "circle"

    def eval(self, x, y):
        s = 1.0 - x * x - y * y
        return y + x * s, -x + y * s

    def jac(self, x, y):
        s = 1.0 - x * x - y * y
        return s - 2 * x * x, 1.0 - 2 * x * y, -1.0 - 2 * x * y, s - 2 * y * y

    def second_partials(self, x, y):
        # f = y + x - x^3 - x y^2 ; g = -x + y - x^2 y - y^3
        return -6 * x, -2 * y, -2 * x, -2 * y, -2 * x, -6 * y

    def kernel(self):
        from .kernels import circle_local
        return circle_local, np.zeros(1)


def bvp_field(params: BvpParams | None = None) -> BvpField:
    if params is None:
        params = BvpParams()
    if params.c == 0:
        raise ValueError("BvP parameter c must be nonzero")
    return BvpField(params)


def hessian_terms(field: PlanarField, z, q):
    """Costate-weighted second derivatives (h1, h2, h3, h4).

    h1 = f_xx q1 + g_xx q2, h2 = h3 = f_xy q1 + g_xy q2,
    h4 = f_yy q1 + g_yy q2.
    """
    fxx, fxy, fyy, gxx, gxy, gyy = field.second_partials(z[0], z[1])
    h1 = fxx * q[0] + gxx * q[1]
    h2 = fxy * q[0] + gxy * q[1]
    h4 = fyy * q[0] + gyy * q[1]
    return h1, h2, h2, h4


def _fd_step(v):
    return 1e-5 * np.maximum(1.0, np.abs(v))


def fd_jacobian(field: PlanarField, z) -> np.ndarray:
    """Central-difference Jacobian of ``field.eval`` at ``z``."""
    x, y = float(z[0]), float(z[1])
    hx, hy = _fd_step(x), _fd_step(y)
    fpx, gpx = field.eval(x + hx, y)
    fmx, gmx = field.eval(x - hx, y)
    fpy, gpy = field.eval(x, y + hy)
    fmy, gmy = field.eval(x, y - hy)
    return np.array([
        [(fpx - fmx) / (2 * hx), (fpy - fmy) / (2 * hy)],
        [(gpx - gmx) / (2 * hx), (gpy - gmy) / (2 * hy)],
    ])


def fd_second_partials(field: PlanarField, z) -> dict[str, float]:
    """Second partials by central differences of ``field.jac``.

    Mixed partials are returned from both stencils (``f_xy`` from d/dy of
    f_x and ``f_yx`` from d/dx of f_y) so symmetry can be checked.
    """
    x, y = float(z[0]), float(z[1])
    hx, hy = _fd_step(x), _fd_step(y)
    px = np.array(field.jac(x + hx, y), dtype=float)
    mx = np.array(field.jac(x - hx, y), dtype=float)
    py = np.array(field.jac(x, y + hy), dtype=float)
    my = np.array(field.jac(x, y - hy), dtype=float)
    dx = (px - mx) / (2 * hx)  # d/dx of (fx, fy, gx, gy)
    dy = (py - my) / (2 * hy)
    return {
        "f_xx": dx[0], "f_xy": dy[0], "f_yx": dx[1], "f_yy": dy[1],
        "g_xx": dx[2], "g_xy": dy[2], "g_yx": dx[3], "g_yy": dy[3],
    }


def _rel_err(analytic, approx) -> float:
    analytic = np.asarray(analytic, dtype=float)
    approx = np.asarray(approx, dtype=float)
    return float(np.max(np.abs(analytic - approx) / np.maximum(1.0, np.abs(analytic))))


def jacobian_error(field: PlanarField, z) -> float:
    return _rel_err(field.DF(z), fd_jacobian(field, z))


def second_partials_error(field: PlanarField, z) -> float:
    exact = dict(zip(("f_xx", "f_xy", "f_yy", "g_xx", "g_xy", "g_yy"),
                     (float(v) for v in field.second_partials(z[0], z[1]))))
    fd = fd_second_partials(field, z)
    pairs = [(exact[k], fd[k]) for k in exact]
    pairs += [(exact["f_xy"], fd["f_yx"]), (exact["g_xy"], fd["g_yx"])]
    return max(_rel_err(a, b) for a, b in pairs)


PLANAR_MODELS = {
    "bvp": lambda **kw: bvp_field(BvpParams(**kw)),
    "circle": lambda **kw: CircleField(),
}
