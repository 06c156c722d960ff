"""Right-hand sides and Jacobians of the discounted augmented systems.

State vectors are ordered ``(x, y, q1, q2)``; every function also accepts
a ``(4, N)`` stack of states and evaluates column-wise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .vector_field import PlanarField, hessian_terms


class ControlMode(Enum):
    ONE_SIDED_X = "one-sided-x"
    TWO_SIDED = "two-sided"
    ONE_SIDED_Y = "one-sided-y"

    @property
    def injection(self) -> tuple[float, float]:
        """Weights with which (q1, q2) enter (xdot, ydot)."""
        return _INJECTION[self]


_INJECTION = {
    ControlMode.ONE_SIDED_X: (1.0, 0.0),
    ControlMode.TWO_SIDED: (1.0, 1.0),
    ControlMode.ONE_SIDED_Y: (0.0, 1.0),
}


@dataclass(frozen=True)
class AugSystem:
    field: PlanarField
    rho: float
    mode: ControlMode = ControlMode.ONE_SIDED_X

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def __call__(self, s):
        return rhs(self, s)


def rhs(sys: AugSystem, s) -> np.ndarray:
    x, y, q1, q2 = s[0], s[1], s[2], s[3]
    f, g = sys.field.eval(x, y)
    fx, fy, gx, gy = sys.field.jac(x, y)
    ex, ey = sys.mode.injection
    rho = sys.rho
    out = np.empty(np.shape(s), dtype=float)
    out[0] = f + ex * q1 if ex else f
    out[1] = g + ey * q2 if ey else g
    out[2] = -(rho + fx) * q1 - gx * q2
    out[3] = -fy * q1 - (rho + gy) * q2
    return out


def jacobian4(sys: AugSystem, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    z, q = s[:2], s[2:]
    fx, fy, gx, gy = (float(v) for v in sys.field.jac(z[0], z[1]))
    h1, h2, h3, h4 = (float(v) for v in hessian_terms(sys.field, z, q))
    ex, ey = sys.mode.injection
    rho = sys.rho
    return np.array([
        [fx, fy, ex, 0.0],
        [gx, gy, 0.0, ey],
        [-h1, -h2, -(rho + fx), -gx],
        [-h3, -h4, -fy, -(rho + gy)],
    ])


def fd_jacobian4(sys: AugSystem, s) -> np.ndarray:
    """Central-difference Jacobian of :func:`rhs` (validation oracle)."""
    s = np.asarray(s, dtype=float)
    J = np.empty((4, 4))
    for k in range(4):
        h = 1e-5 * max(1.0, abs(s[k]))
        e = np.zeros(4)
        e[k] = h
        J[:, k] = (rhs(sys, s + e) - rhs(sys, s - e)) / (2 * h)
    return J


def rhs_1d(field, rho: float, s) -> np.ndarray:
    """Scalar discounted system: xdot = f(x) + q, qdot = -(rho + f'(x)) q."""
    x, q = s[0], s[1]
    out = np.empty(np.shape(s), dtype=float)
    out[0] = field.f(x) + q
    out[1] = -(rho + field.df(x)) * q
    return out


def jacobian_1d(field, rho: float, s) -> np.ndarray:
    x, q = float(s[0]), float(s[1])
    d1 = float(field.df(x))
    return np.array([[d1, 1.0], [-float(field.d2f(x)) * q, -(rho + d1)]])
