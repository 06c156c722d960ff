"""Fixed points of the planar model and of the augmented systems.

Trivial equilibria are (z*, 0) with F(z*) = 0. Nontrivial ones carry a
nonzero costate in the kernel of rho I + D_F(z)^T, which forces
det[rho I + D_F(z)] = 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .augmented import AugSystem, ControlMode, jacobian4, rhs
from .vector_field import PlanarField, hessian_terms

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 100
DEDUP_RADIUS = 1e-6
TIE_TOL = 1e-10


class EqKind(Enum):
    TRIVIAL = "trivial"
    NONTRIVIAL = "nontrivial"


@dataclass(frozen=True)
class PlanarRoot:
    z: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class EquilibriumReport:
    """Equilibrium of an augmented system with its linearization data.

    ``eigenvalues`` are sorted by real part, descending. ``lambda0`` is
    det J = Lambda(0). ``a3_value`` is B (the (A3)-type inequality value,
    positive when satisfied); it is None for trivial points.
    """

    z: np.ndarray
    q: np.ndarray
    kind: EqKind
    eigenvalues: np.ndarray
    stable_dim: int
    ties: int
    lambda0: float
    a3_value: Optional[float]
    a3_satisfied: Optional[bool]
    mode: ControlMode
    degenerate: bool = False

    @property
    def unstable_dim(self) -> int:
        return int(np.count_nonzero(self.eigenvalues.real > TIE_TOL))

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.z, self.q])


def _sort_eigs(ev) -> np.ndarray:
    ev = np.asarray(ev, dtype=complex)
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]


def _second_tensor(field: PlanarField, x, y):
    """T[j, i, k] = d^2 F_j / dz_i dz_k on arrays x, y."""
    fxx, fxy, fyy, gxx, gxy, gyy = np.broadcast_arrays(*field.second_partials(x, y), x)[:6]
    return np.array([[[fxx, fxy], [fxy, fyy]], [[gxx, gxy], [gxy, gyy]]], dtype=float)


def _dedup(points, radius=DEDUP_RADIUS):
    kept = []
    for p in points:
        if all(np.max(np.abs(p - k)) > radius for k in kept):
            kept.append(p)
    return sorted(kept, key=lambda p: (p[0], p[1]))


def _seed_grid(box, n):
    (x0, x1), (y0, y1) = box
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    return X.ravel(), Y.ravel()


def _newton(residual, x, y):
    """Vectorized Newton iteration; residual(x, y) -> (r (2, N), J (2, 2, N))."""
    ok = np.ones_like(x, dtype=bool)
    for _ in range(NEWTON_MAXIT):
        r, J = residual(x, y)
        Jt = np.moveaxis(J, -1, 0)
        det = Jt[:, 0, 0] * Jt[:, 1, 1] - Jt[:, 0, 1] * Jt[:, 1, 0]
        good = ok & np.isfinite(det) & (np.abs(det) > 1e-300)
        ok &= good
        safe = np.where(good, det, 1.0)
        dx = (Jt[:, 1, 1] * r[0] - Jt[:, 0, 1] * r[1]) / safe
        dy = (-Jt[:, 1, 0] * r[0] + Jt[:, 0, 0] * r[1]) / safe
        x = np.where(ok, x - dx, x)
        y = np.where(ok, y - dy, y)
        ok &= np.isfinite(x) & np.isfinite(y) & (np.abs(x) < 1e8) & (np.abs(y) < 1e8)
        if np.all((np.maximum(np.abs(dx), np.abs(dy)) < NEWTON_TOL) | ~ok):
            break
    r, _ = residual(x, y)
    return x, y, ok, r


def find_trivial_equilibria(field: PlanarField, search_box=None, n_seeds: int = 50,
                            res_tol: float = 1e-10) -> list[PlanarRoot]:
    """Roots of F by Newton's method from an ``n_seeds`` x ``n_seeds`` grid.

    Returns an empty list when no seed converges.
    """
    box = field.default_box() if search_box is None else search_box

    def residual(x, y):
        f, g = field.eval(x, y)
        fx, fy, gx, gy = np.broadcast_arrays(*field.jac(x, y), x)[:4]
        return np.array([f, g]), np.array([[fx, fy], [gx, gy]])

    x, y, ok, r = _newton(residual, *_seed_grid(box, n_seeds))
    ok &= np.max(np.abs(r), axis=0) <= res_tol
    pts = _dedup(np.column_stack([x[ok], y[ok]]))
    return [PlanarRoot(p, _sort_eigs(np.linalg.eigvals(field.DF(p)))) for p in pts]


def _nontrivial_residual(sys: AugSystem):
    field, rho, mode = sys.field, sys.rho, sys.mode

    def residual(x, y):
        f, g = field.eval(x, y)
        fx, fy, gx, gy = np.broadcast_arrays(*field.jac(x, y), x)[:4]
        T = _second_tensor(field, x, y)
        if mode is ControlMode.TWO_SIDED:
            # (rho I + D_F^T) F = 0 with q = -F
            F = np.array([f, g])
            A = np.array([[rho + fx, gx], [fy, rho + gy]])
            DF = np.array([[fx, fy], [gx, gy]])
            r = np.einsum("ijn,jn->in", A, F)
            J = np.einsum("jikn,jn->ikn", T, F) + np.einsum("ijn,jkn->ikn", A, DF)
            return r, J
        det = (rho + fx) * (rho + gy) - fy * gx
        ddet = np.array([T[0, 0, k] * (rho + gy) + (rho + fx) * T[1, 1, k]
                         - T[0, 1, k] * gx - fy * T[1, 0, k] for k in range(2)])
        if mode is ControlMode.ONE_SIDED_X:
            # det = 0 and g = 0; q1 = -f
            return np.array([det, g]), np.array([ddet, [gx, gy]])
        return np.array([det, f]), np.array([ddet, [fx, fy]])

    return residual


def _costate(sys: AugSystem, z):
    """Costate of a nontrivial point from the closure and kernel conditions."""
    f, g = (float(v) for v in sys.field.eval(z[0], z[1]))
    fx, fy, gx, gy = (float(v) for v in sys.field.jac(z[0], z[1]))
    rho = sys.rho
    tiny = 1e-12
    if sys.mode is ControlMode.TWO_SIDED:
        return np.array([-f, -g]), False
    if sys.mode is ControlMode.ONE_SIDED_X:
        q1 = -f
        # rows (rho+fx) q1 + gx q2 = 0 and fy q1 + (rho+gy) q2 = 0
        c1, c2 = gx, rho + gy
        if max(abs(c1), abs(c2)) < tiny:
            return np.array([q1, 0.0]), True
        q2 = -(rho + fx) * q1 / c1 if abs(c1) >= abs(c2) else -fy * q1 / c2
        return np.array([q1, q2]), False
    q2 = -g
    c1, c2 = rho + fx, fy
    if max(abs(c1), abs(c2)) < tiny:
        return np.array([0.0, q2]), True
    q1 = -gx * q2 / c1 if abs(c1) >= abs(c2) else -(rho + gy) * q2 / c2
    return np.array([q1, q2]), False


def b_value(sys: AugSystem, z, q) -> float:
    """Constant B with Lambda(0) = -B on the nontrivial locus.

    For the x-only control this is the (A3) expression
    grad(g) adj(H) grad(g) + rho (h1 g_y - h2 g_x); the two-sided and
    y-only variants use the analogous closed forms.
    """
    fx, fy, gx, gy = (float(v) for v in sys.field.jac(z[0], z[1]))
    h1, h2, h3, h4 = (float(v) for v in hessian_terms(sys.field, z, q))
    rho = sys.rho

    def quad(u, v):  # (u, v) adj(H) (u, v)^T, adj(H) = [[h4, -h2], [-h3, h1]]
        return h4 * u * u - (h2 + h3) * u * v + h1 * v * v

    if sys.mode is ControlMode.ONE_SIDED_X:
        return quad(gx, gy) + rho * (h1 * gy - h2 * gx)
    if sys.mode is ControlMode.ONE_SIDED_Y:
        return quad(fx, fy) + rho * (h4 * fx - h3 * fy)
    detH = h1 * h4 - h2 * h3
    return (quad(fx, fy) + quad(gx, gy)
            + rho * (h1 * gy - h2 * gx - h3 * fy + h4 * fx) - detH)


def _injected_h(sys: AugSystem, z, q) -> float:
    h1, _, _, h4 = (float(v) for v in hessian_terms(sys.field, z, q))
    ex, ey = sys.mode.injection
    return ex * h1 + ey * h4


def _poly_coeffs(sys: AugSystem, report: EquilibriumReport):
    z, q = report.z, report.q
    fx, fy, gx, gy = (float(v) for v in sys.field.jac(z[0], z[1]))
    rho = sys.rho
    # equals rho^2 + 3 rho s + s^2 - h_inj (s = f_x + g_y) where det[rho I + D_F] = 0
    P = fx * fx + rho * fx + 2 * fy * gx + gy * gy + rho * gy - rho * rho - _injected_h(sys, z, q)
    B = b_value(sys, z, q)
    return np.array([1.0, 2 * rho, -P, -(P + rho * rho) * rho, -B])


def char_poly(sys: AugSystem, report: EquilibriumReport, lam):
    """Lambda(lambda) = l^4 + 2 rho l^3 - P l^2 - (P + rho^2) rho l - B,
    P = rho^2 + 3 rho s + s^2 - h_inj, s = f_x + g_y."""
    return np.polyval(_poly_coeffs(sys, report), lam)


def char_poly_derivative(sys: AugSystem, report: EquilibriumReport, lam):
    return np.polyval(np.polyder(_poly_coeffs(sys, report)), lam)


def check_a3(sys: AugSystem, report: EquilibriumReport) -> tuple[bool, float]:
    """(A3)-type test at a nontrivial point: (B > 0, B)."""
    if report.kind is not EqKind.NONTRIVIAL:
        raise ValueError("(A3) applies to nontrivial equilibria only")
    value = b_value(sys, report.z, report.q)
    return value > 0, value


def _make_report(sys: AugSystem, z, q, kind, degenerate=False) -> EquilibriumReport:
    z = np.asarray(z, dtype=float)
    q = np.asarray(q, dtype=float)
    J = jacobian4(sys, np.concatenate([z, q]))
    ev = _sort_eigs(np.linalg.eigvals(J))
    stable = int(np.count_nonzero(ev.real < -TIE_TOL))
    ties = int(np.count_nonzero(np.abs(ev.real) <= TIE_TOL))
    a3v = a3s = None
    if kind is EqKind.NONTRIVIAL:
        a3v = b_value(sys, z, q)
        a3s = bool(a3v > 0)
    return EquilibriumReport(z, q, kind, ev, stable, ties, float(np.linalg.det(J)),
                             a3v, a3s, sys.mode, degenerate)


def trivial_report(sys: AugSystem, root) -> EquilibriumReport:
    z = root.z if isinstance(root, PlanarRoot) else root
    return _make_report(sys, z, np.zeros(2), EqKind.TRIVIAL)


def find_nontrivial_equilibria(sys: AugSystem, search_box=None, n_seeds: int = 50,
                               res_tol: float = 1e-9) -> list[EquilibriumReport]:
    """Solve det[rho I + D_F] = 0 with the mode's closure condition.

    Points with F(z) ~ 0 (hence q ~ 0) are trivial and excluded.
    """
    box = sys.field.default_box() if search_box is None else search_box
    residual = _nontrivial_residual(sys)
    x, y, ok, r = _newton(residual, *_seed_grid(box, n_seeds))
    scale = 1.0 + np.abs(x) + np.abs(y)
    ok &= np.max(np.abs(r), axis=0) <= 1e-10 * scale
    (x0, x1), (y0, y1) = box
    ok &= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    reports = []
    for z in _dedup(np.column_stack([x[ok], y[ok]])):
        q, degenerate = _costate(sys, z)
        if np.linalg.norm(q) < 1e-8:
            continue
        s = np.concatenate([z, q])
        if np.linalg.norm(rhs(sys, s)) > res_tol * (1 + np.linalg.norm(z) + np.linalg.norm(q)):
            continue
        reports.append(_make_report(sys, z, q, EqKind.NONTRIVIAL, degenerate))
    return reports


def all_equilibria(sys: AugSystem, search_box=None) -> list[EquilibriumReport]:
    roots = find_trivial_equilibria(sys.field, search_box)
    return [trivial_report(sys, r) for r in roots] + find_nontrivial_equilibria(sys, search_box)


def write_equilibria_csv(path, reports) -> None:
    header = ["kind", "x", "y", "q1", "q2"]
    for i in range(1, 5):
        header += [f"re{i}", f"im{i}"]
    header += ["lambda0", "a3"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rep in reports:
            row = [rep.kind.value] + [f"{v:.9g}" for v in (*rep.z, *rep.q)]
            for ev in rep.eigenvalues:
                row += [f"{ev.real:.9g}", f"{ev.imag:.9g}"]
            row.append(f"{rep.lambda0:.9g}")
            row.append("" if rep.a3_value is None else f"{rep.a3_value:.9g}")
            w.writerow(row)


# one-dimensional system ---------------------------------------------------

@dataclass(frozen=True)
class Equilibrium1D:
    """Equilibrium (x, q) of xdot = f + q, qdot = -(rho + f') q."""

    x: float
    q: float
    kind: EqKind
    eigenvalues: np.ndarray
    jacobian: np.ndarray
    degenerate: bool = False

    @property
    def is_saddle(self) -> bool:
        ev = self.eigenvalues
        return bool(np.all(np.abs(ev.imag) < 1e-12) and ev.real.max() > TIE_TOL
                    and ev.real.min() < -TIE_TOL)

    @property
    def stable(self) -> bool:
        return bool(np.all(self.eigenvalues.real < -TIE_TOL))


def scalar_roots(fun, interval=(-10.0, 10.0), n: int = 20001) -> list[float]:
    """Simple roots of a scalar function located by sign changes and Brent."""
    xs = np.linspace(interval[0], interval[1], n)
    vs = np.asarray(fun(xs), dtype=float)
    roots = list(xs[vs == 0.0])
    idx = np.nonzero(vs[:-1] * vs[1:] < 0)[0]
    for i in idx:
        roots.append(brentq(fun, xs[i], xs[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    roots.sort()
    out = []
    for r in roots:
        if not out or abs(r - out[-1]) > DEDUP_RADIUS:
            out.append(float(r))
    return out


def _jac1d(field, rho, x, q):
    d1 = float(field.df(x))
    return np.array([[d1, 1.0], [-float(field.d2f(x)) * q, -(rho + d1)]])


def equilibria_1d(field, rho: float, interval=None) -> list[Equilibrium1D]:
    """Trivial points at roots of f and nontrivial ones at roots of rho + f'.

    Trivial eigenvalues are {f'(x*), -f'(x*) - rho}; nontrivial ones are
    (-rho +- sqrt(rho^2 + 4 f'' f)) / 2 with q = -f(x).
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    interval = getattr(field, "search_interval", (-10.0, 10.0)) if interval is None else interval
    out = []
    for x in scalar_roots(field.f, interval):
        d1 = float(field.df(x))
        ev = _sort_eigs([d1, -d1 - rho])
        out.append(Equilibrium1D(x, 0.0, EqKind.TRIVIAL, ev, _jac1d(field, rho, x, 0.0)))
    for x in scalar_roots(lambda u: rho + field.df(u), interval):
        q = -float(field.f(x))
        disc = complex(rho * rho + 4 * float(field.d2f(x)) * float(field.f(x)))
        ev = _sort_eigs([(-rho + np.sqrt(disc)) / 2, (-rho - np.sqrt(disc)) / 2])
        out.append(Equilibrium1D(x, q, EqKind.NONTRIVIAL, ev, _jac1d(field, rho, x, q),
                                 degenerate=abs(q) < 1e-12))
    return out
