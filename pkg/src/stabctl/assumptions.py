"""Numerical audits of the standing assumptions of the discounted system.

All checks sample; none is a proof. The recurrence check (AA) in
particular can only report suspected recurrences.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .augmented import AugSystem
from .equilibria import check_a3, find_nontrivial_equilibria
from .integrator import IntegrationSpec, integrate
from .limit_cycle import ClosedOrbit
from .vector_field import BvpParams, PlanarField

DEFAULT_K_BOX = ((-3.0, 3.0), (-2.0, 2.0))


class Status(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_CHECKED = "NOT-CHECKED"
    NO_RECURRENCE_SEEN = "NO-RECURRENCE-SEEN"
    SUSPECTED_RECURRENCE = "SUSPECTED-RECURRENCE"


@dataclass(frozen=True)
class DefinitenessResult:
    point: np.ndarray
    sym_eigs: np.ndarray
    negative_definite: bool
    positive_definite: bool


def sym_part_eigs(field: PlanarField, rho: float, x, y):
    """Eigenvalues (lo, hi) of the symmetric part of -(rho I + D_F) on arrays."""
    fx, fy, gx, gy = np.broadcast_arrays(*field.jac(x, y), np.asarray(x, dtype=float))[:4]
    a = -(rho + fx)
    d = -(rho + gy)
    b = -0.5 * (fy + gx)
    mid = 0.5 * (a + d)
    rad = np.sqrt(0.25 * (a - d) ** 2 + b * b)
    return mid - rad, mid + rad


def in_D_rho(field: PlanarField, rho: float, z) -> DefinitenessResult:
    M = -(rho * np.eye(2) + field.DF(z))
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    return DefinitenessResult(np.asarray(z, dtype=float), eigs,
                              bool(np.all(eigs < 0)), bool(np.all(eigs > 0)))


def d_rho_mask(field: PlanarField, rho: float, x, y) -> np.ndarray:
    """Vectorized membership z in D_rho."""
    _, hi = sym_part_eigs(field, rho, x, y)
    return hi < 0


@dataclass(frozen=True)
class DRhoInterval:
    """Open strip |x| < x_d, or empty (x_d None) with a reason."""

    x_d: Optional[float]
    reason: str = ""

    @property
    def empty(self) -> bool:
        return self.x_d is None

    def contains(self, x) -> np.ndarray:
        if self.x_d is None:
            return np.zeros(np.shape(x), dtype=bool)
        return np.abs(x) < self.x_d


def bvp_D_rho_interval(params: BvpParams, rho: float) -> DRhoInterval:
    """Closed-form x-extent of D_rho for the BvP model.

    x_d = sqrt(1 + rho/c - (c^2 - 1)^2 / (4 c^2 (c rho - b)))
    """
    a, b, c = params.a, params.b, params.c
    denom = c * rho - b
    if not denom > 0:
        return DRhoInterval(None, "c*rho - b <= 0")
    radicand = 1.0 + rho / c - (c * c - 1.0) ** 2 / (4.0 * c * c * denom)
    if radicand < 0:
        return DRhoInterval(None, "negative radicand")
    return DRhoInterval(float(np.sqrt(radicand)))


@dataclass
class Verdict:
    name: str
    status: Status
    detail: str = ""
    witnesses: list = dc_field(default_factory=list)

    def line(self) -> str:
        s = f"{self.name}: {self.status.value}"
        if self.detail:
            s += f"  ({self.detail})"
        return s


@dataclass
class AssumptionReport:
    verdicts: dict

    def __getitem__(self, key) -> Verdict:
        return self.verdicts[key]

    def render(self) -> str:
        out = []
        for v in self.verdicts.values():
            out.append(v.line())
            for w in v.witnesses[:5]:
                out.append("    witness " + " ".join(f"{c:.9g}" for c in np.ravel(w)))
        return "\n".join(out)


def _interior_fill(orbit: ClosedOrbit, n: int):
    pts = orbit.points
    (x0, y0), (x1, y1) = pts.min(axis=0), pts.max(axis=0)
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    grid = np.column_stack([X.ravel(), Y.ravel()])
    return grid[orbit.contains(grid)]


def _outside_box_samples(k_box, factor=3.0, n=121):
    (x0, x1), (y0, y1) = k_box
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    hx, hy = factor * 0.5 * (x1 - x0), factor * 0.5 * (y1 - y0)
    X, Y = np.meshgrid(np.linspace(cx - hx, cx + hx, n), np.linspace(cy - hy, cy + hy, n),
                       indexing="ij")
    x, y = X.ravel(), Y.ravel()
    outside = (x < x0) | (x > x1) | (y < y0) | (y > y1)
    return x[outside], y[outside]


def _check_a1(sys, gamma_s, n_fill):
    if gamma_s is None:
        return Verdict("A1", Status.NOT_CHECKED, "no stable cycle supplied")
    pts = np.vstack([gamma_s.points[:-1], _interior_fill(gamma_s, n_fill)])
    inside = d_rho_mask(sys.field, sys.rho, pts[:, 0], pts[:, 1])
    bad = pts[~inside]
    if len(bad) == 0:
        return Verdict("A1", Status.PASS, f"{len(pts)} samples of closure(I(gamma_s)) in D_rho")
    worst = bad[np.argmax(np.abs(bad[:, 0]))]
    return Verdict("A1", Status.FAIL, f"{len(bad)}/{len(pts)} samples outside D_rho",
                   [worst] + list(bad[:4]))


def _check_a4(sys, k_box, lyapunov):
    if lyapunov is None:
        return Verdict("A4", Status.NOT_CHECKED, "no Lyapunov function supplied")
    x, y = _outside_box_samples(k_box)
    V = np.asarray(lyapunov(x, y), dtype=float)
    h = 1e-6 * np.maximum(1.0, np.hypot(x, y))
    Vx = (np.asarray(lyapunov(x + h, y)) - np.asarray(lyapunov(x - h, y))) / (2 * h)
    Vy = (np.asarray(lyapunov(x, y + h)) - np.asarray(lyapunov(x, y - h))) / (2 * h)
    f, g = sys.field.eval(x, y)
    Vdot = Vx * f + Vy * g
    witnesses = [np.array([a, b]) for a, b in zip(x[V <= 0], y[V <= 0])]
    witnesses += [np.array([a, b]) for a, b in zip(x[Vdot >= 0], y[Vdot >= 0])]
    angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    radii = np.array([1e1, 1e2, 1e3])
    ray = np.array([lyapunov(r * np.cos(angles), r * np.sin(angles)) for r in radii])
    radial_ok = bool(np.all(np.diff(ray, axis=0) > 0))
    if witnesses or not radial_ok:
        return Verdict("A4", Status.FAIL, "V <= 0, Vdot >= 0 or V bounded along rays",
                       witnesses)
    return Verdict("A4", Status.PASS, f"{len(x)} samples outside K")


def _check_a5(sys, k_box):
    x, y = _outside_box_samples(k_box)
    lo, _ = sym_part_eigs(sys.field, sys.rho, x, y)
    bad = lo <= 0
    if not np.any(bad):
        return Verdict("A5", Status.PASS, f"{len(x)} samples outside K")
    w = [np.array([a, b]) for a, b in zip(x[bad][:5], y[bad][:5])]
    return Verdict("A5", Status.FAIL,
                   f"-(rho I + D_F) not positive definite at {int(bad.sum())}/{len(x)} samples", w)


def _check_aa(sys, k_box, n_seeds, q_range, t_back):
    # deterministic low-discrepancy seeds in (K minus D_rho) x [-L, L]^2
    from scipy.stats import qmc  # heavy import, only needed here

    (x0, x1), (y0, y1) = k_box
    u = qmc.Halton(d=4, scramble=False).random(200 * n_seeds)[1:]
    cand = qmc.scale(u, [x0, y0, -q_range, -q_range], [x1, y1, q_range, q_range])
    cand = cand[~d_rho_mask(sys.field, sys.rho, cand[:, 0], cand[:, 1])]
    seeds = cand[:n_seeds]
    spec = IntegrationSpec(dt=1e-2, t_max=t_back, direction="backward", abs_tol=1e-8,
                           rel_tol=1e-8, blowup_radius=1e3, max_step=0.05)
    suspects = []
    for s0 in seeds:
        traj = integrate(sys, s0, spec)
        t, S = traj.times, traj.states
        if len(S) < 3 or not np.all(np.isfinite(S)):
            continue
        tree = cKDTree(S)
        for i, j in tree.query_pairs(1e-2):
            if abs(t[j] - t[i]) > 5.0:
                suspects.append(S[i])
                break
    if suspects:
        return Verdict("AA", Status.SUSPECTED_RECURRENCE,
                       f"{len(suspects)}/{len(seeds)} backward orbits revisit a 1e-2 neighbourhood",
                       suspects)
    return Verdict("AA", Status.NO_RECURRENCE_SEEN,
                   f"heuristic only: {len(seeds)} backward orbits, none recurrent")


def audit(sys: AugSystem, gamma_s: Optional[ClosedOrbit], k_box=DEFAULT_K_BOX,
          lyapunov: Optional[Callable] = None, n_fill: int = 200, search_box=None,
          aa_seeds: int = 10, aa_q_range: float = 5.0,
          aa_time: float = 50.0) -> AssumptionReport:
    """Audit (A1)-(A5) and the (AA) recurrence heuristic for ``sys``.

    Parameters
    ----------
    gamma_s : ClosedOrbit or None
        Stable cycle; (A1) is NOT-CHECKED without it.
    k_box : ((x0, x1), (y0, y1))
        Compact set K of (A4)/(A5).
    lyapunov : callable, optional
        ``V(x, y)`` on arrays; (A4) is NOT-CHECKED when omitted.
    """
    v = {"A1": _check_a1(sys, gamma_s, n_fill)}

    reports = find_nontrivial_equilibria(sys, search_box)
    n = len(reports)
    v["A2"] = Verdict("A2", Status.PASS if n == 2 else Status.FAIL,
                      f"{n} nontrivial equilibria", [] if n == 2 else [r.z for r in reports])

    if n == 0:
        v["A3"] = Verdict("A3", Status.FAIL, "no nontrivial equilibria")
    else:
        vals = [check_a3(sys, r) for r in reports]
        ok = all(s for s, _ in vals)
        detail = ", ".join(f"B={b:.9g} lambda0={r.lambda0:.9g}" for (_, b), r in zip(vals, reports))
        v["A3"] = Verdict("A3", Status.PASS if ok else Status.FAIL, detail,
                          [r.z for (s, _), r in zip(vals, reports) if not s])

    v["A4"] = _check_a4(sys, k_box, lyapunov)
    v["A5"] = _check_a5(sys, k_box)
    v["AA"] = _check_aa(sys, k_box, aa_seeds, aa_q_range, aa_time)
    return AssumptionReport(v)
