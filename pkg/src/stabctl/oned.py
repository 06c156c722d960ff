"""Scalar discounted control system: xdot = f(x) + q, qdot = -(rho + f'(x)) q.

Audits of the one-dimensional assumptions, saddle separatrices and the
region count of the (x, q) plane.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .assumptions import Status, Verdict
from .augmented import rhs_1d
from .equilibria import Equilibrium1D, EqKind, equilibria_1d, scalar_roots
from .integrator import IntegrationSpec, Termination, integrate


class ScalarField:
    """Smooth scalar field with analytic f, f', f''.

    Subclasses implement :meth:`f`, :meth:`df` and :meth:`d2f` on arrays.
    """

    name = "scalar"
    search_interval = (-10.0, 10.0)

    def f(self, x):
        raise NotImplementedError

    def df(self, x):
        raise NotImplementedError

    def d2f(self, x):
        raise NotImplementedError

    def kernel(self):
        return None

    def roots(self) -> list[float]:
        return scalar_roots(self.f, self.search_interval)

    @property
    def stable_roots(self) -> list[float]:
        return [r for r in self.roots() if self.df(r) < 0]

    @property
    def unstable_roots(self) -> list[float]:
        return [r for r in self.roots() if self.df(r) > 0]

    def validate(self) -> None:
        """Check root residuals and the stable/unstable alternation."""
        roots = self.roots()
        if not roots:
            raise ValueError("field has no roots")
        for r in roots:
            if abs(self.f(r)) > 1e-10:
                raise ValueError(f"root {r} has residual {self.f(r)}")
            if self.df(r) == 0:
                raise ValueError(f"root {r} is not simple")
        signs = [np.sign(self.df(r)) for r in roots]
        if signs[0] > 0 or signs[-1] > 0 or any(a == b for a, b in zip(signs, signs[1:])):
            raise ValueError("roots must alternate stable/unstable starting and ending stable")


@dataclass(frozen=True)
class PolynomialField(ScalarField):
    """f(x) = sum coeffs[k] x^(n-k), highest degree first (at most degree 7)."""

    coeffs: tuple
    name: str = "polynomial"

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "f")
        if c.size == 0:
            raise ValueError("polynomial must be nonzero")
        if c.size > 8:
            raise ValueError("degree at most 7 supported")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))

    @property
    def _p(self):
        return np.asarray(self.coeffs)

    def f(self, x):
        return np.polyval(self._p, x)

    def df(self, x):
        return np.polyval(np.polyder(self._p), x)

    def d2f(self, x):
        return np.polyval(np.polyder(self._p, 2), x)

    @property
    def search_interval(self):
        # Cauchy bound on the real roots of f and of rho + f' for moderate rho
        c = self._p
        if c.size < 2:
            return (-1.0, 1.0)
        bound = 1.0 + np.max(np.abs(c[1:] / c[0]))
        return (-2.0 * bound - 10.0, 2.0 * bound + 10.0)

    def roots(self) -> list[float]:
        r = np.roots(self._p)
        real = np.sort(r[np.abs(r.imag) < 1e-7].real)
        out = []
        for x in real:
            for _ in range(20):  # Newton polish
                d = self.df(x)
                if d == 0:
                    break
                x = x - self.f(x) / d
            if not out or abs(x - out[-1]) > 1e-9:
                out.append(float(x))
        return out

    def kernel(self):
        from .kernels import poly_local
        return poly_local, np.asarray(self.coeffs)


def double_well() -> PolynomialField:
    """f(x) = x - x^3: stable roots -1, 1 and unstable root 0."""
    return PolynomialField((-1.0, 0.0, 1.0, 0.0), name="double-well-1d")


def triple_well() -> PolynomialField:
    """f(x) = -x (x^2 - 1)(x^2 - 4): stable roots -2, 0, 2."""
    return PolynomialField((-1.0, 0.0, 5.0, 0.0, -4.0, 0.0), name="triple-well-1d")


ONED_MODELS = {
    "double-well-1d": double_well,
    "triple-well-1d": triple_well,
}


def d_rho_intervals_1d(field: ScalarField, rho: float, interval=None):
    """Maximal intervals of {rho + f' > 0} inside the search interval."""
    lo, hi = field.search_interval if interval is None else interval
    cuts = [lo] + scalar_roots(lambda u: rho + field.df(u), (lo, hi)) + [hi]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if rho + field.df(0.5 * (a + b)) > 0:
            out.append((a, b))
    return out


@dataclass
class OneDReport:
    rho: float
    d_rho: list
    verdicts: dict

    def __getitem__(self, key) -> Verdict:
        return self.verdicts[key]

    def render(self) -> str:
        lines = ["D_rho: " + ", ".join(f"({a:.9g}, {b:.9g})" for a, b in self.d_rho)]
        for v in self.verdicts.values():
            lines.append(v.line())
            for w in v.witnesses[:5]:
                lines.append("    witness " + " ".join(f"{c:.9g}" for c in np.ravel(w)))
        return "\n".join(lines)


def audit_1d(field: ScalarField, rho: float, sample_extent: float = 10.0,
             n_samples: int = 20001) -> OneDReport:
    """Check (A1)'-(A4)' for the scalar system at discount ``rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    v = {}
    roots = field.roots()
    d_rho = d_rho_intervals_1d(field, rho)
    bad = [r for r in roots if not rho + field.df(r) > 0]
    v["A1'"] = Verdict("A1'", Status.PASS if not bad else Status.FAIL,
                       f"{len(roots) - len(bad)}/{len(roots)} roots inside D_rho",
                       [np.array([r]) for r in bad])

    crit = scalar_roots(lambda u: rho + field.df(u), field.search_interval)
    v["A2'"] = Verdict("A2'", Status.PASS if len(crit) == 2 else Status.FAIL,
                       f"{len(crit)} roots of rho + f'")

    xs = np.linspace(-sample_extent, sample_extent, n_samples)
    outside = ~(rho + field.df(xs) > 0)
    prod = field.f(xs) * field.d2f(xs)
    fails = xs[outside & ~(prod > 0)]
    v["A3'"] = Verdict("A3'", Status.PASS if fails.size == 0 else Status.FAIL,
                       f"f f'' > 0 at {int(np.count_nonzero(outside)) - fails.size}"
                       f"/{int(np.count_nonzero(outside))} samples outside D_rho",
                       [np.array([x]) for x in fails[:5]])

    probes = np.array([1e3, 1e4])
    right = field.df(probes)
    left = field.df(-probes)
    ok = bool(right[1] < right[0] < 0 and left[1] < left[0] < 0)
    v["A4'"] = Verdict("A4'", Status.PASS if ok else Status.FAIL,
                       "f'(+-1e3), f'(+-1e4) = " + ", ".join(f"{d:.3g}" for d in (*left, *right)))
    return OneDReport(rho, d_rho, v)


def saddles_1d(field: ScalarField, rho: float) -> list[Equilibrium1D]:
    return [e for e in equilibria_1d(field, rho) if e.is_saddle and not e.degenerate]


def trace_separatrix(field: ScalarField, rho: float, saddle: Equilibrium1D,
                     arc_budget: float = 30.0, eps: float = 1e-6,
                     t_max: float = 200.0, blowup_radius: float = 1e3):
    """Both branches of the stable manifold of a saddle, traced backward.

    Each branch starts at saddle +- eps * (unit stable eigenvector) and
    stops when its arclength exceeds ``arc_budget``, at blowup, or at
    ``t_max``. Returns a list of two (M, 2) polylines starting at the saddle.
    """
    if not saddle.is_saddle:
        raise ValueError("trace_separatrix needs a saddle equilibrium")
    w, V = np.linalg.eig(saddle.jacobian)
    k = int(np.argmin(w.real))
    vec = np.real(V[:, k])
    vec /= np.linalg.norm(vec)
    base = np.array([saddle.x, saddle.q])
    f = lambda u: rhs_1d(field, rho, u)
    branches = []
    for sgn in (1.0, -1.0):
        arc = {"s": 0.0, "prev": base + sgn * eps * vec}

        def budget(t, s):
            arc["s"] += float(np.hypot(*(s - arc["prev"])))
            arc["prev"] = s.copy()
            return arc["s"] > arc_budget

        spec = IntegrationSpec(dt=1e-3, t_max=t_max, direction="backward", abs_tol=1e-10,
                               rel_tol=1e-10, blowup_radius=blowup_radius, max_step=0.05)
        traj = integrate(f, base + sgn * eps * vec, spec, budget)
        pts = traj.states
        if traj.termination is Termination.BLOWUP:
            pts = pts[:-1]
        branches.append(np.vstack([base, pts]))
    return branches


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - \
        (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def polylines_intersect(p, r, skip_shared_start: bool = False, chunk: int = 512) -> bool:
    """True if any segment of polyline ``p`` properly crosses one of ``r``."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if skip_shared_start:  # drop the first segments that meet at a common saddle
        p, r = p[1:], r[1:]
    a1, a2 = p[:-1], p[1:]
    b1, b2 = r[:-1][None, :, :], r[1:][None, :, :]
    bmin = np.minimum(r[:-1], r[1:])
    bmax = np.maximum(r[:-1], r[1:])
    for i in range(0, len(a1), chunk):
        A1 = a1[i:i + chunk][:, None, :]
        A2 = a2[i:i + chunk][:, None, :]
        amin = np.minimum(A1, A2)
        amax = np.maximum(A1, A2)
        box = np.all((amin <= bmax[None]) & (bmin[None] <= amax), axis=-1)
        if not box.any():
            continue
        d1 = _orient(A1, A2, b1)
        d2 = _orient(A1, A2, b2)
        d3 = _orient(b1, b2, A1)
        d4 = _orient(b1, b2, A2)
        cross = box & (d1 * d2 < 0) & (d3 * d4 < 0)
        if cross.any():
            return True
    return False


def write_polyline_csv(path, branches) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "x", "q"])
        for k, br in enumerate(branches):
            for x, q in br:
                w.writerow([k, f"{x:.9g}", f"{q:.9g}"])
