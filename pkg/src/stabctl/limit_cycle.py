"""Closed orbits of planar fields: extraction by a Poincare section and
distance queries in the augmented space."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .integrator import IntegrationSpec, integrate
from .kernels import adjacent_segment_distance
from .vector_field import PlanarField


class NoCycleFound(RuntimeError):
    pass


class CycleStability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


def point_in_polygon(points, polygon, chunk: int = 2048) -> np.ndarray:
    """Even-odd ray casting; ``points`` is (N, 2), ``polygon`` is (M, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    if np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.empty(len(pts), dtype=bool)
    for a in range(0, len(pts), chunk):
        px = pts[a:a + chunk, 0][:, None]
        py = pts[a:a + chunk, 1][:, None]
        straddle = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        out[a:a + chunk] = np.count_nonzero(straddle & (px < xcross), axis=1) % 2 == 1
    return out


def polygon_centroid(polygon) -> np.ndarray:
    p = np.asarray(polygon, dtype=float)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    A = 0.5 * cross.sum()
    return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * A)


class _StarIndex:
    """Exact inside test for a polygon star-shaped about ``center``.

    Vertex angles about the center increase monotonically, so the edge
    met by the ray through a query point is found by binary search and
    a single side-of-edge test decides membership.
    """

    def __init__(self, poly, center):
        d = poly - center
        ang = np.arctan2(d[:, 1], d[:, 0])
        if signed_area(poly) < 0:
            poly, ang = poly[::-1], ang[::-1]
        start = int(np.argmin(ang))
        self.poly = np.roll(poly, -start, axis=0)
        self.ang = np.roll(ang, -start)
        self.center = center

    @classmethod
    def build(cls, poly, center):
        d = poly - center
        ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        steps = np.diff(np.concatenate([ang, ang[:1] + np.sign(ang[-1] - ang[0]) * 2 * np.pi]))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            return None
        return cls(poly, center)

    def contains(self, z):
        d = z - self.center
        a = np.arctan2(d[:, 1], d[:, 0])
        n = len(self.poly)
        i = np.searchsorted(self.ang, a, side="right") - 1
        i = np.where(i < 0, n - 1, i)
        p0 = self.poly[i]
        p1 = self.poly[(i + 1) % n]
        e = p1 - p0
        w = z - p0
        return e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0] > 0


def winding_number(polygon, point) -> int:
    poly = np.asarray(polygon, dtype=float) - np.asarray(point, dtype=float)
    ang = np.arctan2(poly[:, 1], poly[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def signed_area(polygon) -> float:
    p = np.asarray(polygon, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segment_distances(z, a, b):
    """Distances from points z (N, 2) to segments a[k]-b[k] (N, K, 2)."""
    ab = b - a
    az = z[:, None, :] - a
    denom = np.einsum("nkd,nkd->nk", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, np.einsum("nkd,nkd->nk", az, ab) / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.sqrt(np.sum((z[:, None, :] - proj) ** 2, axis=-1))


@dataclass(frozen=True)
class ClosedOrbit:
    """Closed polyline sample of a periodic orbit (first point == last point).

    ``orientation`` is +1 for counter-clockwise forward-time traversal.
    """

    points: np.ndarray
    period: float
    stability: CycleStability
    orientation: int = 1
    _tree: cKDTree = dc_field(default=None, repr=False, compare=False)
    _star: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", np.ascontiguousarray(self.points, dtype=float))
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.points[:-1]))
        if self._star is None:
            poly = self.points[:-1]
            object.__setattr__(self, "_star", _StarIndex.build(poly, polygon_centroid(poly)) or False)

    @property
    def _pts(self):
        return self.points

    def contains(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self._star:
            return self._star.contains(z)
        return point_in_polygon(z, self.points)

    def planar_distance(self, z) -> np.ndarray:
        """Distance from planar points z (N, 2) to the polyline.

        Uses the nearest vertices and projects onto their adjacent
        segments, which is exact for polylines sampled finer than their
        curvature radius.
        """
        z = np.atleast_2d(np.asarray(z, dtype=float))
        n = len(self.points) - 1
        k = min(4, n)
        _, idx = self._tree.query(z, k=k)
        idx = np.ascontiguousarray(np.reshape(idx, (len(z), k)), dtype=np.int64)
        return adjacent_segment_distance(np.ascontiguousarray(z), self._pts, idx)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in self.points:
                w.writerow([f"{x:.9g}", f"{y:.9g}"])


def distance_to_orbit(s, orbit: ClosedOrbit) -> float:
    """Exact inf over the polyline of |(z, q) - (w, 0)| in R^4."""
    s = np.asarray(s, dtype=float)
    z = s[:2][None, :]
    q2 = float(np.dot(s[2:], s[2:])) if len(s) > 2 else 0.0
    pts = orbit.points
    d = _segment_distances(z, pts[None, :-1], pts[None, 1:]).min()
    return float(np.sqrt(d * d + q2))


def _refine_crossing(f, s_prev, h, cy):
    """Locate y = cy within an accepted step of length h by secant in time."""
    spec = IntegrationSpec(dt=h / 4, t_max=h, abs_tol=1e-13, rel_tol=1e-13, blowup_radius=1e9)

    def advance(tau):
        if tau <= 0:
            return s_prev.copy()
        return integrate(f, s_prev, IntegrationSpec(dt=tau / 4, t_max=tau, abs_tol=1e-13,
                                                    rel_tol=1e-13, blowup_radius=1e9)).final

    a, ya = 0.0, s_prev[1] - cy
    b = spec.t_max
    yb = advance(b)[1] - cy
    for _ in range(50):
        if yb == ya:
            break
        c = b - yb * (b - a) / (yb - ya)
        if not 0.0 <= c <= h:
            c = 0.5 * (a + b)
        a, ya = b, yb
        b = c
        yb = advance(b)[1] - cy
        if abs(yb) < 1e-13 or abs(b - a) < 1e-15:
            break
    return b, advance(b)


def find_cycle(field: PlanarField, seed, direction: str = "forward", center=None,
               t_transient: float = 100.0, n_samples: int = 500,
               horizon: float = 5000.0, tol: float = 1e-9) -> ClosedOrbit:
    """Extract the limit cycle reached from ``seed`` in the given time direction.

    The section is the half-line from ``center`` along +x. Crossings are
    collected after ``t_transient`` until two successive return points
    agree to ``tol``; the last period is re-integrated with a fine step
    and resampled uniformly in arclength.
    """
    if n_samples < 3:
        raise ValueError("n_samples must be at least 3")
    sign = 1.0 if direction == "forward" else -1.0
    stability = CycleStability.STABLE if direction == "forward" else CycleStability.UNSTABLE
    if center is None:
        from .equilibria import find_trivial_equilibria
        roots = find_trivial_equilibria(field)
        if not roots:
            raise NoCycleFound("no interior fixed point to anchor the section")
        center = roots[0].z
    cx, cy = float(center[0]), float(center[1])

    def f(u):
        fu, gu = field.eval(u[0], u[1])
        return np.array([sign * fu, sign * gu])

    tight = dict(abs_tol=1e-11, rel_tol=1e-11, blowup_radius=1e6, max_step=0.05)
    pre = integrate(f, seed, IntegrationSpec(dt=1e-2, t_max=t_transient, **tight))
    if pre.termination.name != "REACHED_TMAX":
        raise NoCycleFound(f"transient run ended with {pre.termination.value}")

    prev = {"s": pre.final.copy()}

    def crossed(t, s):
        p = prev["s"]
        prev["s"] = s.copy()
        return (p[1] - cy) * (s[1] - cy) < 0 and 0.5 * (p[0] + s[0]) > cx

    crossings = []  # (time, point, upward)
    s, t_now = pre.final, 0.0
    while t_now < horizon:
        prev["s"] = s.copy()
        run = integrate(f, s, IntegrationSpec(dt=1e-2, t_max=horizon - t_now, **tight), crossed)
        if run.termination.name == "BLOWUP":
            raise NoCycleFound("orbit escaped while searching for a cycle")
        if run.termination.name != "EVENT_HIT":
            break
        s_prev, t_prev = run.states[-2], run.times[-2]
        tau, p = _refine_crossing(f, s_prev, run.times[-1] - t_prev, cy)
        upward = run.states[-1][1] > s_prev[1]
        if p[0] > cx and (not crossings or upward == crossings[0][2]):
            if p[0] - cx < 1e-6:
                raise NoCycleFound("orbit collapses onto the section anchor")
            crossings.append((t_now + t_prev + tau, p, upward))
            if len(crossings) >= 2 and np.max(np.abs(crossings[-1][1] - crossings[-2][1])) < tol:
                break
        s, t_now = run.final, t_now + run.times[-1]

    if len(crossings) < 2:
        raise NoCycleFound("no repeated section crossings within horizon")
    period = crossings[-1][0] - crossings[-2][0]
    p0 = crossings[-1][1]

    fine = integrate(f, p0, IntegrationSpec(dt=period / 4000, t_max=period, abs_tol=1e-12,
                                            rel_tol=1e-12, blowup_radius=1e6,
                                            max_step=period / 4000))
    pts = fine.states.copy()
    pts[-1] = p0
    if sign < 0:
        pts = pts[::-1].copy()

    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, arc[-1], n_samples + 1)
    res = np.column_stack([np.interp(target, arc, pts[:, 0]), np.interp(target, arc, pts[:, 1])])
    res[-1] = res[0]
    orientation = 1 if signed_area(res[:-1]) > 0 else -1
    return ClosedOrbit(res, float(period), stability, orientation)
