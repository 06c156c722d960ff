"""Asymptotic-outcome classification of augmented trajectories and grid sweeps.

All cells of a sweep are advanced together by vectorized fixed-step RK4
and tested every ``dt_check``; decided cells leave the active set. Every
operation is elementwise, so a cell's result does not depend on how the
grid is chunked or on the number of worker processes.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np
from scipy import ndimage

from .augmented import AugSystem, rhs, rhs_1d
from .kernels import aug_block_stepper, oned_block_stepper
from .limit_cycle import ClosedOrbit

PANELS = {
    "a": (-1.66, 0.42),
    "b": (-1.0, 1.23),
    "c": (0.5, 1.27),
    "d": (-0.62, 0.04),
    "e": (1.98, 0.93),
    "f": (0.5, -0.22),
    "g": (1.35, -0.26),
    "h": (1.73, 0.25),
}


class Tag(IntEnum):
    UNDETERMINED = 0
    TO_FIXED_POINT = 1
    TO_LIMIT_CYCLE = 2
    DIVERGED = 3


TAG_NAMES = {
    Tag.UNDETERMINED: "undetermined",
    Tag.TO_FIXED_POINT: "fixed_point",
    Tag.TO_LIMIT_CYCLE: "limit_cycle",
    Tag.DIVERGED: "diverged",
}
GRAY = {Tag.TO_FIXED_POINT: 0, Tag.TO_LIMIT_CYCLE: 255, Tag.DIVERGED: 128, Tag.UNDETERMINED: 64}

# one-dimensional maps: stable root i is tagged ROOT_BASE + i
ROOT_BASE = 100
# gray levels for roots, skipping the diverged and undetermined values
_ROOT_GRAYS = (0, 255, 192, 32, 224, 96, 160, 16)


@dataclass(frozen=True)
class Thresholds:
    eps_fp: float = 1e-3
    eps_cycle: float = 5e-3
    dwell_time: float = 10.0
    dt_check: float = 0.1
    horizon: float = 500.0
    dt: float = 0.01
    blowup_radius: float = 1e3

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt > self.dt_check:
            raise ValueError("dt must not exceed dt_check")

    @property
    def substeps(self) -> int:
        return max(1, int(round(self.dt_check / self.dt)))

    @property
    def h(self) -> float:
        return self.dt_check / self.substeps

    @property
    def dwell_checks(self) -> int:
        return int(round(self.dwell_time / self.dt_check))


@dataclass(frozen=True)
class Targets:
    """Attractors of the planar model used by the tests.

    ``gamma_u`` is optional; when present, a trajectory with |q| < eps_fp
    whose z stays strictly inside it (farther than eps_cycle) for the
    dwell time is assigned to the fixed point.
    """

    z_star: np.ndarray
    gamma_u: Optional[ClosedOrbit] = None


@dataclass
class Outcome:
    tag: Tag
    t_decided: float
    final_state: np.ndarray
    diagnostic: str = ""


def _rk4_block(f, s, h, n):
    for _ in range(n):
        k1 = f(s)
        k2 = f(s + (0.5 * h) * k1)
        k3 = f(s + (0.5 * h) * k2)
        k4 = f(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return s


def _blown(s, radius):
    with np.errstate(over="ignore", invalid="ignore"):
        norm = np.sqrt(np.sum(s * s, axis=0))
    return ~np.isfinite(norm) | (norm > radius)


def classify_batch(sys: AugSystem, S0, gamma_s: Optional[ClosedOrbit], targets: Targets,
                   thr: Thresholds = Thresholds()):
    """Classify the columns of ``S0`` (4, N).

    Returns ``(tags, t_decided, final_states)``; undecided cells have
    t_decided = nan and their state at the horizon. With ``gamma_s`` None
    no cell is tagged TO_LIMIT_CYCLE.
    """
    S = np.array(S0, dtype=float).reshape(4, -1).copy()
    N = S.shape[1]
    tags = np.zeros(N, dtype=np.int64)
    tdec = np.full(N, np.nan)
    c_fp = np.zeros(N, dtype=np.int64)
    c_cy = np.zeros(N, dtype=np.int64)
    need = thr.dwell_checks + 1  # consecutive checks spanning dwell_time
    zs = np.asarray(targets.z_star, dtype=float)
    advance = aug_block_stepper(sys)
    if advance is None:
        advance = lambda u, h, n: _rk4_block(lambda v: rhs(sys, v), u, h, n)
    alive = np.arange(N)
    n_checks = int(round(thr.horizon / thr.dt_check))
    k = 0
    with np.errstate(all="ignore"):
        while alive.size:
            s = S[:, alive]
            if k > 0:
                s = advance(s, thr.h, thr.substeps)
                S[:, alive] = s
            t = k * thr.dt_check
            bad = _blown(s, thr.blowup_radius)
            qn = np.hypot(s[2], s[3])
            fp = (np.hypot(s[0] - zs[0], s[1] - zs[1]) + qn < thr.eps_fp) & ~bad
            cy = np.zeros(alive.size, dtype=bool)
            cand = (qn < thr.eps_cycle) & ~bad & ~fp
            if gamma_s is not None and cand.any():
                d = gamma_s.planar_distance(s[:2, cand].T)
                cy[cand] = np.hypot(d, qn[cand]) < thr.eps_cycle
            if targets.gamma_u is not None:
                trap = (qn < thr.eps_fp) & ~bad & ~fp & ~cy
                if trap.any():
                    zz = s[:2, trap].T
                    inner = targets.gamma_u.contains(zz)
                    idx = np.flatnonzero(inner)
                    if idx.size:
                        far = targets.gamma_u.planar_distance(zz[idx]) > thr.eps_cycle
                        fp[np.flatnonzero(trap)[idx[far]]] = True
            c_fp[alive] = np.where(fp, c_fp[alive] + 1, 0)
            c_cy[alive] = np.where(cy, c_cy[alive] + 1, 0)
            dec = np.zeros(alive.size, dtype=np.int64)
            dec[c_cy[alive] >= need] = Tag.TO_LIMIT_CYCLE
            dec[c_fp[alive] >= need] = Tag.TO_FIXED_POINT
            dec[bad] = Tag.DIVERGED
            done = dec > 0
            tags[alive[done]] = dec[done]
            tdec[alive[done]] = t
            alive = alive[~done]
            k += 1
            if k > n_checks:
                break
    return tags, tdec, S


def classify(sys: AugSystem, s0, gamma_s: Optional[ClosedOrbit], targets: Targets,
             thresholds: Thresholds = Thresholds()) -> Outcome:
    """Outcome of a single trajectory (same engine as :func:`sweep`)."""
    tags, tdec, S = classify_batch(sys, np.asarray(s0, dtype=float)[:, None], gamma_s,
                                   targets, thresholds)
    tag = Tag(int(tags[0]))
    diag = "horizon exhausted" if tag is Tag.UNDETERMINED else ""
    return Outcome(tag, float(tdec[0]), S[:, 0].copy(), diag)


@dataclass
class ClassificationMap:
    """Grid of outcome tags; ``tags[i, j]`` belongs to (u[j], v[i]).

    For phase-plane sweeps the axes are (q1, q2) at a base point
    (x0, y0); one-dimensional sweeps use axes (x, q).
    """

    axes: tuple
    ranges: tuple
    resolution: tuple
    tags: np.ndarray
    t_decided: np.ndarray
    base: Optional[tuple] = None
    root_positions: Optional[tuple] = None

    def axis_values(self):
        (u0, u1), (v0, v1) = self.ranges
        n1, n2 = self.resolution
        return np.linspace(u0, u1, n1), np.linspace(v0, v1, n2)

    def tag_name(self, code: int) -> str:
        if code >= ROOT_BASE:
            return f"fixed_point_{code - ROOT_BASE}"
        return TAG_NAMES[Tag(code)]

    def gray(self, code: int) -> int:
        if code >= ROOT_BASE:
            return _ROOT_GRAYS[(code - ROOT_BASE) % len(_ROOT_GRAYS)]
        return GRAY[Tag(code)]

    def counts(self) -> dict:
        codes, num = np.unique(self.tags, return_counts=True)
        return {self.tag_name(int(c)): int(n) for c, n in zip(codes, num)}

    @property
    def undetermined_fraction(self) -> float:
        return float(np.mean(self.tags == Tag.UNDETERMINED))

    def to_csv(self, path) -> None:
        u, v = self.axis_values()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.axes[0], self.axes[1], "tag", "t_decided"])
            for i, vv in enumerate(v):
                for j, uu in enumerate(u):
                    w.writerow([f"{uu:.9g}", f"{vv:.9g}", self.tag_name(int(self.tags[i, j])),
                                f"{self.t_decided[i, j]:.9g}"])

    def to_pgm(self, path) -> None:
        """Binary P5 graymap; row i holds v[i], so v increases downward."""
        lut = {int(c): self.gray(int(c)) for c in np.unique(self.tags)}
        img = np.vectorize(lut.get, otypes=[np.uint8])(self.tags)
        n2, n1 = img.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{n1} {n2}\n255\n".encode("ascii"))
            fh.write(np.ascontiguousarray(img).tobytes())


_FOUR = ndimage.generate_binary_structure(2, 1)


def count_regions(cmap: ClassificationMap, include_undetermined: bool = False) -> dict:
    """4-connected components per tag; returns {tag name: count}."""
    out = {}
    for code in np.unique(cmap.tags):
        if code == Tag.UNDETERMINED and not include_undetermined:
            continue
        _, n = ndimage.label(cmap.tags == code, structure=_FOUR)
        out[cmap.tag_name(int(code))] = int(n)
    return out


def isolated_cells(cmap: ClassificationMap) -> np.ndarray:
    """Mask of determined cells without a same-tag 4-neighbour."""
    t = cmap.tags
    p = np.pad(t, 1, constant_values=-1)
    same = ((p[:-2, 1:-1] == t) | (p[2:, 1:-1] == t)
            | (p[1:-1, :-2] == t) | (p[1:-1, 2:] == t))
    return ~same & (t != Tag.UNDETERMINED)


def _chunks(n, parts):
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_map(worker, args_for, n, jobs):
    jobs = max(1, int(jobs or os.cpu_count() or 1))
    if jobs == 1 or n < 2:
        return worker(*args_for(0, n))
    parts = _chunks(n, jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(worker, *zip(*(args_for(a, b) for a, b in parts))))
    return tuple(np.concatenate(r) for r in zip(*results))


def _sweep_worker(sys, S0, gamma_s, targets, thr):
    tags, tdec, _ = classify_batch(sys, S0, gamma_s, targets, thr)
    return tags, tdec


def sweep(sys: AugSystem, x0: float, y0: float, gamma_s: ClosedOrbit, targets: Targets,
          q1_range=(-5.0, 5.0), q2_range=(-5.0, 5.0), resolution=(101, 101),
          thresholds: Thresholds = Thresholds(), jobs: Optional[int] = 1) -> ClassificationMap:
    """Classify the (q1, q2) grid at fixed (x0, y0).

    ``jobs`` worker processes each take contiguous cell blocks; None means
    all available cores.
    """
    n1, n2 = resolution
    if n1 < 1 or n2 < 1:
        raise ValueError("grid must be nonempty")
    q1 = np.linspace(*q1_range, n1)
    q2 = np.linspace(*q2_range, n2)
    Q1, Q2 = np.meshgrid(q1, q2)  # rows follow q2
    N = Q1.size
    S0 = np.vstack([np.full(N, float(x0)), np.full(N, float(y0)), Q1.ravel(), Q2.ravel()])
    tags, tdec = _run_map(_sweep_worker,
                          lambda a, b: (sys, S0[:, a:b], gamma_s, targets, thresholds), N, jobs)
    return ClassificationMap(("q1", "q2"), (tuple(q1_range), tuple(q2_range)), (n1, n2),
                             tags.reshape(n2, n1), tdec.reshape(n2, n1), base=(x0, y0))


# one-dimensional system ---------------------------------------------------

def classify_batch_1d(field, rho: float, S0, roots, thr: Thresholds = Thresholds()):
    """Classify columns (x, q) of ``S0``; stable root i gives ROOT_BASE + i."""
    S = np.array(S0, dtype=float).reshape(2, -1).copy()
    N = S.shape[1]
    roots = np.asarray(roots, dtype=float)
    tags = np.zeros(N, dtype=np.int64)
    tdec = np.full(N, np.nan)
    count = np.zeros(N, dtype=np.int64)
    last = np.full(N, -1, dtype=np.int64)
    need = thr.dwell_checks + 1
    advance = oned_block_stepper(field, rho)
    if advance is None:
        advance = lambda u, h, n: _rk4_block(lambda v: rhs_1d(field, rho, v), u, h, n)
    alive = np.arange(N)
    n_checks = int(round(thr.horizon / thr.dt_check))
    k = 0
    with np.errstate(all="ignore"):
        while alive.size:
            s = S[:, alive]
            if k > 0:
                s = advance(s, thr.h, thr.substeps)
                S[:, alive] = s
            bad = _blown(s, thr.blowup_radius)
            d = np.abs(s[0][:, None] - roots[None, :])
            near = np.argmin(d, axis=1)
            hit = (d[np.arange(alive.size), near] + np.abs(s[1]) < thr.eps_fp) & ~bad
            idx = np.where(hit, near, -1)
            same = (idx == last[alive]) & hit
            count[alive] = np.where(same, count[alive] + 1, np.where(hit, 1, 0))
            last[alive] = idx
            dec = np.zeros(alive.size, dtype=np.int64)
            ok = count[alive] >= need
            dec[ok] = ROOT_BASE + idx[ok]
            dec[bad] = Tag.DIVERGED
            done = dec > 0
            tags[alive[done]] = dec[done]
            tdec[alive[done]] = k * thr.dt_check
            alive = alive[~done]
            k += 1
            if k > n_checks:
                break
    return tags, tdec, S


def _sweep1d_worker(field, rho, S0, roots, thr):
    tags, tdec, _ = classify_batch_1d(field, rho, S0, roots, thr)
    return tags, tdec


def sweep_1d(field, rho: float, x_range=(-3.0, 3.0), q_range=(-4.0, 4.0),
             resolution=(201, 201), thresholds: Thresholds = Thresholds(),
             jobs: Optional[int] = 1) -> ClassificationMap:
    """Classify the (x, q) plane of the scalar discounted system."""
    roots = tuple(field.stable_roots)
    if len(roots) < 2:
        raise ValueError("need at least two stable roots")
    n1, n2 = resolution
    x = np.linspace(*x_range, n1)
    q = np.linspace(*q_range, n2)
    X, Q = np.meshgrid(x, q)
    N = X.size
    S0 = np.vstack([X.ravel(), Q.ravel()])
    tags, tdec = _run_map(_sweep1d_worker,
                          lambda a, b: (field, rho, S0[:, a:b], roots, thresholds), N, jobs)
    return ClassificationMap(("x", "q"), (tuple(x_range), tuple(q_range)), (n1, n2),
                             tags.reshape(n2, n1), tdec.reshape(n2, n1), root_positions=roots)
