"""Explicit Runge-Kutta integration: classical RK4 and Dormand-Prince 5(4).

Backward runs integrate ds/dtau = -rhs(s); the recorded times are the
increasing reversed time tau, so physical time is ``-tau``.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

Rhs = Callable[[np.ndarray], np.ndarray]
Event = Callable[[float, np.ndarray], bool]


class Termination(Enum):
    REACHED_TMAX = "reached_tmax"
    BLOWUP = "blowup"
    EVENT_HIT = "event_hit"
    STIFFNESS_FAILURE = "stiffness_failure"


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 1e-3
    t_max: float = 500.0
    direction: str = "forward"
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    blowup_radius: float = 1e3
    method: str = "dopri5"
    max_step: float = np.inf
    max_steps: int = 5_000_000

    def __post_init__(self):
        for name in ("dt", "t_max", "abs_tol", "rel_tol", "blowup_radius", "max_step",
                     "max_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        if self.method not in ("dopri5", "rk4"):
            raise ValueError("method must be 'dopri5' or 'rk4'")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    termination: Termination

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, header=("t", "x", "y", "q1", "q2")) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, s in zip(self.times, self.states):
                w.writerow([f"{t:.9g}"] + [f"{v:.9g}" for v in s])


def rk4_step(rhs: Rhs, s: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(s)
    k2 = rhs(s + 0.5 * h * k1)
    k3 = rhs(s + 0.5 * h * k2)
    k4 = rhs(s + h * k3)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dopri_step(rhs: Rhs, s, h, k1):
    ks = [k1]
    for i in range(1, 6):
        acc = s.copy()
        for a, k in zip(_A[i], ks):
            if a:
                acc += (h * a) * k
        ks.append(rhs(acc))
    s_new = s.copy()
    for b, k in zip(_B5, ks):
        if b:
            s_new += (h * b) * k
    k7 = rhs(s_new)
    ks.append(k7)
    err = np.zeros_like(s)
    for e, k in zip(_E, ks):
        if e:
            err += (h * e) * k
    return s_new, err, k7


def _blown(s, radius) -> bool:
    return not np.all(np.isfinite(s)) or float(np.sqrt(np.dot(s, s))) > radius


def integrate(rhs: Rhs, s0, spec: IntegrationSpec = IntegrationSpec(),
              event: Optional[Event] = None) -> Trajectory:
    """Integrate an autonomous ODE until t_max, blowup, or ``event`` fires.

    Parameters
    ----------
    rhs : callable
        ``rhs(s) -> ds/dt`` for an n-vector ``s``.
    s0 : array-like
        Finite initial state.
    spec : IntegrationSpec
        Step size (initial step for ``dopri5``), horizon, direction,
        tolerances and blowup radius.
    event : callable, optional
        ``event(t, s) -> bool`` checked after every accepted step;
        returning True stops the run with ``EVENT_HIT``.

    Returns
    -------
    Trajectory
        One sample per accepted step. A ``BLOWUP`` run ends with the first
        sample whose norm exceeds the radius (possibly non-finite).
    """
    s = np.array(s0, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("initial state must be finite")
    f = rhs if spec.direction == "forward" else (lambda u: -rhs(u))

    times = [0.0]
    states = [s.copy()]
    if _blown(s, spec.blowup_radius):
        return Trajectory(np.array(times), np.array(states), Termination.BLOWUP)

    t = 0.0
    t_max = spec.t_max
    h = min(spec.dt, spec.max_step, t_max)
    h_min = 1e-12 * t_max
    termination = Termination.REACHED_TMAX
    adaptive = spec.method == "dopri5"
    k1 = f(s) if adaptive else None

    n_steps = 0
    while t < t_max:
        n_steps += 1
        if n_steps > spec.max_steps:  # chattering at tiny accepted steps
            termination = Termination.STIFFNESS_FAILURE
            break
        h = min(h, t_max - t)
        if adaptive:
            s_new, err, k7 = _dopri_step(f, s, h, k1)
            scale = spec.abs_tol + spec.rel_tol * np.maximum(np.abs(s), np.abs(s_new))
            with np.errstate(invalid="ignore", over="ignore"):
                e = float(np.max(np.abs(err) / scale))
            if not np.isfinite(e):
                if not np.all(np.isfinite(s_new)) and h <= h_min:
                    times.append(t + h)
                    states.append(s_new)
                    termination = Termination.BLOWUP
                    break
                e = 1e10
            if e > 1.0:
                h *= max(0.2, 0.9 * e ** -0.2)
                if h < h_min:
                    termination = Termination.STIFFNESS_FAILURE
                    break
                continue
            # accepted step
            t_new = t + h
            fac = 5.0 if e == 0.0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
            h_next = min(h * fac, spec.max_step)
            k1 = k7
        else:
            s_new = rk4_step(f, s, h)
            t_new = t + h
            h_next = min(spec.dt, spec.max_step)
        t, s = t_new, s_new
        times.append(t)
        states.append(s.copy())
        if _blown(s, spec.blowup_radius):
            termination = Termination.BLOWUP
            break
        if event is not None and event(t, s):
            termination = Termination.EVENT_HIT
            break
        if t_max - t <= 1e-14 * t_max:
            break
        h = h_next

    return Trajectory(np.array(times), np.array(states), termination)


def integrate_backward_escape(sys, s0, spec: IntegrationSpec = IntegrationSpec(),
                              region: Optional[Callable[[np.ndarray], bool]] = None
                              ) -> Trajectory:
    """Backward-time run that stops once the planar projection leaves ``region``.

    ``region(z) -> bool`` tests membership of z = (x, y); EVENT_HIT means the
    orbit escaped in finite backward time.
    """
    back = dataclasses.replace(spec, direction="backward")
    event = None
    if region is not None:
        event = lambda t, s: not region(s[:2])
    return integrate(sys, s0, back, event)
