import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from stabctl.assumptions import bvp_D_rho_interval
from stabctl.augmented import AugSystem
from stabctl.integrator import (IntegrationSpec, Termination, integrate,
                                integrate_backward_escape, rk4_step)


def oscillator(s):
    return np.array([s[1], -s[0]])


@pytest.mark.parametrize("method", ["dopri5", "rk4"])
def test_linear_decay(method):
    tr = integrate(lambda s: -s, [1.0], IntegrationSpec(dt=1e-3, t_max=5.0, method=method))
    assert tr.termination is Termination.REACHED_TMAX
    assert tr.times[-1] == pytest.approx(5.0)
    assert abs(tr.final[0] - np.exp(-5.0)) < 1e-6


@pytest.mark.parametrize("method", ["dopri5", "rk4"])
def test_harmonic_oscillator_period(method):
    tr = integrate(oscillator, [1.0, 0.0], IntegrationSpec(dt=1e-3, t_max=2 * np.pi, method=method))
    np.testing.assert_allclose(tr.final, [1.0, 0.0], atol=1e-5)


def test_times_strictly_increasing_and_states_finite(sys25):
    tr = integrate(sys25, [1.35, -0.26, 0.0, -5.0], IntegrationSpec(t_max=50))
    assert np.all(np.diff(tr.times) > 0)
    assert np.all(np.isfinite(tr.states))


def test_dopri_matches_reference_solver(sys25):
    s0 = np.array([1.35, -0.26, 0.0, -5.0])
    tr = integrate(sys25, s0, IntegrationSpec(t_max=20, abs_tol=1e-11, rel_tol=1e-11))
    ref = solve_ivp(lambda t, s: sys25(s), (0, 20), s0, method="DOP853", rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(tr.final, ref.y[:, -1], atol=1e-7)


def test_reference_trajectory_approaches_fixed_point(sys25, z_star):
    tr = integrate(sys25, [1.35, -0.26, 0.0, -5.0], IntegrationSpec(t_max=500))
    s = tr.final
    assert np.hypot(*(s[:2] - z_star)) + np.hypot(*s[2:]) < 1e-3


def test_rk4_convergence_order_on_cycle(bvp, gamma_s):
    f = lambda s: bvp.F(s)
    s0 = gamma_s.points[0]
    ends = []
    for dt in (0.02, 0.01, 0.005):
        tr = integrate(f, s0, IntegrationSpec(dt=dt, t_max=5.0, method="rk4"))
        ends.append(tr.final)
    ref = integrate(f, s0, IntegrationSpec(t_max=5.0, abs_tol=1e-13, rel_tol=1e-13)).final
    e = [np.linalg.norm(x - ref) for x in ends]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert orders.min() >= 3.5


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 5))
def test_forward_backward_round_trip(x, y, q1, q2, T):
    from stabctl.vector_field import bvp_field
    sysm = AugSystem(bvp_field(), 2.5)
    s0 = np.array([x, y, q1, q2])
    tight = dict(abs_tol=1e-12, rel_tol=1e-12, blowup_radius=1e6)
    fwd = integrate(sysm, s0, IntegrationSpec(t_max=T, **tight))
    if fwd.termination is not Termination.REACHED_TMAX:
        return
    back = integrate(sysm, fwd.final, IntegrationSpec(t_max=T, direction="backward", **tight))
    assert np.linalg.norm(back.final - s0) <= 1e-6 * (1 + np.linalg.norm(s0))


def test_immediate_blowup():
    tr = integrate(oscillator, [11.0, 0.0], IntegrationSpec(blowup_radius=10.0))
    assert tr.termination is Termination.BLOWUP
    assert len(tr.times) == 1


def test_blowup_in_finite_time():
    tr = integrate(lambda s: s * s, [1.0], IntegrationSpec(t_max=5.0))
    assert tr.termination is Termination.BLOWUP
    assert tr.times[-1] < 1.0


def test_step_underflow_is_stiffness_failure():
    # xdot = -1/(2x) reaches the singularity x = 0 at t = 1
    tr = integrate(lambda s: -0.5 / s, [1.0], IntegrationSpec(t_max=5.0))
    assert tr.termination is Termination.STIFFNESS_FAILURE
    assert tr.times[-1] == pytest.approx(1.0, abs=1e-3)


def test_step_budget_is_stiffness_failure():
    tr = integrate(lambda s: -s, [1.0], IntegrationSpec(dt=1e-3, t_max=5.0, method="rk4",
                                                        max_steps=100))
    assert tr.termination is Termination.STIFFNESS_FAILURE


def test_event_stops_run():
    tr = integrate(oscillator, [1.0, 0.0], IntegrationSpec(t_max=10), lambda t, s: s[0] < 0)
    assert tr.termination is Termination.EVENT_HIT
    assert tr.final[0] < 0
    assert tr.times[-1] < np.pi


def test_backward_direction_reverses_flow():
    tr = integrate(lambda s: -s, [1.0], IntegrationSpec(t_max=2.0, direction="backward"))
    assert tr.final[0] == pytest.approx(np.exp(2.0), rel=1e-7)


def test_rk4_step_exact_for_cubic_time():
    # rk4 integrates polynomial-in-time right-hand sides of degree <= 3 exactly
    out = rk4_step(lambda s: np.array([1.0, 3 * s[0] ** 2]), np.array([0.0, 0.0]), 0.5)
    np.testing.assert_allclose(out, [0.5, 0.125], rtol=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        IntegrationSpec(dt=0)
    with pytest.raises(ValueError):
        IntegrationSpec(direction="sideways")
    with pytest.raises(ValueError):
        IntegrationSpec(blowup_radius=-1)


def test_initial_state_must_be_finite():
    with pytest.raises(ValueError):
        integrate(oscillator, [np.nan, 0.0])


def test_trajectory_csv(tmp_path, sys25):
    tr = integrate(sys25, [1.35, -0.26, 0.0, -5.0], IntegrationSpec(t_max=1.0))
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x", "y", "q1", "q2"]
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][0]) == pytest.approx(1.0)


def test_backward_escape_from_fixed_point_neighbourhood(sys25, z_star, params):
    strip = bvp_D_rho_interval(params, 2.5)
    region = lambda z: bool(strip.contains(z[0]))
    for q in ([1e-4, 0.0], [0.0, 1e-4], [-5e-4, 5e-4]):
        s0 = np.r_[z_star + [2e-4, 0.0], q]
        tr = integrate_backward_escape(sys25, s0, IntegrationSpec(t_max=200), region)
        assert tr.termination is Termination.EVENT_HIT
        assert not strip.contains(tr.final[0])


def test_backward_orbit_on_q_zero_approaches_unstable_cycle(sys25, z_star, gamma_s, gamma_u):
    z0 = np.array([1.2, z_star[1]])
    assert gamma_s.contains(z0[None])[0] and not gamma_u.contains(z0[None])[0]
    tr = integrate_backward_escape(sys25, np.r_[z0, 0.0, 0.0], IntegrationSpec(t_max=100))
    assert tr.termination is Termination.REACHED_TMAX
    assert np.all(tr.states[:, 2:] == 0.0)
    assert gamma_u.planar_distance(tr.final[None, :2])[0] < 1e-3
