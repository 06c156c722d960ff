import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from stabctl.integrator import IntegrationSpec, integrate
from stabctl.limit_cycle import (ClosedOrbit, CycleStability, NoCycleFound, distance_to_orbit,
                                 find_cycle, point_in_polygon, signed_area, winding_number)
from stabctl.vector_field import CircleField


@pytest.fixture(scope="module")
def circle_orbit():
    return find_cycle(CircleField(), [0.1, 0.0], center=[0.0, 0.0])


def test_circle_cycle(circle_orbit):
    assert circle_orbit.period == pytest.approx(2 * np.pi, abs=1e-3)
    r = np.hypot(*circle_orbit.points.T)
    assert np.max(np.abs(r - 1)) < 1e-6
    assert circle_orbit.stability is CycleStability.STABLE
    assert circle_orbit.orientation == -1  # clockwise


def test_stable_cycle_extent(gamma_s):
    pts = gamma_s.points
    assert len(pts) >= 501
    assert np.all(np.abs(pts[:, 0]) <= 2.2)
    assert np.linalg.norm(pts[0] - pts[-1]) <= 1e-6
    assert gamma_s.stability is CycleStability.STABLE


@pytest.mark.parametrize("which", ["gamma_s", "gamma_u"])
def test_one_period_returns(bvp, which, request):
    orbit = request.getfixturevalue(which)
    sign = 1.0 if orbit.stability is CycleStability.STABLE else -1.0
    f = lambda u: sign * bvp.F(u)
    for k in (0, len(orbit.points) // 3):
        p = orbit.points[k]
        tr = integrate(f, p, IntegrationSpec(t_max=orbit.period, abs_tol=1e-12, rel_tol=1e-12))
        assert np.linalg.norm(tr.final - p) < 1e-4


def test_unstable_cycle_encloses_fixed_point_and_nests(gamma_s, gamma_u, z_star):
    assert gamma_u.stability is CycleStability.UNSTABLE
    assert gamma_u.contains(z_star[None])[0]
    assert np.all(gamma_s.contains(gamma_u.points))
    assert abs(winding_number(gamma_s.points, z_star)) == 1
    assert abs(winding_number(gamma_u.points, z_star)) == 1
    assert gamma_u.planar_distance(z_star[None])[0] > 0.01


@pytest.mark.parametrize("which", ["gamma_s", "gamma_u"])
def test_period_against_reference_solver(bvp, which, request, z_star):
    orbit = request.getfixturevalue(which)
    sign = 1.0 if orbit.stability is CycleStability.STABLE else -1.0
    p = orbit.points[0]
    # independent oracle: scipy with a section event one full turn later
    rel = p - z_star
    ang0 = np.arctan2(rel[1], rel[0])

    def section(t, u):
        return np.sin(np.arctan2(u[1] - z_star[1], u[0] - z_star[0]) - ang0)
    section.direction = 0
    ref = solve_ivp(lambda t, u: sign * bvp.F(u), (0, 2 * orbit.period), p, method="DOP853",
                    rtol=1e-12, atol=1e-12, events=section, dense_output=True)
    times = ref.t_events[0]
    ret = [t for t in times if t > 0.5 * orbit.period
           and np.linalg.norm(ref.sol(t) - p) < 1e-2]
    assert ret
    assert abs(ret[0] - orbit.period) / orbit.period < 1e-4


def test_no_cycle_when_orbit_spirals_in(bvp):
    with pytest.raises(NoCycleFound):
        find_cycle(bvp, [1.0, -0.33], "forward")


def test_no_cycle_when_orbit_escapes(bvp, z_star):
    with pytest.raises(NoCycleFound):
        find_cycle(bvp, [3.0, 3.0], "backward", center=z_star)


def test_distance_examples(gamma_s, circle_orbit):
    p = gamma_s.points[17]
    assert distance_to_orbit(np.r_[p, 0.0, 0.0], gamma_s) <= 1e-9
    assert distance_to_orbit(np.r_[p, 3.0, 4.0], gamma_s) == pytest.approx(5.0, abs=1e-9)
    assert distance_to_orbit([2.0, 0.0, 0.0, 0.0], circle_orbit) == pytest.approx(1.0, abs=1e-4)


def test_planar_distance_matches_brute_force(gamma_s, rng):
    z = np.column_stack([rng.uniform(-2.5, 2.5, 2000), rng.uniform(-1, 2, 2000)])
    fast = gamma_s.planar_distance(z)
    slow = np.array([distance_to_orbit(np.r_[p, 0, 0], gamma_s) for p in z[:300]])
    np.testing.assert_allclose(fast[:300], slow, atol=1e-12)
    near = z[np.argsort(fast)[:200]]  # points close to the orbit
    slow_near = np.array([distance_to_orbit(np.r_[p, 0, 0], gamma_s) for p in near])
    np.testing.assert_allclose(gamma_s.planar_distance(near), slow_near, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-2, 3)), min_size=1, max_size=50))
def test_star_index_matches_ray_casting(pts):
    from stabctl.vector_field import bvp_field
    orbit = _cached_orbit()
    z = np.array(pts)
    np.testing.assert_array_equal(orbit.contains(z), point_in_polygon(z, orbit.points))


_ORBIT = {}


def _cached_orbit():
    if "o" not in _ORBIT:
        from stabctl.vector_field import bvp_field
        _ORBIT["o"] = find_cycle(bvp_field(), [2.0, 0.0])
    return _ORBIT["o"]


def test_point_in_polygon_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    z = np.array([[0.5, 0.5], [1.5, 0.5], [-0.1, 0.2], [0.99, 0.01]])
    assert list(point_in_polygon(z, sq)) == [True, False, False, True]
    assert signed_area(sq[:-1]) == pytest.approx(1.0)
    assert winding_number(sq, [0.5, 0.5]) == 1
    assert winding_number(sq, [2.0, 0.5]) == 0


def test_non_star_polygon_falls_back_to_ray_casting():
    # U shape: not star-shaped about its centroid
    u = np.array([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3], [0, 0]], float)
    orbit = ClosedOrbit(u, 1.0, CycleStability.STABLE)
    z = np.array([[0.5, 2.0], [1.5, 2.0], [2.5, 2.5], [1.5, 0.5]])
    assert list(orbit.contains(z)) == [True, False, True, True]


def test_cycle_csv(tmp_path, gamma_s):
    path = tmp_path / "c.csv"
    gamma_s.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "y"]
    assert len(rows) == len(gamma_s.points) + 1
