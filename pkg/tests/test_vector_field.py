import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabctl.kernels import bvp_local, circle_local
from stabctl.vector_field import (PLANAR_MODELS, BvpParams, CircleField, bvp_field,
                                  fd_second_partials, hessian_terms, jacobian_error,
                                  second_partials_error)

coord = st.floats(-3, 3, allow_nan=False)


def test_bvp_formulas_at_unit_point(bvp):
    f, g = bvp.eval(1.0, 0.0)
    assert f == pytest.approx(3 * (1 - 1 / 3 - 0.342), abs=1e-12)
    assert f == pytest.approx(0.974, abs=1e-12)
    # g = -(x - a + b y) / c
    assert g == pytest.approx(-(1.0 - 0.7) / 3.0, abs=1e-12)


def test_bvp_jacobian_entries_at_origin(bvp):
    np.testing.assert_allclose(bvp.DF([0.0, 0.0]), [[3.0, 3.0], [-1 / 3, -0.8 / 3]], atol=1e-14)


def test_bvp_second_partials(bvp):
    fxx, fxy, fyy, gxx, gxy, gyy = bvp.second_partials(1.5, -0.7)
    assert fxx == pytest.approx(-2 * 3.0 * 1.5)
    assert (fxy, fyy, gxx, gxy, gyy) == (0, 0, 0, 0, 0)


def test_bvp_residual_at_reported_fixed_point(bvp):
    assert np.linalg.norm(bvp.F([0.958366, -0.322957])) <= 1e-4


def test_bvp_rejects_zero_c():
    with pytest.raises(ValueError):
        bvp_field(BvpParams(c=0.0))
    with pytest.raises(ValueError):
        BvpParams(c=0.0)


@pytest.mark.parametrize("name", sorted(PLANAR_MODELS))
def test_registered_field_derivatives_match_finite_differences(name, rng):
    field = PLANAR_MODELS[name]()
    pts = rng.uniform(-3, 3, size=(1000, 2))
    assert max(jacobian_error(field, z) for z in pts) <= 1e-6
    assert max(second_partials_error(field, z) for z in pts) <= 1e-5


@pytest.mark.parametrize("name", sorted(PLANAR_MODELS))
def test_mixed_partials_symmetric_under_both_stencils(name, rng):
    field = PLANAR_MODELS[name]()
    for z in rng.uniform(-3, 3, size=(50, 2)):
        fd = fd_second_partials(field, z)
        assert fd["f_xy"] == pytest.approx(fd["f_yx"], abs=1e-6)
        assert fd["g_xy"] == pytest.approx(fd["g_yx"], abs=1e-6)


def test_hessian_terms_examples(bvp):
    assert hessian_terms(bvp, [0.3, 0.2], [0.0, 0.0]) == (0, 0, 0, 0)
    h1, h2, h3, h4 = hessian_terms(bvp, [1.0, 0.0], [2.0, 5.0])
    assert h1 == pytest.approx(-12.0)
    assert h2 == h3 == h4 == 0


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord, st.floats(-10, 10, allow_nan=False))
def test_hessian_terms_linear_in_q(x, y, q1, q2, alpha):
    field = CircleField()
    a = np.array(hessian_terms(field, [x, y], [alpha * q1, alpha * q2]))
    b = alpha * np.array(hessian_terms(field, [x, y], [q1, q2]))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    assert a[1] == a[2]


@settings(max_examples=200, deadline=None)
@given(coord, coord)
def test_compiled_kernels_agree_with_fields(x, y):
    bvp = bvp_field()
    p = np.array([0.7, 0.8, 3.0, 0.342])
    np.testing.assert_allclose(bvp_local(x, y, p), [*bvp.eval(x, y), *bvp.jac(x, y)],
                               rtol=1e-13, atol=1e-13)
    c = CircleField()
    np.testing.assert_allclose(circle_local(x, y, np.zeros(1)), [*c.eval(x, y), *c.jac(x, y)],
                               rtol=1e-13, atol=1e-13)


def test_fields_evaluate_on_arrays(bvp):
    x = np.linspace(-2, 2, 7)
    f, g = bvp.eval(x, 0.5 * x)
    assert f.shape == g.shape == (7,)
