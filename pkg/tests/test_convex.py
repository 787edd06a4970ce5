import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcboost.convex import (
    L1,
    Linear,
    Quadratic,
    SubdiffBox,
    Sum,
    expr_from_dict,
    separable_coefficients,
)

from conftest import random_expr, random_point


# --- values ---------------------------------------------------------------


def test_value_quadratic_plus_linear():
    f = Quadratic(1.5) + Linear([1.0, 1.0])
    assert f.value([1.0, 1.0]) == pytest.approx(5.0, abs=1e-15)


def test_value_l1_at_origin():
    assert L1(1.0).value([0.0, 0.0]) == 0.0


def test_value_empty_sum():
    assert Sum(()).value([3.0, -2.0, 7.0]) == 0.0


def test_value_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        Linear([1.0, 1.0]).value([1.0, 2.0, 3.0])


# --- canonical subgradients -------------------------------------------------


def test_subgrad_l1_sign_zero_is_zero():
    np.testing.assert_allclose(L1(1.0).subgrad([0.0, -2.0]), [0.0, -1.0])


def test_subgrad_quad_plus_l1():
    f = Quadratic(0.5) + L1(1.0)
    v = f.subgrad([1.0, 1.0])
    np.testing.assert_allclose(v, [2.0, 2.0])
    assert f.subdiff_box([1.0, 1.0]).contains(v)


def test_subgrad_linear_constant():
    np.testing.assert_allclose(Linear([1.0, 1.0]).subgrad([9.0, -4.0]), [1.0, 1.0])


# --- subdifferential boxes --------------------------------------------------


def test_box_l1_kink_and_smooth():
    box = L1(1.0).subdiff_box([0.0, 3.0])
    np.testing.assert_allclose(box.lo, [-1.0, 1.0])
    np.testing.assert_allclose(box.hi, [1.0, 1.0])


def test_box_degenerate_at_smooth_point():
    f = Quadratic(0.5) + L1(1.0)
    x = np.array([-1.0, -1.0])
    box = f.subdiff_box(x)
    np.testing.assert_allclose(box.lo, [-2.0, -2.0])
    np.testing.assert_allclose(box.hi, [-2.0, -2.0])
    # definition check: every box corner satisfies the subgradient inequality
    rng = np.random.default_rng(7)
    for _ in range(100):
        z = rng.uniform(-4, 4, 2)
        for v in ([box.lo[0], box.lo[1]], [box.hi[0], box.hi[1]]):
            assert f.value(z) >= f.value(x) + np.dot(v, z - x) - 1e-12


def test_box_sum_is_minkowski_sum():
    f1 = L1(1.0)
    f2 = Quadratic(0.5) + L1(1.0)
    x = np.array([0.0, 3.0])
    combined = (f1 + f2).subdiff_box(x)
    added = f1.subdiff_box(x) + f2.subdiff_box(x)
    np.testing.assert_allclose(combined.lo, added.lo)
    np.testing.assert_allclose(combined.hi, added.hi)


@pytest.mark.parametrize("x0", [0.0, 0.7, -1.3])
def test_box_tightness_1d(x0):
    # interval grid points satisfy the subgradient inequality; values just
    # outside either endpoint fail it for some z (the violating z sits within
    # O(1e-6) of the base point, with margin about delta^2 / (2 sigma))
    f = Quadratic(0.5) + L1(1.0)
    x = np.array([x0])
    box = f.subdiff_box(x)
    coarse = np.linspace(-3, 3, 101)
    fine = x0 + np.linspace(-4e-6, 4e-6, 2001)
    zs = np.concatenate([coarse, fine])

    def worst_slack(v):
        vals = 0.5 * zs**2 + np.abs(zs)
        return np.min(vals - (f.value(x) + v * (zs - x0)))

    for v in np.linspace(box.lo[0], box.hi[0], 25):
        assert worst_slack(v) >= -1e-12
    for v in (box.lo[0] - 1e-6, box.hi[0] + 1e-6):
        assert worst_slack(v) < -1e-14


def test_membership_gap_and_projection():
    box = SubdiffBox(np.array([-1.0, 2.0]), np.array([1.0, 2.0]))
    assert box.membership_gap([0.0, 2.0]) == 0.0
    assert box.membership_gap([1.5, 2.0]) == pytest.approx(0.5)
    np.testing.assert_allclose(box.project([5.0, 0.0]), [1.0, 2.0])


# --- certified approximate subgradients --------------------------------------


def test_linearization_cert_quadratic_by_hand():
    f = Quadratic(0.5)
    cert = f.linearization_cert([1.0], [0.8])
    assert cert.w[0] == pytest.approx(0.8)
    assert cert.eps_achieved == pytest.approx(0.02, abs=1e-15)
    # relaxed subgradient inequality on a grid of evaluation points
    for z in np.linspace(-2, 2, 81):
        assert 0.5 * z**2 >= 0.5 + 0.8 * (z - 1.0) - cert.eps_achieved - 1e-12


def test_linearization_cert_linear_piece_has_zero_gap():
    cert = L1(1.0).linearization_cert([1.0], [0.5])
    assert cert.w[0] == pytest.approx(1.0)
    assert cert.eps_achieved == 0.0


def test_eps_subgrad_zero_target_is_exact(rng):
    f = Quadratic(0.7) + L1(0.3)
    x = np.array([1.0, -2.0, 0.0])
    cert = f.eps_subgrad(x, 0.0, rng)
    np.testing.assert_allclose(cert.w, f.subgrad(x))
    assert cert.eps_achieved == 0.0


def test_eps_subgrad_respects_budget(rng):
    for _ in range(50):
        dim = int(rng.integers(1, 5))
        f = random_expr(rng, dim)
        x = random_point(rng, dim)
        target = float(rng.uniform(0.0, 0.2))
        cert = f.eps_subgrad(x, target, rng)
        assert 0.0 <= cert.eps_achieved <= target
        # soundness of the certificate at sampled evaluation points
        for _ in range(20):
            z = random_point(rng, dim, scale=5.0)
            assert f.value(z) >= (
                f.value(x) + cert.w @ (z - x) - cert.eps_achieved - 1e-10
            )


# --- moduli -----------------------------------------------------------------


def test_modulus_examples():
    assert (Quadratic(1.5) + Linear([1.0, 1.0])).modulus() == 3.0
    assert Quadratic(0.5).modulus() == 1.0
    assert L1(1.0).modulus() == 0.0


# --- eps-widened boxes --------------------------------------------------------


def test_eps_box_reduces_to_exact_at_zero(rng):
    for _ in range(20):
        dim = int(rng.integers(1, 4))
        f = random_expr(rng, dim)
        x = random_point(rng, dim)
        exact = f.subdiff_box(x)
        widened = f.eps_subdiff_box(x, 0.0)
        np.testing.assert_allclose(widened.lo, exact.lo)
        np.testing.assert_allclose(widened.hi, exact.hi)


def test_eps_box_1d_atoms_are_exact():
    # quadratic: 2at +- 2 sqrt(a eps); l1: [-b,b] cut by v t >= b|t| - eps
    eps = 0.09
    qbox = Quadratic(1.0).eps_subdiff_box([2.0], eps)
    assert qbox.lo[0] == pytest.approx(4.0 - 2 * np.sqrt(eps))
    assert qbox.hi[0] == pytest.approx(4.0 + 2 * np.sqrt(eps))
    lbox = L1(1.0).eps_subdiff_box([0.5], eps)
    assert lbox.lo[0] == pytest.approx(1.0 - eps / 0.5)
    assert lbox.hi[0] == pytest.approx(1.0)
    # membership is exactly the relaxed inequality for the endpoint values
    f = L1(1.0)
    x = np.array([0.5])
    for v in (lbox.lo[0], lbox.hi[0]):
        for z in np.linspace(-3, 3, 61):
            assert f.value([z]) >= f.value(x) + v * (z - 0.5) - eps - 1e-12
    for z in np.linspace(-3, 3, 61):
        if f.value([z]) < f.value(x) + (lbox.lo[0] - 1e-3) * (z - 0.5) - eps:
            break
    else:
        pytest.fail("value below the widened interval should violate somewhere")


# --- hypothesis properties -----------------------------------------------------


finite = st.floats(-5, 5, allow_nan=False)


@st.composite
def expr_and_points(draw):
    dim = draw(st.integers(1, 3))
    a = draw(st.floats(0, 2))
    b = draw(st.floats(0, 2))
    c = draw(st.lists(finite, min_size=dim, max_size=dim))
    f = Sum((Quadratic(a), L1(b), Linear(np.array(c))))
    x = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    y = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    return f, x, y


@settings(max_examples=60, deadline=None)
@given(expr_and_points())
def test_subgradient_inequality(data):
    f, x, z = data
    v = f.subgrad(x)
    assert f.value(z) >= f.value(x) + v @ (z - x) - 1e-12


@settings(max_examples=60, deadline=None)
@given(expr_and_points())
def test_strong_convexity_lower_bound(data):
    f, x, y = data
    sigma = f.modulus()
    v = f.subgrad(x)
    lhs = f.value(y)
    rhs = f.value(x) + v @ (y - x) + 0.5 * sigma * np.dot(y - x, y - x)
    assert lhs >= rhs - 1e-10


@settings(max_examples=60, deadline=None)
@given(expr_and_points())
def test_strong_monotonicity(data):
    f, x, y = data
    sigma = f.modulus()
    w, v = f.subgrad(x), f.subgrad(y)
    assert (w - v) @ (x - y) >= sigma * np.dot(y - x, y - x) - 1e-10


@settings(max_examples=60, deadline=None)
@given(expr_and_points())
def test_subgrad_lies_in_box(data):
    f, x, _ = data
    assert f.subdiff_box(x).contains(f.subgrad(x), tol=1e-12)


# --- serialization --------------------------------------------------------------


def test_json_round_trip(rng):
    for _ in range(20):
        dim = int(rng.integers(1, 4))
        f = random_expr(rng, dim)
        d = f.to_dict()
        json.dumps(d)  # must be plain data
        f2 = expr_from_dict(d)
        assert f2.to_dict() == d
        x = random_point(rng, dim)
        assert f.value(x) == pytest.approx(f2.value(x), abs=1e-15)


def test_schema_shape():
    f = Sum((Quadratic(2.0), Linear([1.0, -1.0]), L1(0.5)))
    assert f.to_dict() == {
        "sum": [{"quad": 2.0}, {"lin": [1.0, -1.0]}, {"l1": 0.5}]
    }


def test_expr_from_dict_rejects_garbage():
    with pytest.raises(ValueError):
        expr_from_dict({"nope": 1})
    with pytest.raises(ValueError):
        expr_from_dict({"quad": 1, "l1": 2})


# --- aggregation -----------------------------------------------------------------


def test_separable_coefficients():
    f = Sum((Quadratic(1.0), Sum((Quadratic(0.5), L1(0.25))), Linear([1.0, 2.0]), L1(0.75)))
    quad, lin, l1 = separable_coefficients(f, 2)
    assert quad == pytest.approx(1.5)
    np.testing.assert_allclose(lin, [1.0, 2.0])
    assert l1 == pytest.approx(1.0)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        Quadratic(-1.0)
    with pytest.raises(ValueError):
        L1(-0.5)
