import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.app import jets
from src.app.errors import (
    DimensionMismatch,
    DivisionNearZero,
    DomainError,
    OrderOutOfRange,
)
from src.app.jets import Jet

POINT = (0.3, -0.2)
coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def sample_fn(p):
    return np.asarray(np.sin(p[0]) * np.exp(p[1]))


@pytest.fixture
def sin_exp():
    x, y = jets.lift(POINT, 4)
    return jets.sin(x) * jets.exp(y)


def test_lift_gives_coordinate_jets():
    x, y = jets.lift(POINT, 3)
    assert x.value == pytest.approx(0.3)
    np.testing.assert_allclose(x.gradient(), [1.0, 0.0])
    np.testing.assert_allclose(y.gradient(), [0.0, 1.0])
    np.testing.assert_allclose(x.hessian(), np.zeros((2, 2)))


def test_multi_indices_are_graded():
    idx = jets.multi_indices(2, 2)
    assert idx[0] == (0, 0)
    assert idx[1:3] == ((1, 0), (0, 1))
    assert [sum(a) for a in idx] == sorted(sum(a) for a in idx)


def test_partials_match_closed_form(sin_exp):
    s, c, e = math.sin(0.3), math.cos(0.3), math.exp(-0.2)
    assert sin_exp.value == pytest.approx(s * e)
    assert sin_exp.partial(0) == pytest.approx(c * e)
    assert sin_exp.partial(1) == pytest.approx(s * e)
    assert sin_exp.partial(0, 0, 1) == pytest.approx(-s * e)
    assert sin_exp.partial(0, 0, 0, 0) == pytest.approx(s * e)
    assert sin_exp.partial(0, 1, 1, 1) == pytest.approx(c * e)


def test_partials_agree_with_richardson(sin_exp):
    np.testing.assert_allclose(
        sin_exp.gradient(), jets.richardson_gradient(sample_fn, POINT), atol=1e-7
    )
    mixed = jets.richardson_partial(sample_fn, POINT, (1, 1))
    assert sin_exp.hessian()[0, 1] == pytest.approx(float(mixed), abs=1e-6)


def test_derivative_lowers_order(sin_exp):
    d = sin_exp.derivative(0)
    assert d.order == 3
    assert d.value == pytest.approx(math.cos(0.3) * math.exp(-0.2))
    assert d.partial(1) == pytest.approx(sin_exp.partial(0, 1))
    assert sin_exp.derivatives().shape == (2,)


def test_truncate_keeps_leading_coefficients(sin_exp):
    low = sin_exp.truncate(2)
    assert low.order == 2
    np.testing.assert_allclose(low.hessian(), sin_exp.hessian())
    with pytest.raises(OrderOutOfRange):
        low.partial(0, 0, 0)


def test_numpy_scalars_defer_to_jet(sin_exp):
    scaled = np.float64(2.0) * sin_exp
    assert isinstance(scaled, Jet)
    assert scaled.value == pytest.approx(2.0 * sin_exp.value)
    shifted = np.float64(1.0) + sin_exp
    assert isinstance(shifted, Jet)


def test_vector_jets_and_contractions():
    x, y = jets.lift((0.5, 1.5), 2)
    v = jets.stack([x, y, 1.0])
    assert v.shape == (3,)
    q = jets.dot(v, v)
    assert q.value == pytest.approx(0.25 + 2.25 + 1.0)
    np.testing.assert_allclose(q.gradient(), [1.0, 3.0])
    np.testing.assert_allclose(q.hessian(), 2.0 * np.eye(2))


def test_matrix_inverse_jet():
    x, y = jets.lift((0.1, 0.2), 4)
    M = jets.stack([jets.stack([1.0 + x, y]), jets.stack([y, 2.0 + x * y])])
    product = jets.jet_einsum("ij,jk->ik", M, jets.jet_inv(M))
    identity = Jet.constant(np.eye(2), 2, 4)
    np.testing.assert_allclose(product.coeffs, identity.coeffs, atol=1e-12)
    assert jets.trace(identity).value == pytest.approx(2.0)


def test_from_value_and_gradient():
    jet = Jet.from_value_and_gradient(np.zeros(3), np.arange(6.0).reshape(3, 2))
    assert jet.order == 1
    np.testing.assert_allclose(jet.gradient(), np.arange(6.0).reshape(3, 2))


@settings(max_examples=50, deadline=None)
@given(coords, coords, coords, coords)
def test_product_rule(a0, a1, b0, b1):
    x, y = jets.lift((a0, a1), 2)
    f = x * x + y
    g = jets.sin(y) + b0 * x + b1
    prod = f * g
    expected = f.value * g.gradient() + g.value * f.gradient()
    np.testing.assert_allclose(prod.gradient(), expected, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.1, max_value=5.0), st.floats(min_value=0.1, max_value=5.0))
def test_log_exp_inverse(a0, a1):
    x, y = jets.lift((a0, a1), 4)
    f = x * y + 1.0
    round_trip = jets.exp(jets.log(f))
    np.testing.assert_allclose(round_trip.coeffs, f.coeffs, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.2, max_value=3.0), st.integers(min_value=-3, max_value=4))
def test_integer_powers(a0, k):
    (x,) = jets.lift((a0,), 4)
    value = jets.pow_int(x, k)
    assert value.value == pytest.approx(a0**k)
    assert value.partial(0) == pytest.approx(k * a0 ** (k - 1))


def test_sqrt_squares_back():
    (x,) = jets.lift((2.0,), 4)
    r = jets.sqrt(x)
    np.testing.assert_allclose((r * r).coeffs, x.coeffs, atol=1e-12)


def test_order_range_enforced():
    with pytest.raises(OrderOutOfRange):
        jets.lift((0.0,), jets.MAX_ORDER + 1)
    with pytest.raises(OrderOutOfRange):
        Jet.constant(1.0, 2, -1)


def test_mismatched_inputs_rejected():
    (x,) = jets.lift((1.0,), 2)
    y, _ = jets.lift((1.0, 2.0), 2)
    with pytest.raises(DimensionMismatch):
        x + y
    with pytest.raises(DimensionMismatch):
        Jet(np.zeros(4), 2, 2)


def test_domain_errors():
    (x,) = jets.lift((-1.0,), 2)
    with pytest.raises(DomainError):
        jets.log(x)
    with pytest.raises(DomainError):
        jets.sqrt(x)
    with pytest.raises(DomainError):
        jets.sqrt(-4.0)


def test_division_near_zero():
    (x,) = jets.lift((0.0,), 2)
    with pytest.raises(DivisionNearZero):
        jets.reciprocal(x)
    with pytest.raises(DivisionNearZero):
        x / 0.0
    (z,) = jets.lift((2.0,), 2)
    assert (1.0 / z).value == pytest.approx(0.5)
