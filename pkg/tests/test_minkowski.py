import numpy as np
import pytest

from src.app.errors import InvalidTransform, SignatureMismatch
from src.app.minkowski import (
    LorentzTransform,
    Signature,
    SignedVector,
    apply,
    inner,
    is_null,
    lorentz_inner,
    orthochronous_from,
    random_orthochronous,
)


def test_signatures():
    m = Signature.moebius(3)
    assert m.dim == 6
    np.testing.assert_allclose(m.diagonal, [-1, 1, 1, 1, 1, 1])
    lag = Signature.laguerre(3)
    assert lag.dim == 7
    np.testing.assert_allclose(lag.diagonal, [-1, 1, 1, 1, 1, 1, -1])


@pytest.mark.parametrize("dim, slots", [(0, (0,)), (3, (3,)), (3, (1, 1))])
def test_invalid_signature(dim, slots):
    with pytest.raises(SignatureMismatch):
        Signature(dim, slots)


def test_signed_vector_shape_checked():
    with pytest.raises(SignatureMismatch):
        SignedVector(np.zeros(3), Signature.moebius(2))


def test_inner_product_and_null_vectors():
    sig = Signature.moebius(2)
    x = SignedVector([1.0, 1.0, 0.0, 0.0, 0.0], sig)
    y = SignedVector([2.0, 0.0, 1.0, 0.0, 0.0], sig)
    assert is_null(x)
    assert inner(x, y) == pytest.approx(-2.0)
    assert y.norm2() == pytest.approx(-3.0)
    assert lorentz_inner(x.components, y.components, sig) == pytest.approx(-2.0)


def test_inner_rejects_mixed_signatures():
    a = SignedVector(np.ones(5), Signature.moebius(2))
    b = SignedVector(np.ones(6), Signature.moebius(3))
    with pytest.raises(SignatureMismatch):
        inner(a, b)


@pytest.mark.parametrize("seed", range(5))
def test_random_transforms_preserve_the_form(seed):
    M = random_orthochronous(seed, 6)
    assert M.defect() < 1e-12 * max(1.0, np.max(np.abs(M.matrix)) ** 2)
    assert M.matrix[0, 0] > 0
    sig = M.signature
    x = SignedVector([1.0, 0.2, -0.4, 0.5, 0.1, 0.3], sig)
    y = SignedVector([0.3, 1.0, 0.0, -0.2, 0.7, 0.4], sig)
    assert inner(apply(M, x), apply(M, y)) == pytest.approx(inner(x, y), abs=1e-9)


def test_random_transforms_are_reproducible():
    np.testing.assert_array_equal(
        random_orthochronous(7, 5).matrix, random_orthochronous(7, 5).matrix
    )


def test_composition():
    a = orthochronous_from([0.1, 0.2, 0.3], 0.5, 5)
    b = orthochronous_from([-0.4, 0.0, 1.0], -0.3, 5)
    c = a.compose(b)
    np.testing.assert_allclose(c.matrix, a.matrix @ b.matrix)


def test_time_reversal_rejected():
    sig = Signature.moebius(1)
    with pytest.raises(InvalidTransform):
        LorentzTransform(-np.eye(4), sig)


def test_non_isometry_rejected():
    sig = Signature.moebius(1)
    with pytest.raises(InvalidTransform):
        LorentzTransform(2.0 * np.eye(4), sig)


def test_orthochronous_from_checks_arguments():
    with pytest.raises(SignatureMismatch):
        orthochronous_from([0.1], 0.0, 3)
    with pytest.raises(SignatureMismatch):
        orthochronous_from([0.1], 0.0, 5)
