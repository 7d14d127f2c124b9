import math

import numpy as np
import pytest

from src.app import moebius
from src.app.errors import DimensionMismatch, PatternMismatch, UmbilicPoint
from src.app.families import build_family
from src.app.immersion import Immersion
from src.app.minkowski import inner, is_null, orthochronous_from, random_orthochronous

SQRT3 = math.sqrt(3.0)
CONE_POINT = (1.5, 0.8, 0.7)


@pytest.fixture(scope="module")
def cone_data(cone):
    return moebius.moebius_invariants(cone.immersion, CONE_POINT)


@pytest.fixture(scope="module")
def cone_sample(cone):
    return moebius.structure_sample(cone.immersion, CONE_POINT)


@pytest.fixture(scope="module")
def torus():
    return build_family("clifford-torus")


def test_cone_spectrum_matches_reference(cone, cone_data):
    np.testing.assert_allclose(cone_data.b, cone.reference["b_spectrum"], atol=1e-9)
    np.testing.assert_allclose(
        cone_data.b, [-1.0 / SQRT3, 0.0, 1.0 / SQRT3], atol=1e-9
    )
    expected = np.array(cone.reference["moebius_pairs"])[:, :2]
    np.testing.assert_allclose(cone_data.pairs, expected, atol=1e-9)
    assert cone_data.r == 3


def test_cone_scalars(cone_data):
    assert cone_data.rho * CONE_POINT[0] == pytest.approx(SQRT3, abs=1e-9)
    assert np.trace(cone_data.A) == pytest.approx(1.0 / 6.0, abs=1e-9)
    np.testing.assert_allclose(cone_data.C, 0.0, atol=1e-9)
    E = cone_data.frame
    np.testing.assert_allclose(E.T @ cone_data.g @ E, np.eye(3), atol=1e-10)


def test_light_cone_frame(cone_data):
    Y, xi, N = cone_data.Y, cone_data.xi, cone_data.N
    assert is_null(Y, tol=1e-9)
    assert is_null(N, tol=1e-8)
    assert inner(Y, N) == pytest.approx(1.0, abs=1e-8)
    assert inner(xi, xi) == pytest.approx(1.0, abs=1e-10)
    assert inner(xi, Y) == pytest.approx(0.0, abs=1e-10)
    assert inner(xi, N) == pytest.approx(0.0, abs=1e-8)


def test_moebius_position(cone):
    rho, Y, xi = moebius.moebius_position(cone.immersion, CONE_POINT)
    assert rho == pytest.approx(SQRT3 / CONE_POINT[0])
    assert Y.signature.dim == 6
    assert xi.signature == Y.signature


def test_cone_structure_equations_hold(cone_sample):
    residuals = moebius.equation_residuals(cone_sample)
    assert set(moebius.STRUCTURE_TAGS) <= set(residuals)
    for name, value in residuals.items():
        assert value < 1e-6, name


def test_perturbed_B_is_detected(cone_sample):
    broken = moebius.with_perturbed_B(cone_sample, (0, 0), 0.01)
    residuals = moebius.equation_residuals(broken)
    assert residuals["trace-identities"] > 1e-3
    assert residuals["gauss"] > 1e-3
    # 元の標本は変わらない
    assert moebius.equation_residuals(cone_sample)["trace-identities"] < 1e-6


def test_verify_integrability_on_small_grid(cone, small_grid):
    report = moebius.verify_integrability(cone.immersion, small_grid(cone.immersion))
    assert report.suite == "moebius"
    assert report.passed, report.failing_tags()
    assert report.get("b-divergence").tag == "equa3"
    assert {c.tag for c in report.checks} == {f"equa{k}" for k in range(1, 7)}
    assert report.summary["grid_points"] == 8


@pytest.mark.slow
def test_verify_integrability_on_default_grid(cone):
    report = moebius.verify_integrability(cone.immersion)
    assert report.passed, report.failing_tags()
    assert report.summary["grid_points"] == 64


def test_cone_is_moebius_isoparametric(cone, small_grid):
    grid = small_grid(cone.immersion)
    verdict = moebius.is_moebius_isoparametric(cone.immersion, grid)
    assert verdict.verdict
    assert verdict.r_values == [3]
    assert verdict.ratio_drift < 1e-9
    assert verdict.to_dict()["verdict"] is True


def test_ellipsoid_is_not_isoparametric(ellipsoid, small_grid):
    verdict = moebius.is_moebius_isoparametric(
        ellipsoid.immersion, small_grid(ellipsoid.immersion)
    )
    assert not verdict.verdict
    assert verdict.max_C > 1e-3


def test_umbilic_sphere_rejected():
    sphere = build_family("sphere")
    with pytest.raises(UmbilicPoint):
        moebius.moebius_invariants(sphere.immersion, sphere.immersion.base_point)


def test_curves_rejected():
    curve = Immersion(
        name="curve",
        dim_in=1,
        dim_out=2,
        box=((0.0, 1.0),),
        components=lambda c: [c[0], c[0] * c[0]],
    )
    with pytest.raises(DimensionMismatch):
        moebius.moebius_invariants(curve, (0.5,))


def test_linear_dependence():
    rng = np.random.default_rng(3)
    B = np.diag([-0.5, 0.1, 0.4])
    g = np.eye(3)
    coef = moebius.check_linear_dependence(2.0 * B + 3.0 * g, B)
    assert coef == pytest.approx((2.0, 3.0))
    noise = rng.normal(size=(3, 3))
    assert moebius.check_linear_dependence(noise + noise.T, B) is None
    with pytest.raises(DimensionMismatch):
        moebius.check_linear_dependence(np.eye(2), B)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_invariants_survive_moebius_transforms(torus, small_grid, seed):
    M = random_orthochronous(seed, 5)
    transformed, report = moebius.apply_moebius(
        torus.immersion, M, small_grid(torus.immersion)
    )
    assert report.passed, [c.to_dict() for c in report.checks]
    assert transformed.dim_out == torus.immersion.dim_out
    assert report.summary["transform_defect"] < 1e-10


def test_boost_moves_principal_curvatures(torus, small_grid):
    M = orthochronous_from([0.3, -0.2, 0.5], 0.8, 5)
    _, report = moebius.apply_moebius(torus.immersion, M, small_grid(torus.immersion))
    assert report.passed
    assert report.summary["lambda_drift"] > 1e-2


def test_split_parameters(cone):
    lam, mu, block = moebius.split_parameters(
        np.array(cone.reference["moebius_pairs"])[:, :2]
    )
    assert lam == pytest.approx(0.0, abs=1e-12)
    assert mu == pytest.approx(-1.0 / 6.0)
    assert block == (1,)
    with pytest.raises(PatternMismatch):
        moebius.split_parameters([[0.5, 1.0], [0.5, -1.0]])


def test_cone_split_certificate(cone, small_grid):
    cert = moebius.cone_split_certificate(cone.immersion, small_grid(cone.immersion))
    assert cert.valid, cert.report.failing_tags()
    assert cert.K == pytest.approx(cone.reference["K"], abs=1e-9)
    assert cert.mu == pytest.approx(-1.0 / 6.0, abs=1e-9)
    assert len(cert.frames) == 8
    assert set(cert.frames[0]) == {"F", "P", "T"}
    tags = {c.tag for c in cert.report.checks}
    assert tags == {"frame", "cone-form", "cone-inv", "stru1"}
    assert cert.report.get("K-negative").residual == 0.0


def test_perturbed_split_frame_fails(cone, small_grid):
    cert = moebius.cone_split_certificate(
        cone.immersion, small_grid(cone.immersion), perturbation=0.05
    )
    assert not cert.valid
    assert not cert.report.get("P-unit").passed
    assert cert.report.get("P-unit").residual == pytest.approx(0.0075, rel=1e-3)


def test_cone_lambda_pattern(cone_data):
    lambdas = np.sort(cone_data.lambdas)
    t = CONE_POINT[0]
    np.testing.assert_allclose(np.abs(lambdas[[0, 2]]), 1.0 / t, atol=1e-9)
    assert lambdas[1] == pytest.approx(0.0, abs=1e-9)
    assert math.isclose(lambdas[0], -lambdas[2], abs_tol=1e-9)


def test_cone_over_perturbed_torus_is_not_isoparametric(small_grid):
    cone = build_family("cone-clifford", perturbation=0.1)
    assert cone.reference["moebius_isoparametric"] is False
    verdict = moebius.is_moebius_isoparametric(
        cone.immersion, small_grid(cone.immersion)
    )
    assert not verdict.verdict
