import numpy as np
import pytest

from src.app import isotensor, laguerre
from src.app.errors import DimensionMismatch, UmbilicPoint, VanishingPrincipalCurvature
from src.app.families import build_family

ALGEBRAIC_RELATIONS = ("eta_p", "eta_Y", "p_Y", "eta_eta", "Y_Y", "Y_N", "N_N")


@pytest.fixture(scope="module")
def flat_point(flat_laguerre):
    return np.array([0.3, 0.25, 0.2])


@pytest.fixture(scope="module")
def flat_data(flat_laguerre, flat_point):
    return laguerre.laguerre_invariants(flat_laguerre.immersion, flat_point)


@pytest.fixture(scope="module")
def flat_sample(flat_laguerre, flat_point):
    return laguerre.laguerre_sample(flat_laguerre.immersion, flat_point)


def test_flat_invariants(flat_data):
    assert flat_data.r == 3
    np.testing.assert_allclose(flat_data.radii, 1.0 / flat_data.lambdas)
    assert flat_data.R == pytest.approx(np.mean(flat_data.radii))
    assert np.sum(flat_data.B * flat_data.B) == pytest.approx(1.0, abs=1e-10)
    assert np.trace(flat_data.B) == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(flat_data.L_eigenvalues, 0.0, atol=1e-8)
    assert flat_data.metric_gap < 1e-8


def test_light_cone_relations(flat_data):
    relations = flat_data.frame_relations()
    for key in ALGEBRAIC_RELATIONS:
        assert relations[key] < 1e-8, key
    assert flat_data.Y.signature.dim == 7


def test_flat_structure_equations(flat_sample):
    residuals = laguerre.laguerre_residuals(flat_sample)
    for name, value in residuals.items():
        assert value < 1e-6, name
    np.testing.assert_allclose(flat_sample.R, 0.0, atol=1e-8)


def test_perturbed_B_breaks_normalization(flat_sample):
    broken = laguerre.with_perturbed_B(flat_sample, (0, 0), 0.01)
    assert laguerre.laguerre_residuals(broken)["normalization"] > 1e-3


def test_verify_flat_family(flat_laguerre, small_grid):
    imm = flat_laguerre.immersion
    report = laguerre.verify_laguerre_integrability(imm, small_grid(imm))
    assert report.suite == "laguerre"
    assert report.passed, report.failing_tags()
    assert report.get("b-divergence").tag == "2.9"
    assert report.get("metric-consistency").tag == "lac"
    tags = {c.tag for c in report.checks}
    assert tags == {"2.5", "2.6", "2.7", "2.8", "2.9", "lac"}
    summary = report.summary
    assert summary["flatness"] < 1e-6
    assert summary["L_spectrum"]["kind"] == "Zero"
    assert summary["r_values"] == [3]
    assert summary["orientation"] in (1, -1)


@pytest.mark.slow
def test_verify_flat_family_default_grid(flat_laguerre):
    report = laguerre.verify_laguerre_integrability(flat_laguerre.immersion)
    assert report.passed, report.failing_tags()
    assert report.summary["grid_points"] == 64


def test_flat_family_is_laguerre_isoparametric(flat_laguerre, small_grid):
    imm = flat_laguerre.immersion
    verdict = laguerre.is_laguerre_isoparametric(imm, small_grid(imm))
    assert verdict.verdict
    assert verdict.r_values == [3]
    assert verdict.ratio_drift < 1e-6
    assert verdict.to_dict()["tolerance"] == 1e-6


def test_spectrum_of_flat_family(flat_data):
    verdict = laguerre.laguerre_spectrum(flat_data)
    assert verdict.kind == "Zero"


def test_tensor_fields_of_flat_family(flat_sample):
    b_field, l_field = laguerre.laguerre_tensor_fields(flat_sample)
    assert b_field.n == 3
    assert isotensor.codazzi_residual(b_field) < 1e-6
    assert isotensor.vanishing_pattern(b_field) < 1e-6
    assert l_field.R is not None


def test_cyclide_has_parallel_B(small_grid):
    cyclide = build_family("cyclide")
    parallel, norm = laguerre.is_parallel_B(
        cyclide.immersion, small_grid(cyclide.immersion)
    )
    assert parallel, norm


@pytest.mark.parametrize("n", [3, 4])
def test_recover_laguerre_tensor(n, rng):
    L = rng.normal(size=(n, n))
    L = L + L.T
    R = -isotensor.kulkarni_nomizu(L, np.eye(n))
    np.testing.assert_allclose(laguerre.recover_laguerre_tensor(R), L, atol=1e-12)


def test_recover_laguerre_tensor_surface():
    R = np.zeros((2, 2, 2, 2))
    R[0, 1, 0, 1] = R[1, 0, 1, 0] = -3.0
    R[0, 1, 1, 0] = R[1, 0, 0, 1] = 3.0
    np.testing.assert_allclose(laguerre.recover_laguerre_tensor(R), 1.5 * np.eye(2))


def test_orientation_prefers_positive_radii(ellipsoid):
    imm = laguerre.laguerre_oriented(ellipsoid.immersion.flipped())
    data = laguerre.laguerre_invariants(imm, imm.base_point, orient=False)
    assert np.all(data.radii > 0)


def test_cylinder_has_a_vanishing_curvature():
    cylinder = build_family("cylinder")
    with pytest.raises(VanishingPrincipalCurvature):
        laguerre.laguerre_invariants(cylinder.immersion, cylinder.immersion.base_point)


def test_sphere_is_laguerre_umbilic():
    sphere = build_family("sphere")
    with pytest.raises(UmbilicPoint):
        laguerre.laguerre_invariants(sphere.immersion, sphere.immersion.base_point)


def test_spherical_immersions_rejected():
    torus = build_family("clifford-torus")
    with pytest.raises(DimensionMismatch):
        laguerre.laguerre_oriented(torus.immersion)


def test_ellipsoid_is_not_laguerre_isoparametric(small_grid):
    ellipsoid = build_family("ellipsoid", semi_axes=[1.0, 1.3, 1.7, 2.1])
    imm = ellipsoid.immersion
    verdict = laguerre.is_laguerre_isoparametric(imm, small_grid(imm))
    assert not verdict.verdict
