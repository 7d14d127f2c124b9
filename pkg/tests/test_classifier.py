import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.app import classifier
from src.app.classifier import (
    EigenPair,
    Inconsistent,
    LinearlyDependent,
    PairCloud,
    Reducible,
)
from src.app.errors import CloudParseError, InvalidCloud, TolAmbiguous

STEREO_ROWS = [(1 / 36, 2 / 3), (7 / 36, -1 / 3), (7 / 36, -1 / 3)]


def test_pairs_are_merged_and_sorted():
    cloud = PairCloud.from_pairs([(0.2, 0.5), (0.1, -1.0, 2), (0.2, 0.5 + 1e-12)])
    assert cloud.s == 2
    assert cloud.n == 4
    assert cloud.pairs[0] == EigenPair(b=-1.0, a=0.1, multiplicity=2)
    assert cloud.pairs[1].multiplicity == 2
    assert cloud.to_dict()["r"] == 2


def test_small_clouds_rejected():
    with pytest.raises(InvalidCloud):
        PairCloud.from_pairs([(0.1, 0.2), (0.3, 0.4)])
    with pytest.raises(InvalidCloud):
        PairCloud.from_pairs([(0.1, 0.2, 0), (0.3, 0.4, 3)])
    with pytest.raises(InvalidCloud):
        PairCloud.from_pairs([(math.nan, 0.2, 3)])


def test_cone_cloud_is_reducible(cone):
    cloud = PairCloud.from_pairs(cone.reference["moebius_pairs"])
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Reducible)
    assert outcome.b_split == pytest.approx(0.0, abs=1e-12)
    assert outcome.a_split == pytest.approx(-1.0 / 6.0)
    assert outcome.gate == pytest.approx(-1.0 / 3.0)
    assert len(outcome.line) == 2
    assert outcome.verify(cloud)
    assert outcome.to_dict()["kind"] == "Reducible"


def test_stereographic_cloud_is_linearly_dependent(stereographic):
    cloud = PairCloud.from_pairs(stereographic.reference["moebius_pairs"])
    assert cloud.n == 3 and cloud.r == 2
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, LinearlyDependent)
    assert outcome.lambda_ == pytest.approx(-1.0 / 6.0)
    assert outcome.mu == pytest.approx(5.0 / 36.0)
    assert outcome.gate == pytest.approx(-0.25)
    assert outcome.verify(cloud)


def test_collinear_cloud_with_negative_gate():
    cloud = PairCloud.from_pairs([(0.7, -0.8), (0.55, -0.5), (0.2, 0.2)])
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, LinearlyDependent)
    assert outcome.lambda_ == pytest.approx(-0.5)
    assert outcome.mu == pytest.approx(0.3)
    assert outcome.gate == pytest.approx(-0.35)


def test_necessary_conditions_on_collinear_cloud():
    cloud = PairCloud.from_pairs([(0.7, -0.8), (0.55, -0.5), (0.2, 0.2)])
    report = classifier.necessary_conditions(cloud)
    assert report.summary["line_sets"] == 1
    assert not report.passed
    assert set(report.failing_tags()) == {"le31", "le5"}
    by_kind = {c.name.split()[0]: c for c in report.checks}
    assert by_kind["extreme-pair"].residual == pytest.approx(0.74)
    assert by_kind["line-ends"].residual == pytest.approx(0.3, abs=1e-5)
    assert by_kind["consecutive-products"].passed
    assert by_kind["slope-intercept"].residual == 0.0


def test_necessary_conditions_on_two_pair_line():
    report = classifier.necessary_conditions(PairCloud.from_pairs(STEREO_ROWS))
    assert report.passed
    assert [c.tag for c in report.checks] == ["le2"]


def test_positive_gate_is_inconsistent():
    cloud = PairCloud.from_pairs([(-1.0, 0.0), (-1.0, 1.0), (-1.0, 2.0)])
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "le4"
    assert outcome.verify(cloud)


def test_partial_collinear_subset_is_inconsistent():
    cloud = PairCloud.from_pairs([(0.0, 0.0), (-1.0, 1.0), (-2.0, 2.0), (5.0, 3.0)])
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "case2"
    assert len(outcome.pairs) == 3


def test_split_block_reducible():
    cloud = PairCloud.from_pairs([(-0.1, 0.5), (-0.15, 0.5), (-0.35, 1.0)])
    assert cloud.s > cloud.r
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Reducible)
    assert outcome.b_split == pytest.approx(0.5)
    assert outcome.a_split == pytest.approx(-0.15)


def test_split_block_with_broken_pair_relation():
    cloud = PairCloud.from_pairs([(0.1, 0.5), (0.2, 0.5), (0.0, 1.0)])
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "ble2"
    assert "5.500e-01" in outcome.detail


def test_line_with_positive_gate_and_same_sign_ends():
    cloud = PairCloud.from_pairs([(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)])
    report = classifier.necessary_conditions(cloud)
    assert {"le5", "le4"} <= set(report.failing_tags())
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "le4"


def test_residuals_are_never_negative():
    clouds = [
        [(0.7, -0.8), (0.55, -0.5), (0.2, 0.2)],
        [(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)],
        [(-1.0, 0.0), (-1.0, 1.0), (-1.0, 2.0)],
        STEREO_ROWS,
    ]
    for rows in clouds:
        report = classifier.necessary_conditions(PairCloud.from_pairs(rows))
        assert all(c.residual >= 0.0 for c in report.checks), rows


def test_minimal_slope_split_uses_partner_only():
    # アンカー (a, b) = (−1, 0) を分割ブロックにすると残りは a = 1 に乗るが、
    # 最小傾きの相手 (1, 3) では分割できない
    cloud = PairCloud.from_pairs([(-1.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, 3.0)])
    lowest = classifier.build_line_sets(cloud, 0)[0]
    assert lowest.size == 2
    assert lowest.members[0].b == pytest.approx(3.0)
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "case3"
    assert outcome.verify(cloud)


def test_three_pairs_on_one_eigenvalue_of_b():
    cloud = PairCloud.from_pairs([(0.1, 0.5), (0.2, 0.5), (0.3, 0.5), (0.0, 1.0)])
    report = classifier.necessary_conditions(cloud)
    vertical = [c for c in report.checks if c.name.startswith("vertical-line")]
    assert vertical and all(c.tag == "le2" for c in vertical)
    assert max(c.residual for c in vertical) == 1.0
    assert "le2" in report.failing_tags()
    outcome = classifier.classify(cloud)
    assert isinstance(outcome, Inconsistent)
    assert outcome.witness == "ble2"


def test_ambiguous_slopes_raise():
    cloud = PairCloud.from_pairs([(0.0, 0.0), (1.0, 1.0), (2.0 + 1e-6, 2.0)])
    with pytest.raises(TolAmbiguous):
        classifier.classify(cloud)


def test_parse_cloud_accepts_constant_expressions():
    text = "# stereographic\n1/36 2/3 1\n\n7/36  -1/3 2  # doubled\n"
    cloud = classifier.parse_cloud(text)
    assert cloud == PairCloud.from_pairs(STEREO_ROWS)
    assert classifier.parse_cloud("cos(0) 0 3").pairs[0].a == pytest.approx(1.0)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "# only a comment\n",
        "0.1 0.2\n",
        "0.1 0.2 3 4\n",
        "0.1 0.2 0\n",
        "0.1 0.2 x\n",
        "0.1 0.2 -1\n",
        "abc 0.2 3\n",
        "u1 0.2 3\n",
        "1/0 0.2 3\n",
    ],
)
def test_parse_cloud_errors(text):
    with pytest.raises(CloudParseError):
        classifier.parse_cloud(text)


def test_load_cloud(tmp_path):
    path = tmp_path / "cloud.txt"
    path.write_text("0.7 -0.8 1\n0.55 -0.5 1\n0.2 0.2 1\n", encoding="utf-8")
    assert classifier.load_cloud(str(path)).n == 3
    with pytest.raises(CloudParseError):
        classifier.load_cloud(str(tmp_path / "missing.txt"))


def test_cloud_from_spectrum():
    cloud = classifier.cloud_from_spectrum([[0.2, 0.1], [0.2, 0.1], [0.4, 0.3]])
    assert cloud.n == 3
    assert cloud.s == 2


@settings(max_examples=40, deadline=None)
@given(st.permutations(STEREO_ROWS + [(0.3, 0.9)]))
def test_classification_ignores_row_order(rows):
    reference = classifier.classify(PairCloud.from_pairs(STEREO_ROWS + [(0.3, 0.9)]))
    assert classifier.classify(PairCloud.from_pairs(rows)) == reference


@settings(max_examples=60, deadline=None)
@given(
    slope=st.floats(-1.0, 1.0),
    excess=st.floats(0.1, 1.0),
    bs=st.lists(st.integers(-5, 5), min_size=3, max_size=6, unique=True),
)
def test_points_on_a_feasible_line_are_dependent(slope, excess, bs):
    intercept = slope * slope / 2.0 + excess
    rows = [(slope * (k / 2.0) + intercept, k / 2.0) for k in bs]
    outcome = classifier.classify(PairCloud.from_pairs(rows))
    assert isinstance(outcome, LinearlyDependent)
    assert outcome.lambda_ == pytest.approx(slope, abs=1e-9)
    assert outcome.mu == pytest.approx(intercept, abs=1e-9)
    assert outcome.gate < 0
