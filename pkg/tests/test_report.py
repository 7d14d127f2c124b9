import json
import math

import numpy as np
import pytest

from src import __version__
from src.app import report as report_mod
from src.app.checks import CheckRecord, SuiteReport, drift, max_abs, strict_upper
from src.app.report import Report


def make_suite(name, residual):
    suite = SuiteReport(suite=name, summary={"grid_points": 2})
    suite.add("gauss", "equa4", residual, 1e-6)
    suite.add("curl", "equa2", 0.0, 1e-6)
    return suite


def test_check_record_pass_rules():
    assert CheckRecord("a", "t", 1e-9, 1e-6).passed
    assert not CheckRecord("a", "t", 1e-6, 1e-6).passed
    assert not CheckRecord("a", "t", math.nan, 1e-6).passed
    assert not CheckRecord("a", "t", math.inf, 1e-6).passed
    assert not CheckRecord("a", "t", 0.0, 0.0).passed
    assert CheckRecord("a", "t", 1e-9, 1e-6).to_dict()["pass"] is True


def test_negative_residual_is_rejected():
    with pytest.raises(ValueError):
        CheckRecord("a", "t", -1e-3, 1e-6)
    with pytest.raises(ValueError):
        SuiteReport(suite="s").add("a", "t", -0.5, 0.0)


@pytest.mark.parametrize(
    "value, passed",
    [(-1.0, True), (-1e-6, True), (0.0, False), (1e-9, False), (0.3, False)],
)
def test_strict_upper_encodes_strict_inequality(value, passed):
    tol = 1e-6
    residual = strict_upper(value, 0.0, tol)
    assert residual >= 0.0
    assert CheckRecord("strict", "t", residual, tol).passed is passed


def test_suite_report_queries():
    suite = make_suite("moebius", 1e-3)
    assert not suite.passed
    assert suite.failing_tags() == ["equa4"]
    assert suite.residual("gauss") == pytest.approx(1e-3)
    assert suite.get("missing") is None
    with pytest.raises(KeyError):
        suite.residual("missing")
    suite.extend([CheckRecord("extra", "equa4", 1.0, 1e-6)])
    assert suite.failing_tags() == ["equa4"]
    assert suite.to_dict()["passed"] is False


def test_max_abs_and_drift():
    assert max_abs([]) == 0.0
    assert max_abs([[1.0, -3.0], [2.0, 0.5]]) == 3.0
    assert drift([]) == 0.0
    assert drift([[1.0, 2.0], [1.5, 2.0], [0.5, 2.1]]) == pytest.approx(1.0)


def test_to_jsonable():
    data = report_mod.to_jsonable(
        {
            "array": np.arange(3),
            "float": np.float64(0.25),
            "flag": np.bool_(True),
            "nan": math.nan,
            "inf": -math.inf,
            1: (np.int64(2), 3),
            "record": CheckRecord("a", "t", 0.1, 1.0),
        }
    )
    assert data["array"] == [0, 1, 2]
    assert data["float"] == 0.25
    assert data["flag"] is True
    assert data["nan"] == "nan"
    assert data["inf"] == "-inf"
    assert data["1"] == [2, 3]
    assert data["record"]["pass"] is True
    json.dumps(data)


def test_summarize():
    summary = report_mod.summarize([[0.0, 1.0], [0.5, 1.25]])
    np.testing.assert_allclose(summary["min"], [0.0, 1.0])
    np.testing.assert_allclose(summary["max"], [0.5, 1.25])
    assert summary["drift"] == pytest.approx(0.5)
    assert report_mod.summarize([])["drift"] == 0.0


def test_report_document():
    rep = Report(command="verify-moebius", config={"family": "cone-clifford"})
    rep.add_suite(make_suite("moebius", 1e-9))
    with rep.timed("verify"):
        pass
    data = rep.to_dict()
    assert list(data) == [
        "tool",
        "version",
        "command",
        "config",
        "passed",
        "failing_tags",
        "checks",
        "summaries",
        "outcome",
        "error",
        "timings",
        "environment",
    ]
    assert data["tool"] == "dupinlab"
    assert data["version"] == __version__
    assert data["passed"] is True
    assert data["checks"][0]["suite"] == "moebius"
    assert data["summaries"]["moebius"]["grid_points"] == 2
    assert data["timings"]["verify"] >= 0.0


def test_failures_and_errors_fail_the_report():
    rep = Report(command="verify-moebius", config={})
    rep.add_suite(make_suite("moebius", 1.0))
    assert not rep.passed
    assert rep.failing_tags() == ["equa4"]

    errored = Report(command="classify", config={})
    errored.error = {"name": "InvalidCloud", "message": "too small"}
    assert not errored.passed


def test_deterministic_view_drops_volatile_fields():
    rep = Report(command="examples", config={"threads": 1})
    rep.environment = {"health_score": 100.0}
    with rep.timed("total"):
        pass
    view = report_mod.deterministic_view(rep.to_dict())
    assert "timings" not in view
    assert "environment" not in view
    assert view["command"] == "examples"


def test_write_to_file_and_stdout(tmp_path, capsys):
    rep = Report(command="examples", config={})
    path = tmp_path / "report.json"
    rep.write(str(path))
    assert json.loads(path.read_text(encoding="utf-8"))["command"] == "examples"
    rep.write(None)
    assert json.loads(capsys.readouterr().out)["tool"] == "dupinlab"


def test_write_failure_is_raised(tmp_path):
    rep = Report(command="examples", config={})
    with pytest.raises(OSError):
        rep.write(str(tmp_path / "missing-dir" / "report.json"))
