import json
from types import SimpleNamespace

import pytest

from src.utils import logger_config
from src.utils.diagnostic_manager import (
    DiagnosticResult,
    DiagnosticStatus,
    SystemDiagnosticManager,
)
from src.utils.logger_config import DupinLabLogger, ErrorCode, LogLevel


@pytest.fixture
def app_logger(tmp_path):
    return DupinLabLogger(log_dir=tmp_path, file_logging=False)


def test_log_records_and_listeners(app_logger):
    received = []
    app_logger.add_listener(received.append)
    app_logger.info("Test", "hello")
    app_logger.error(
        "Test",
        "broken",
        error_code=ErrorCode.CHECK_FAILED,
        exception=ValueError("bad"),
        context={"exit_code": 1},
    )
    assert [r.message for r in received] == ["hello", "broken"]
    errors = app_logger.get_error_logs()
    assert len(errors) == 1
    record = errors[0].to_dict()
    assert record["error_code"] == ErrorCode.CHECK_FAILED.value
    assert record["exception"] == "ValueError"
    assert record["context"] == {"exit_code": 1}
    assert json.loads(errors[0].to_json())["level"] == "ERROR"


def test_export_and_clear(app_logger, tmp_path):
    app_logger.warning("Test", "careful")
    path = tmp_path / "logs.json"
    assert app_logger.export_logs(path)
    assert json.loads(path.read_text(encoding="utf-8"))[0]["message"] == "careful"
    assert app_logger.export_logs(tmp_path / "logs.txt", "text")
    assert not app_logger.export_logs(tmp_path / "logs.xml", "xml")
    app_logger.clear_logs()
    assert [r.message for r in app_logger.get_recent_logs()] == ["ログをクリアしました"]


def test_handlers_are_replaced_not_stacked(tmp_path):
    first = DupinLabLogger(log_dir=tmp_path)
    second = DupinLabLogger(log_dir=tmp_path)
    root = logger_config.logging.getLogger()
    ours = [h for h in root.handlers if getattr(h, "_dupinlab", False)]
    assert len(ours) == 2
    assert set(second.log_handlers) == {"console", "file"}
    assert first.file_logging


def test_debug_mode_adds_trace_level(tmp_path):
    debug_logger = DupinLabLogger(debug_mode=True, log_dir=tmp_path)
    assert "json" in debug_logger.log_handlers
    debug_logger.trace("Test", "deep")
    assert debug_logger.get_recent_logs(1)[0].level is LogLevel.TRACE
    # 後続のテストのためにルートロガーを通常モードへ戻す
    DupinLabLogger(log_dir=tmp_path, file_logging=False)


def test_get_logger_is_shared():
    assert logger_config.get_logger() is logger_config.get_logger()


def fake_memory(percent):
    return SimpleNamespace(percent=percent, available=2 * 2**30)


def test_resource_diagnostics(mocker):
    mocker.patch("src.utils.diagnostic_manager.psutil.cpu_percent", return_value=12.0)
    mocker.patch("src.utils.diagnostic_manager.psutil.cpu_count", return_value=8)
    mocker.patch(
        "src.utils.diagnostic_manager.psutil.virtual_memory",
        return_value=fake_memory(91.0),
    )
    results = SystemDiagnosticManager()._diagnose_system_resources()
    by_name = {r.component: r for r in results}
    assert by_name["CPU"].status is DiagnosticStatus.HEALTHY
    assert by_name["CPU"].details["count"] == 8
    assert by_name["Memory"].status is DiagnosticStatus.WARNING
    assert by_name["Memory"].details["available_mb"] == 2048


def test_resource_failure_is_reported(mocker):
    mocker.patch(
        "src.utils.diagnostic_manager.psutil.cpu_percent",
        side_effect=RuntimeError("no /proc"),
    )
    results = SystemDiagnosticManager()._diagnose_system_resources()
    assert [r.status for r in results] == [DiagnosticStatus.ERROR]


def test_missing_package_is_critical(mocker):
    manager = SystemDiagnosticManager()
    mocker.patch.object(
        SystemDiagnosticManager, "REQUIRED_PACKAGES", {"nothing": "no_such_package_xyz"}
    )
    results = manager._diagnose_dependencies()
    assert results[0].status is DiagnosticStatus.CRITICAL


def test_jet_self_check_is_healthy():
    result = SystemDiagnosticManager()._diagnose_jet_engine()[0]
    assert result.status is DiagnosticStatus.HEALTHY
    assert result.details["error"] < 1e-6


def test_environment_section(mocker):
    mocker.patch("src.utils.diagnostic_manager.psutil.cpu_percent", return_value=10.0)
    mocker.patch("src.utils.diagnostic_manager.psutil.cpu_count", return_value=4)
    mocker.patch(
        "src.utils.diagnostic_manager.psutil.virtual_memory",
        return_value=fake_memory(20.0),
    )
    section = SystemDiagnosticManager().environment_section()
    assert section["health_score"] == pytest.approx(100.0)
    assert section["status_counts"]["healthy"] == len(section["results"])
    assert {r["component"] for r in section["results"]} >= {"CPU", "JetEngine"}


def test_health_score_weights():
    manager = SystemDiagnosticManager()
    assert manager.get_health_score() == (0.0, {})
    manager.diagnostic_results = [
        DiagnosticResult("a", DiagnosticStatus.HEALTHY, ""),
        DiagnosticResult("b", DiagnosticStatus.WARNING, ""),
        DiagnosticResult("c", DiagnosticStatus.CRITICAL, ""),
    ]
    score, counts = manager.get_health_score()
    assert score == pytest.approx(50.0)
    assert counts["critical"] == 1
    assert manager.diagnostic_results[0].to_dict()["details"] == {}
