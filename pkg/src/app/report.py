"""
実行レポート

チェック結果・派生サマリー・分類結果・所要時間・実行環境を 1 つの JSON 文書にまとめます。
フィールド順は固定で、所要時間と environment 以外は同じ設定なら同じ出力になります。
"""

import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

import numpy as np

from src import __version__
from src.app.checks import CheckRecord, SuiteReport
from src.utils.logger_config import ErrorCode, get_logger

TOOL_NAME = "dupinlab"

logger = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """numpy 型・タプル・非有限値を JSON で表せる形にする"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def summarize(samples: Iterable[Any]) -> dict[str, Any]:
    """成分ごとの最小・最大と変動幅"""
    stacked = np.array([np.asarray(s, dtype=float) for s in samples])
    if stacked.size == 0:
        return {"min": [], "max": [], "drift": 0.0}
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    return {"min": lo, "max": hi, "drift": float(np.max(hi - lo))}


@dataclass
class Report:
    command: str
    config: dict[str, Any]
    suites: list[SuiteReport] = field(default_factory=list)
    summaries: dict[str, Any] = field(default_factory=dict)
    outcome: Optional[dict[str, Any]] = None
    error: Optional[dict[str, Any]] = None
    timings: dict[str, float] = field(default_factory=dict)
    environment: dict[str, Any] = field(default_factory=dict)

    def add_suite(self, suite: SuiteReport) -> SuiteReport:
        self.suites.append(suite)
        if suite.summary:
            self.summaries[suite.suite] = suite.summary
        return suite

    @property
    def checks(self) -> list[tuple[str, CheckRecord]]:
        return [(s.suite, c) for s in self.suites for c in s.checks]

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for _, c in self.checks)

    def failing_tags(self) -> list[str]:
        tags: list[str] = []
        for _, c in self.checks:
            if not c.passed and c.tag not in tags:
                tags.append(c.tag)
        return tags

    @contextmanager
    def timed(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start

    def to_dict(self) -> dict[str, Any]:
        checks = []
        for suite, c in self.checks:
            record = {"suite": suite}
            record.update(c.to_dict())
            checks.append(record)
        return to_jsonable(
            {
                "tool": TOOL_NAME,
                "version": __version__,
                "command": self.command,
                "config": self.config,
                "passed": self.passed,
                "failing_tags": self.failing_tags(),
                "checks": checks,
                "summaries": self.summaries,
                "outcome": self.outcome,
                "error": self.error,
                "timings": self.timings,
                "environment": self.environment,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def write(self, path: Optional[str]) -> None:
        """path が None なら標準出力へ"""
        text = self.to_json()
        if path is None:
            print(text)
            return
        try:
            Path(path).write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            get_logger().error(
                "Report",
                f"レポートを書き込めません: {path}",
                error_code=ErrorCode.REPORT_WRITE_ERROR,
                exception=e,
            )
            raise
        logger.info("report written to %s", path)


def deterministic_view(report_dict: dict[str, Any]) -> dict[str, Any]:
    """所要時間と environment を除いた比較用の写し"""
    return {k: v for k, v in report_dict.items() if k not in ("timings", "environment")}
