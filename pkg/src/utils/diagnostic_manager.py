"""
実行環境の診断

CPU・メモリ（psutil）、依存パッケージ、ジェット演算の自己検査を行い、
レポートの environment 節にまとめます。診断は結果に影響しないので、
ここでの失敗は例外にせず診断結果として返します。
"""

import importlib
import logging
import platform
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
import psutil

from src.utils.logger_config import ErrorCode, get_logger

SELF_CHECK_POINT = (0.3, -0.2)
SELF_CHECK_TOL = 1e-6

# 使用率（%）がこれ以上なら WARNING
CPU_BUSY_PERCENT = 70.0
MEMORY_BUSY_PERCENT = 80.0


class DiagnosticStatus(Enum):
    HEALTHY = "healthy"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"
    UNKNOWN = "unknown"


# 健全性スコアの配点（満点は HEALTHY の 4 点）
STATUS_POINTS = {
    DiagnosticStatus.HEALTHY: 4,
    DiagnosticStatus.WARNING: 2,
    DiagnosticStatus.ERROR: 1,
    DiagnosticStatus.UNKNOWN: 1,
    DiagnosticStatus.CRITICAL: 0,
}


def _grade(percent: float, limit: float) -> DiagnosticStatus:
    return DiagnosticStatus.HEALTHY if percent < limit else DiagnosticStatus.WARNING


@dataclass
class DiagnosticResult:
    """1 項目分の診断結果"""

    component: str
    status: DiagnosticStatus
    message: str
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "component": self.component,
            "status": self.status.value,
            "message": self.message,
            "details": dict(self.details or {}),
        }


class SystemDiagnosticManager:
    """環境診断をまとめて実行し、健全性スコアを出す"""

    REQUIRED_PACKAGES = {"numpy": "numpy", "scipy": "scipy", "attrs": "attrs"}

    def __init__(self) -> None:
        self.app_logger = get_logger()
        self.logger = logging.getLogger(__name__)
        self.diagnostic_results: List[DiagnosticResult] = []

    def run_full_diagnostics(self) -> List[DiagnosticResult]:
        self.diagnostic_results = [
            *self._diagnose_system_resources(),
            *self._diagnose_dependencies(),
            *self._diagnose_jet_engine(),
        ]
        for result in self.diagnostic_results:
            if result.status in (DiagnosticStatus.ERROR, DiagnosticStatus.CRITICAL):
                self.app_logger.warning(
                    "Diagnostics",
                    f"{result.component}: {result.message}",
                    error_code=ErrorCode.SYSTEM_DEPENDENCY_ERROR,
                )
        self.logger.debug("診断 %d 項目を実行", len(self.diagnostic_results))
        return self.diagnostic_results

    def _diagnose_system_resources(self) -> List[DiagnosticResult]:
        """CPU とメモリ。psutil が使えなければ 1 件の ERROR にまとめる"""
        try:
            return [self._probe_cpu(), self._probe_memory()]
        except Exception as e:
            return [
                DiagnosticResult(
                    "SystemResources",
                    DiagnosticStatus.ERROR,
                    f"リソース情報を取得できません: {e}",
                )
            ]

    def _probe_cpu(self) -> DiagnosticResult:
        percent = psutil.cpu_percent(interval=0.1)
        return DiagnosticResult(
            "CPU",
            _grade(percent, CPU_BUSY_PERCENT),
            f"CPU使用率 {percent:.1f}%",
            {
                "percent": percent,
                "count": psutil.cpu_count(),
                "machine": platform.machine(),
            },
        )

    def _probe_memory(self) -> DiagnosticResult:
        memory = psutil.virtual_memory()
        return DiagnosticResult(
            "Memory",
            _grade(memory.percent, MEMORY_BUSY_PERCENT),
            f"メモリ使用率 {memory.percent:.1f}%",
            {"percent": memory.percent, "available_mb": memory.available // 2**20},
        )

    def _diagnose_dependencies(self) -> List[DiagnosticResult]:
        results = []
        for package_name, import_name in self.REQUIRED_PACKAGES.items():
            component = f"Package-{package_name}"
            try:
                module = importlib.import_module(import_name)
            except ImportError:
                results.append(
                    DiagnosticResult(
                        component,
                        DiagnosticStatus.CRITICAL,
                        f"{package_name} を import できません",
                    )
                )
                continue
            version = getattr(module, "__version__", "unknown")
            results.append(
                DiagnosticResult(
                    component,
                    DiagnosticStatus.HEALTHY,
                    f"{package_name} {version}",
                    {"version": version},
                )
            )
        return results

    def _diagnose_jet_engine(self) -> List[DiagnosticResult]:
        """sin(x)·exp(y) の 2 階ジェットをリチャードソン差分と突き合わせる"""
        from src.app import jets

        def fn(p: np.ndarray) -> np.ndarray:
            return np.asarray(np.sin(p[0]) * np.exp(p[1]))

        try:
            x, y = jets.lift(SELF_CHECK_POINT, 2)
            jet = jets.sin(x) * jets.exp(y)
            fd_grad = jets.richardson_gradient(fn, SELF_CHECK_POINT)
            fd_mixed = jets.richardson_partial(fn, SELF_CHECK_POINT, (1, 1))
            error = max(
                float(np.max(np.abs(jet.gradient() - fd_grad))),
                float(abs(jet.hessian()[0, 1] - fd_mixed)),
            )
        except Exception as e:
            return [
                DiagnosticResult(
                    "JetEngine", DiagnosticStatus.CRITICAL, f"自己検査が失敗: {e}"
                )
            ]
        status = DiagnosticStatus.HEALTHY
        if not error < SELF_CHECK_TOL:
            status = DiagnosticStatus.ERROR
        return [
            DiagnosticResult(
                "JetEngine",
                status,
                f"ジェットと差分の差 {error:.2e}",
                {"error": error, "tolerance": SELF_CHECK_TOL},
            )
        ]

    def get_health_score(self) -> Tuple[float, Dict[str, int]]:
        """0〜100 の健全性スコアとステータス別件数（未診断なら 0 点）"""
        if not self.diagnostic_results:
            return 0.0, {}
        counts = {status.value: 0 for status in DiagnosticStatus}
        points = 0
        for result in self.diagnostic_results:
            counts[result.status.value] += 1
            points += STATUS_POINTS[result.status]
        best = STATUS_POINTS[DiagnosticStatus.HEALTHY] * len(self.diagnostic_results)
        return 100.0 * points / best, counts

    def environment_section(self) -> Dict:
        results = self.run_full_diagnostics()
        score, counts = self.get_health_score()
        return {
            "health_score": score,
            "status_counts": counts,
            "python": platform.python_version(),
            "results": [r.to_dict() for r in results],
        }
