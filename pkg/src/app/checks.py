"""
検証結果の記録型

各チェックは名前・タグ・残差・許容値を持ち、合否は残差 < 許容値で決まります。
"""

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np


@dataclass
class CheckRecord:
    name: str
    tag: str
    residual: float
    tolerance: float

    def __post_init__(self) -> None:
        if self.residual < 0.0:
            raise ValueError(f"{self.name}: 残差が負です ({self.residual})")

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.residual):
            return False
        return self.residual < self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tag": self.tag,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


@dataclass
class SuiteReport:
    """チェック群と派生サマリー"""

    suite: str
    checks: list[CheckRecord] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def add(
        self, name: str, tag: str, residual: float, tolerance: float
    ) -> CheckRecord:
        record = CheckRecord(name, tag, float(residual), float(tolerance))
        self.checks.append(record)
        return record

    def extend(self, records: Iterable[CheckRecord]) -> None:
        self.checks.extend(records)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> Optional[CheckRecord]:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def residual(self, name: str) -> float:
        record = self.get(name)
        if record is None:
            raise KeyError(name)
        return record.residual

    def failing_tags(self) -> list[str]:
        tags: list[str] = []
        for c in self.checks:
            if not c.passed and c.tag not in tags:
                tags.append(c.tag)
        return tags

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary,
        }


def max_abs(values: Any) -> float:
    arr = np.asarray(values, dtype=float)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def drift(samples: Iterable[Any]) -> float:
    """格子全体での各成分の変動幅（max − min）の最大値"""
    stacked = np.array([np.asarray(s, dtype=float) for s in samples])
    if stacked.size == 0:
        return 0.0
    return float(np.max(stacked.max(axis=0) - stacked.min(axis=0)))


def strict_upper(value: float, bound: float, tol: float) -> float:
    """value < bound を残差にする（value が bound − tol 以下なら 0）

    返す残差は非負で、残差 < tol と value < bound が同値になります。
    """
    return max(0.0, float(value) - float(bound) + float(tol))
