"""
統合ログ

全モジュール共通のロガー。コンソール出力は標準エラーへ流し、標準出力は
JSON レポート専用に空けておく。ファイル出力はローテーション付きのテキストと、
デバッグ時のみ JSON Lines。ログディレクトリは ``DUPINLAB_LOG_DIR``。
"""

import json
import logging
import logging.handlers
import os
import sys
import traceback
from collections import deque
from datetime import datetime
from enum import Enum
from functools import partialmethod
from pathlib import Path
from typing import IO, Any, Callable, Deque, Dict, Iterable, Optional

import attrs

# メモリに保持するレコード数の上限
MAX_RECORDS = 10_000


class LogLevel(Enum):
    """標準レベルに格子点ごとの追跡用 TRACE を加えたもの"""

    TRACE = 5
    DEBUG = logging.DEBUG
    INFO = logging.INFO
    WARNING = logging.WARNING
    ERROR = logging.ERROR
    CRITICAL = logging.CRITICAL


logging.addLevelName(LogLevel.TRACE.value, "TRACE")


class ErrorCode(Enum):
    """サブシステム別のエラーコード（千の位が系統を表す）"""

    # 実行環境 (1xxx)
    SYSTEM_STARTUP_ERROR = 1001
    SYSTEM_MEMORY_ERROR = 1003
    SYSTEM_DEPENDENCY_ERROR = 1005
    SYSTEM_WORKER_ERROR = 1006

    # 設定・DSL・入力ファイル (2xxx)
    CONFIG_INVALID = 2001
    CONFIG_UNKNOWN_FAMILY = 2002
    DSL_SYNTAX_ERROR = 2003
    DSL_ARITY_ERROR = 2004
    DSL_UNKNOWN_IDENTIFIER = 2005
    CLOUD_PARSE_ERROR = 2006
    FAMILY_PARAMETER_ERROR = 2007

    # 幾何計算 (3xxx)
    GEOMETRY_ERROR = 3000
    JET_ORDER_OUT_OF_RANGE = 3001
    JET_DIVISION_NEAR_ZERO = 3002
    JET_DOMAIN_ERROR = 3003
    POINT_OUTSIDE_DOMAIN = 3004
    RANK_DEFICIENT = 3005
    GROUPING_AMBIGUOUS = 3006
    METRIC_NOT_POSITIVE = 3007
    UMBILIC_POINT = 3008
    VANISHING_PRINCIPAL_CURVATURE = 3009
    POINT_AT_INFINITY = 3010
    DEGENERATE_DENOMINATOR = 3011
    SIGNATURE_MISMATCH = 3012
    DIMENSION_MISMATCH = 3013

    # 検証 (4xxx)
    VERIFICATION_ERROR = 4000
    PATTERN_MISMATCH = 4001
    TOL_AMBIGUOUS = 4002
    INVALID_CLOUD = 4003
    CHECK_FAILED = 4004

    # 入出力 (5xxx)
    FILE_IO_ERROR = 5003
    REPORT_WRITE_ERROR = 5004


def _as_context(value: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    return dict(value or {})


@attrs.frozen
class LogRecord:
    """1 件のログ。メモリ上の履歴、リスナー、JSON 出力で共有する"""

    timestamp: datetime
    level: LogLevel
    component: str
    message: str
    error_code: Optional[ErrorCode] = None
    exception: Optional[BaseException] = attrs.field(default=None, eq=False)
    context: Dict[str, Any] = attrs.field(factory=dict, converter=_as_context)

    def to_dict(self) -> Dict[str, Any]:
        exc = self.exception
        return {
            "timestamp": self.timestamp.isoformat(),
            "level": self.level.name,
            "component": self.component,
            "message": self.message,
            "error_code": self.error_code.value if self.error_code else None,
            "exception": type(exc).__name__ if exc else None,
            "traceback": (
                traceback.format_exception(type(exc), exc, exc.__traceback__)
                if exc
                else None
            ),
            "context": self.context,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, default=str)

    def to_line(self) -> str:
        """テキストエクスポート用の 1 行表現"""
        line = (
            f"{self.timestamp:%Y-%m-%d %H:%M:%S} {self.level.name:<8} "
            f"{self.component}: {self.message}"
        )
        if self.error_code:
            line += f" [{self.error_code.name}]"
        if self.exception is not None:
            line += f"\n    {self.exception!r}"
        return line


class ConsoleFormatter(logging.Formatter):
    """端末向けの 1 行表示。エラーコードはコード番号と名前で添える"""

    PALETTE = {
        LogLevel.TRACE.value: "\033[90m",
        LogLevel.DEBUG.value: "\033[36m",
        LogLevel.INFO.value: "\033[32m",
        LogLevel.WARNING.value: "\033[33m",
        LogLevel.ERROR.value: "\033[31m",
        LogLevel.CRITICAL.value: "\033[35m",
    }
    RESET = "\033[0m"

    def format(self, record: logging.LogRecord) -> str:
        try:
            stamp = self.formatTime(record, self.datefmt)
            code = getattr(record, "error_code", None)
            tag = f" E{code.value}:{code.name}" if code else ""
            color = self.PALETTE.get(record.levelno, "")
            text = (
                f"{color}{stamp} {record.levelname:<8} {record.name}{tag} "
                f"| {record.getMessage()}{self.RESET if color else ''}"
            )
            if record.exc_info:
                text += "\n" + self.formatException(record.exc_info)
            return text
        except Exception:
            # 整形に失敗してもログ出力自体は止めない
            return f"{record.levelname} {record.name} | {record.msg}"


class JsonLinesFormatter(logging.Formatter):
    """統合ログ経由のレコードは LogRecord.to_json、それ以外は最小限の JSON"""

    def format(self, record: logging.LogRecord) -> str:
        structured = getattr(record, "structured", None)
        if isinstance(structured, LogRecord):
            return structured.to_json()
        return json.dumps(
            {
                "timestamp": datetime.fromtimestamp(record.created).isoformat(),
                "level": record.levelname,
                "component": record.name,
                "message": record.getMessage(),
            },
            ensure_ascii=False,
            default=str,
        )


class CurrentStderrHandler(logging.StreamHandler):
    """書き込みのたびにその時点の sys.stderr を使う（差し替えに追従）"""

    def __init__(self) -> None:
        super().__init__(sys.stderr)

    @property
    def stream(self):  # type: ignore[override]
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


def _export_json(records: Iterable[LogRecord], f: IO[str]) -> None:
    json.dump(
        [r.to_dict() for r in records], f, ensure_ascii=False, indent=2, default=str
    )


def _export_text(records: Iterable[LogRecord], f: IO[str]) -> None:
    for record in records:
        f.write(record.to_line() + "\n")


EXPORTERS: Dict[str, Callable[[Iterable[LogRecord], IO[str]], None]] = {
    "json": _export_json,
    "text": _export_text,
}


class DupinLabLogger:
    """dupinlab の統合ロガー

    ルートロガーに自前のハンドラーを付け替え、同時に LogRecord の履歴を
    保持してリスナーへ配る。自前のハンドラーには ``_dupinlab`` 印を付け、
    作り直すときはそれだけを外す。
    """

    def __init__(
        self,
        debug_mode: bool = False,
        log_dir: Optional[Path] = None,
        file_logging: bool = True,
    ) -> None:
        self.debug_mode = debug_mode
        self.file_logging = file_logging
        self.log_records: Deque[LogRecord] = deque(maxlen=MAX_RECORDS)
        self.log_handlers: Dict[str, logging.Handler] = {}
        self._listeners: list[Callable[[LogRecord], None]] = []

        self.log_dir = Path(log_dir or os.environ.get("DUPINLAB_LOG_DIR", "logs"))
        if self.file_logging:
            try:
                self.log_dir.mkdir(parents=True, exist_ok=True)
            except OSError:
                self.file_logging = False

        self._attach_handlers()

    def _attach_handlers(self) -> None:
        root = logging.getLogger()
        root.setLevel(LogLevel.TRACE.value if self.debug_mode else LogLevel.INFO.value)
        for handler in list(root.handlers):
            if getattr(handler, "_dupinlab", False):
                root.removeHandler(handler)
                handler.close()

        self._install(root, "console", self._console_handler())
        if self.file_logging:
            self._install(root, "file", self._file_handler())
            if self.debug_mode:
                self._install(root, "json", self._json_handler())

    def _console_handler(self) -> logging.Handler:
        handler = CurrentStderrHandler()
        handler.setFormatter(ConsoleFormatter(datefmt="%H:%M:%S"))
        return handler

    def _file_handler(self) -> logging.Handler:
        handler = logging.handlers.RotatingFileHandler(
            self.log_dir / f"dupinlab_{datetime.now():%Y%m%d}.log",
            maxBytes=5 * 1024 * 1024,
            backupCount=3,
            encoding="utf-8",
            delay=True,
        )
        handler.setFormatter(
            logging.Formatter(
                "%(asctime)s %(levelname)-8s %(name)s | %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            )
        )
        return handler

    def _json_handler(self) -> logging.Handler:
        handler = logging.FileHandler(
            self.log_dir / f"debug_{datetime.now():%Y%m%d_%H%M%S}.jsonl",
            encoding="utf-8",
            delay=True,
        )
        handler.setFormatter(JsonLinesFormatter())
        return handler

    def _install(
        self, root: logging.Logger, name: str, handler: logging.Handler
    ) -> None:
        handler._dupinlab = True  # type: ignore[attr-defined]
        root.addHandler(handler)
        self.log_handlers[name] = handler

    def add_listener(self, listener: Callable[[LogRecord], None]) -> None:
        self._listeners.append(listener)

    def log(
        self,
        level: LogLevel,
        component: str,
        message: str,
        error_code: Optional[ErrorCode] = None,
        exception: Optional[BaseException] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> None:
        """履歴へ追加し、リスナーへ配り、標準 logging へ流す"""
        record = LogRecord(
            timestamp=datetime.now(),
            level=level,
            component=component,
            message=message,
            error_code=error_code,
            exception=exception,
            context=context,
        )
        self.log_records.append(record)
        for listener in self._listeners:
            listener(record)

        # トレースバックはエラー以上のときだけ端末に出す
        exc_info = exception if level.value >= logging.ERROR else None
        logging.getLogger(component).log(
            level.value,
            message,
            exc_info=exc_info,
            extra={"error_code": error_code, "structured": record},
        )

    trace = partialmethod(log, LogLevel.TRACE)
    debug = partialmethod(log, LogLevel.DEBUG)
    info = partialmethod(log, LogLevel.INFO)
    warning = partialmethod(log, LogLevel.WARNING)
    error = partialmethod(log, LogLevel.ERROR)
    critical = partialmethod(log, LogLevel.CRITICAL)

    def get_recent_logs(self, count: int = 100) -> list[LogRecord]:
        return list(self.log_records)[-count:]

    def get_error_logs(self) -> list[LogRecord]:
        return [r for r in self.log_records if r.level.value >= LogLevel.ERROR.value]

    def export_logs(self, file_path: Path, format_type: str = "json") -> bool:
        """履歴を json または text で書き出す。失敗時は記録して False"""
        writer = EXPORTERS.get(format_type)
        if writer is None:
            self.error(
                "LogSystem",
                f"未対応のエクスポート形式: {format_type}",
                error_code=ErrorCode.FILE_IO_ERROR,
            )
            return False
        try:
            with open(file_path, "w", encoding="utf-8") as f:
                writer(list(self.log_records), f)
        except OSError as e:
            self.error(
                "LogSystem",
                f"ログを書き出せません: {file_path}",
                error_code=ErrorCode.FILE_IO_ERROR,
                exception=e,
            )
            return False
        return True

    def clear_logs(self) -> None:
        self.log_records.clear()
        self.debug("LogSystem", "ログをクリアしました")


_logger_instance: Optional[DupinLabLogger] = None


def get_logger(debug_mode: bool = False) -> DupinLabLogger:
    """プロセス共通の統合ロガー（初回呼び出しで作成）"""
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = DupinLabLogger(debug_mode=debug_mode)
    return _logger_instance


def setup_debug_logging() -> DupinLabLogger:
    """TRACE レベルと JSON Lines 出力を有効にした統合ロガーに差し替える"""
    global _logger_instance
    _logger_instance = DupinLabLogger(debug_mode=True)
    _logger_instance.debug("LogSystem", "デバッグログを有効にしました")
    return _logger_instance
