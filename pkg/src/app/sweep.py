"""
格子評価

点ごとの計算をワーカースレッドで並列に回し、結果は格子順で返します。
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from src.utils.logger_config import ErrorCode, get_logger

T = TypeVar("T")

logger = logging.getLogger(__name__)


def default_threads() -> int:
    """DUPINLAB_THREADS 環境変数（未設定なら 1）"""
    raw = os.environ.get("DUPINLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("DUPINLAB_THREADS=%r is not an integer; using 1", raw)
        return 1


def map_points(
    fn: Callable[[np.ndarray], T],
    points: Sequence[np.ndarray],
    threads: int = 1,
) -> list[T]:
    """fn を各点に適用（完了順ではなく格子順）"""
    points = list(points)
    if threads <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    logger.debug("sweeping %d points on %d threads", len(points), threads)
    try:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, points))
    except RuntimeError as e:
        get_logger().error(
            "Sweep",
            f"ワーカープールの起動に失敗しました: {e}",
            error_code=ErrorCode.SYSTEM_WORKER_ERROR,
        )
        return [fn(p) for p in points]
