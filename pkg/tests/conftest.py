"""
共有フィクスチャ
"""

import math
import os
import tempfile

import numpy as np
import pytest

# 統合ロガーはモジュール読み込み時ではなく最初の get_logger() で作られる
os.environ.setdefault("DUPINLAB_LOG_DIR", tempfile.mkdtemp(prefix="dupinlab-logs-"))

from src.app.families import build_family  # noqa: E402

SQRT3 = math.sqrt(3.0)


@pytest.fixture(scope="session")
def cone():
    """クリフォードトーラス上の錐（n=3）"""
    return build_family("cone-clifford", n=3)


@pytest.fixture(scope="session")
def stereographic():
    """S¹×S² クリフォードトーラスの立体射影像"""
    return build_family("stereographic-clifford")


@pytest.fixture(scope="session")
def flat_laguerre():
    return build_family("flat-laguerre")


@pytest.fixture(scope="session")
def ellipsoid():
    return build_family("ellipsoid")


@pytest.fixture
def small_grid():
    """1 軸 2 点の格子"""

    def make(imm, margin=0.1):
        return imm.grid(points=2, margin=margin)

    return make


@pytest.fixture
def quiet_diagnostics(mocker):
    """CLI テストでは psutil による環境診断を固定値に置き換える"""
    return mocker.patch(
        "src.main.SystemDiagnosticManager.environment_section",
        return_value={"health_score": 100.0, "status_counts": {}, "results": []},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
