import numpy as np

from src.app import sweep


def test_default_threads(monkeypatch):
    monkeypatch.delenv("DUPINLAB_THREADS", raising=False)
    assert sweep.default_threads() == 1
    monkeypatch.setenv("DUPINLAB_THREADS", "4")
    assert sweep.default_threads() == 4
    monkeypatch.setenv("DUPINLAB_THREADS", "0")
    assert sweep.default_threads() == 1
    monkeypatch.setenv("DUPINLAB_THREADS", "many")
    assert sweep.default_threads() == 1


def test_results_keep_grid_order():
    points = [np.array([float(i), 0.0]) for i in range(12)]

    def fn(p):
        return float(p[0]) ** 2

    assert sweep.map_points(fn, points, threads=4) == [float(i) ** 2 for i in range(12)]
    assert sweep.map_points(fn, points, threads=1) == [float(i) ** 2 for i in range(12)]
    assert sweep.map_points(fn, [], threads=4) == []


def test_worker_failure_falls_back_to_serial(mocker):
    mocker.patch(
        "src.app.sweep.ThreadPoolExecutor", side_effect=RuntimeError("no threads")
    )
    points = [np.array([1.0]), np.array([2.0])]
    assert sweep.map_points(lambda p: float(p[0]), points, threads=2) == [1.0, 2.0]
