"""
開発用スクリプト

使用方法: python run_dev.py [install|test|test-all|lint|run ...]

run の後ろの引数はそのまま dupinlab CLI に渡します
（例: python run_dev.py run verify --family cone-clifford --mode moebius）。
"""

import os
import subprocess
import sys
from pathlib import Path
from typing import Callable

POETRY = ["poetry", "run"]


def poetry_available() -> bool:
    try:
        version = subprocess.run(
            ["poetry", "--version"], capture_output=True, text=True, check=True
        ).stdout.strip()
    except (subprocess.CalledProcessError, FileNotFoundError):
        print("Poetry が見つかりません: https://python-poetry.org/docs/", file=sys.stderr)
        return False
    print(version)
    return True


def _run(*cmd: str) -> int:
    try:
        return subprocess.run(list(cmd)).returncode
    except KeyboardInterrupt:
        print("\n中断しました", file=sys.stderr)
        return 130


def install(_: list[str]) -> int:
    return _run("poetry", "install")


def test(_: list[str]) -> int:
    """4x4x4 格子の受け入れテスト（slow）を除いて実行"""
    return install([]) or _run(*POETRY, "pytest", "tests/", "-m", "not slow")


def test_all(_: list[str]) -> int:
    return install([]) or _run(*POETRY, "pytest", "tests/", "-v")


def lint(_: list[str]) -> int:
    ruff = _run(*POETRY, "ruff", "check", "src", "tests")
    black = _run(*POETRY, "black", "--check", "src", "tests")
    return ruff or black


def run(args: list[str]) -> int:
    return install([]) or _run(*POETRY, "dupinlab", *(args or ["example-list"]))


COMMANDS: dict[str, Callable[[list[str]], int]] = {
    "install": install,
    "test": test,
    "test-all": test_all,
    "lint": lint,
    "run": run,
}


def main() -> None:
    if not poetry_available():
        sys.exit(1)
    os.chdir(Path(__file__).parent)

    name = sys.argv[1].lower() if len(sys.argv) > 1 else "test"
    command = COMMANDS.get(name)
    if command is None:
        print(f"不明なコマンド: {name}", file=sys.stderr)
        print(__doc__.strip().splitlines()[2], file=sys.stderr)
        sys.exit(2)
    sys.exit(command(sys.argv[2:]))


if __name__ == "__main__":
    main()
