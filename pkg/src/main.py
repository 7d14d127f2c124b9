"""
dupinlab - コマンドラインエントリーポイント

サブコマンド invariants / verify / classify / example-list を受け付け、結果を JSON
レポートとして書き出します。終了コードは 0（合格）、1（チェック失敗）、
2（設定エラー）、3（幾何エラー）です。
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional, Sequence

import numpy as np

from src import __version__
from src.app import exprdsl
from src.app.checks import SuiteReport, drift, max_abs
from src.app.classifier import (
    Inconsistent,
    classify,
    cloud_from_spectrum,
    load_cloud,
    necessary_conditions,
)
from src.app.errors import (
    ConfigError,
    DupinLabError,
    GeometryError,
    VerificationError,
)
from src.app.families import FAMILIES, FamilyDescriptor, build_family, example_list
from src.app.immersion import DEFAULT_GRID_POINTS, DEFAULT_MARGIN, Immersion
from src.app.isotensor import (
    block_pair_residual,
    cartan_residual,
    codazzi_residual,
    extra_vanishing,
    gauss_relation_residual,
    isoparametric_check,
    schouten_spectrum_classify,
    schouten_tensor,
    sectional_from_gradients,
    sign_pattern,
    vanishing_pattern,
)
from src.app.laguerre import (
    is_laguerre_isoparametric,
    is_parallel_B,
    laguerre_invariants,
    laguerre_spectrum,
    verify_laguerre_integrability,
)
from src.app.minkowski import Signature, random_orthochronous
from src.app.moebius import (
    apply_moebius,
    cone_split_certificate,
    is_moebius_isoparametric,
    moebius_invariants,
    moebius_tensor_fields,
    structure_sample,
    verify_integrability,
)
from src.app.report import Report, summarize
from src.app.sweep import default_threads, map_points
from src.utils.diagnostic_manager import SystemDiagnosticManager
from src.utils.logger_config import ErrorCode, get_logger, setup_debug_logging

COMMANDS = ("invariants", "verify", "classify", "example-list")
MODES = {
    "invariants": ("moebius", "laguerre"),
    "verify": ("moebius", "laguerre", "isotensor", "invariance", "cone-split"),
    "classify": ("moebius",),
    "example-list": ("moebius",),
}

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3

# フラグ名 → 族パラメータ名
PARAM_FLAGS = {
    "n": "n",
    "k": "k",
    "p": "p",
    "q": "q",
    "theta": "theta",
    "m": "multiplicities",
    "kappa": "kappas",
    "axes": "semi_axes",
    "radius": "radius",
    "perturbation": "perturbation",
    "t_range": "t_range",
}


# ---------------------------------------------------------------------------
# 設定
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """1 回の実行の設定（生成時に検証）"""

    command: str
    family: Optional[str] = None
    dsl: Optional[str] = None
    params: dict[str, Any] = field(default_factory=dict)
    mode: str = "moebius"
    cloud: Optional[str] = None
    from_family: Optional[str] = None
    grid: int = DEFAULT_GRID_POINTS
    margin: float = DEFAULT_MARGIN
    tol: float = 1e-6
    eps_group: float = 1e-8
    eps_umb: float = 1e-10
    eps_rad: float = 1e-8
    seed: int = 0
    transforms: int = 1
    threads: int = 1
    orientation: Optional[int] = None
    out: Optional[str] = None
    debug: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.mode not in MODES[self.command]:
            raise ConfigError(
                f"{self.command} does not support mode {self.mode!r}; "
                f"choose from {', '.join(MODES[self.command])}"
            )
        for name in ("tol", "eps_group", "eps_umb", "eps_rad"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if int(self.grid) < 2:
            raise ConfigError(f"grid needs at least 2 points per axis, got {self.grid}")
        if not 0.0 <= self.margin < 0.5:
            raise ConfigError(f"margin must lie in [0, 0.5), got {self.margin}")
        if int(self.threads) < 1 or int(self.transforms) < 1:
            raise ConfigError("threads and transforms must be at least 1")
        if self.orientation not in (None, 1, -1):
            raise ConfigError(f"orientation must be 1 or -1, got {self.orientation}")
        if self.family and self.dsl:
            raise ConfigError("--family and --dsl are mutually exclusive")
        if self.dsl and self.params:
            raise ConfigError("family parameters cannot be combined with --dsl")
        self.grid = int(self.grid)
        self.threads = int(self.threads)
        self.transforms = int(self.transforms)

    def to_dict(self) -> dict[str, Any]:
        """レポートに載せる設定の写し（出力先とスレッド数は結果に影響しないので除く）"""
        echo = asdict(self)
        echo.pop("out")
        echo.pop("threads")
        echo.pop("debug")
        return echo


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dupinlab",
        description="メビウス・ラゲール不変量によるデュパン超曲面の数値検証",
    )
    parser.add_argument(
        "--version", action="version", version=f"dupinlab {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", help="JSON 設定ファイル（フラグが優先）")
        p.add_argument("--out", help="レポートの出力先（省略時は標準出力）")
        p.add_argument("--debug", action="store_true", default=None, help="デバッグログ")
        if command == "example-list":
            continue
        p.add_argument("--mode", choices=MODES[command], default=None)
        p.add_argument("--family", help=f"族のタグ: {', '.join(FAMILIES)}")
        p.add_argument("--dsl", help="DSL で書いたはめ込みのファイル")
        if command == "classify":
            p.add_argument("--cloud", help="(a, b) の組のファイル")
            p.add_argument("--from-family", dest="from_family", help="族から組を計算")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--q", type=int)
        p.add_argument("--theta", type=float)
        p.add_argument("--m", type=int, nargs="+", help="各主曲率の重複度")
        p.add_argument("--kappa", type=float, nargs="+", help="平坦ラゲール族の κ")
        p.add_argument("--axes", type=float, nargs="+", help="楕円体の半軸")
        p.add_argument("--radius", type=float)
        p.add_argument("--perturbation", type=float)
        p.add_argument("--t-range", dest="t_range", type=float, nargs=2)
        p.add_argument("--grid", type=int, help="1 軸あたりの格子点数")
        p.add_argument("--margin", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--eps-group", dest="eps_group", type=float)
        p.add_argument("--eps-umb", dest="eps_umb", type=float)
        p.add_argument("--eps-rad", dest="eps_rad", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--transforms", type=int, help="invariance モードの変換数")
        p.add_argument("--threads", type=int)
        p.add_argument("--orientation", type=int, choices=[1, -1])
    return parser


def _read_config_file(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        get_logger().error(
            "Config",
            f"設定ファイルを読めません: {path}",
            error_code=ErrorCode.FILE_IO_ERROR,
            exception=e,
        )
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").lower() in ("1", "true", "yes")


def _family_params(
    args: argparse.Namespace, file_params: dict[str, Any], tag: Optional[str]
) -> dict[str, Any]:
    params = dict(file_params)
    for flag, key in PARAM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            params[key] = value
    entry = FAMILIES.get(tag) if tag else None
    # サイクライドの双曲パラメータ区間は s_range
    if entry is not None and "t_range" in params and "s_range" in entry.defaults:
        params["s_range"] = params.pop("t_range")
    return params


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """フラグ > 設定ファイル > 環境変数 > 既定値"""
    from_file = _read_config_file(getattr(args, "config", None))
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(from_file) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    values: dict[str, Any] = {"command": args.command}
    for name in known - {"command", "params"}:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
        elif name in from_file:
            values[name] = from_file[name]

    if "threads" not in values and os.environ.get("DUPINLAB_THREADS"):
        values["threads"] = default_threads()
    if "debug" not in values:
        values["debug"] = _env_flag("DUPINLAB_DEBUG")

    tag = values.get("family") or values.get("from_family")
    values["params"] = _family_params(args, from_file.get("params", {}), tag)
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# はめ込みの選択
# ---------------------------------------------------------------------------


def resolve_immersion(
    config: RunConfig,
) -> tuple[Immersion, Optional[FamilyDescriptor]]:
    tag = config.family or config.from_family
    if tag:
        desc = build_family(tag, **config.params)
        imm = desc.immersion
    elif config.dsl:
        desc = None
        try:
            imm = exprdsl.load(config.dsl)
        except OSError as e:
            get_logger().error(
                "Config",
                f"DSL ファイルを読めません: {config.dsl}",
                error_code=ErrorCode.FILE_IO_ERROR,
                exception=e,
            )
            raise ConfigError(f"cannot read {config.dsl}: {e}") from e
    else:
        raise ConfigError("one of --family or --dsl is required")
    if config.orientation is not None:
        imm = imm.with_orientation(config.orientation)
    return imm, desc


def _grid(imm: Immersion, config: RunConfig) -> np.ndarray:
    grid = imm.grid(config.grid, config.margin)
    if len(grid) == 0:
        raise ConfigError(f"{imm.name}: every grid point lies in an excluded zone")
    return grid


def _plumbing(report: Report, finite: bool) -> None:
    suite = SuiteReport(suite="plumbing")
    suite.add("finite-invariants", "plumbing", 0.0 if finite else float("inf"), 1.0)
    report.add_suite(suite)


# ---------------------------------------------------------------------------
# サブコマンド
# ---------------------------------------------------------------------------


def run_invariants(config: RunConfig) -> Report:
    """格子上の不変量を集計する"""
    report = Report("invariants", config.to_dict())
    imm, desc = resolve_immersion(config)
    if desc is not None:
        report.summaries["family"] = desc.to_dict()
    grid = _grid(imm, config)

    if config.mode == "laguerre":
        with report.timed("laguerre-invariants"):
            data = map_points(
                lambda p: laguerre_invariants(
                    imm, p, config.eps_rad, config.eps_umb, config.eps_group
                ),
                grid,
                config.threads,
            )
        base = data[0]
        summary = {
            "grid_points": len(grid),
            "r": sorted({d.r for d in data}),
            "b_spectrum": base.b_representatives(),
            "b": summarize(d.b for d in data),
            "radii": summarize(d.radii for d in data),
            "L_eigenvalues": summarize(d.L_eigenvalues for d in data),
            "max_C": max(max_abs(d.C) for d in data),
            "metric_gap": max(d.metric_gap for d in data),
            "L_spectrum": laguerre_spectrum(base, config.tol).to_dict(),
        }
        finite = all(np.isfinite(d.b).all() and np.isfinite(d.L).all() for d in data)
    else:
        with report.timed("moebius-invariants"):
            data = map_points(
                lambda p: moebius_invariants(imm, p, config.eps_umb, config.eps_group),
                grid,
                config.threads,
            )
        base = data[0]
        order = np.argsort(base.b, kind="stable")
        summary = {
            "grid_points": len(grid),
            "r": sorted({d.r for d in data}),
            "b_spectrum": base.b_representatives(),
            "pairs": base.pairs[order],
            "b": summarize(d.b for d in data),
            "a": summarize(np.sort(d.a) for d in data),
            "rho": summarize([d.rho] for d in data),
            "lambdas": summarize(d.lambdas for d in data),
            "trace_A": summarize([np.trace(d.A)] for d in data),
            "max_C": max(max_abs(d.C) for d in data),
        }
        finite = all(np.isfinite(d.b).all() and np.isfinite(d.A).all() for d in data)

    report.summaries[config.mode] = summary
    _plumbing(report, finite)
    return report


def _verify_moebius(
    report: Report, imm: Immersion, grid: np.ndarray, config: RunConfig
) -> None:
    with report.timed("moebius-structure"):
        report.add_suite(
            verify_integrability(imm, grid, config.tol, threads=config.threads)
        )
    with report.timed("moebius-isoparametric"):
        verdict = is_moebius_isoparametric(
            imm, grid, config.tol, config.eps_umb, config.eps_group, config.threads
        )
    suite = SuiteReport(suite="moebius-isoparametric")
    suite.add("vanishing-C", "is1", verdict.max_C, config.tol)
    suite.add("constant-b", "is1", verdict.b_drift, config.tol)
    suite.summary.update(verdict.to_dict())
    report.add_suite(suite)


def _verify_laguerre(
    report: Report, imm: Immersion, grid: np.ndarray, config: RunConfig
) -> None:
    with report.timed("laguerre-structure"):
        report.add_suite(
            verify_laguerre_integrability(
                imm, grid, config.tol, eps_rad=config.eps_rad, threads=config.threads
            )
        )
    with report.timed("laguerre-isoparametric"):
        verdict = is_laguerre_isoparametric(
            imm, grid, config.tol, config.eps_rad, config.eps_group, config.threads
        )
    with report.timed("laguerre-parallel-B"):
        _, nabla_B = is_parallel_B(
            imm, grid, config.tol, config.eps_rad, threads=config.threads
        )
    suite = SuiteReport(suite="laguerre-isoparametric")
    suite.add("vanishing-C", "pro1", verdict.max_C, config.tol)
    suite.add("constant-b", "pro1", verdict.b_drift, config.tol)
    suite.add("parallel-B", "pro3", nabla_B, config.tol)
    suite.summary.update(verdict.to_dict())
    report.add_suite(suite)


def _verify_isotensor(
    report: Report, imm: Immersion, grid: np.ndarray, config: RunConfig
) -> None:
    """(B, A) を可換な等径テンソルの組として調べる"""
    tol = config.tol
    with report.timed("isotensor-samples"):
        samples = map_points(
            lambda p: structure_sample(imm, p, eps_umb=config.eps_umb),
            grid,
            config.threads,
        )
    paired = [moebius_tensor_fields(s, config.eps_group) for s in samples]
    b_fields = [pp.first for pp in paired]

    suite = SuiteReport(suite="isotensor")
    verdict = isoparametric_check(b_fields, tol)
    suite.add("B-codazzi", "codazzi", verdict.codazzi, tol)
    suite.add("B-constant-eigenvalues", "iso-t", verdict.eigenvalue_drift, tol)
    suite.add(
        "A-codazzi", "codazzi", max(codazzi_residual(pp.second) for pp in paired), tol
    )
    suite.add(
        "commuting-pair",
        "plumbing",
        max(pp.commutator for pp in paired),
        tol,
    )
    suite.add(
        "vanishing-pattern",
        "tensor1",
        max(vanishing_pattern(f) for f in b_fields),
        tol,
    )
    suite.add(
        "extra-vanishing",
        "extra-vanish",
        max(extra_vanishing(pp) for pp in paired),
        tol,
    )
    suite.add(
        "gauss-relation",
        "gauss1",
        max(gauss_relation_residual(s.R, s.B, s.A) for s in samples),
        tol,
    )

    sectional_gap = 0.0
    for f in b_fields:
        K = sectional_from_gradients(f)
        R = f.require_curvature()
        actual = np.einsum("ijij->ij", R)
        mask = ~np.isnan(K)
        if mask.any():
            sectional_gap = max(sectional_gap, max_abs(K[mask] - actual[mask]))
    suite.add("sectional-from-gradients", "tensor2", sectional_gap, tol)

    suite.add(
        "cartan-plain",
        "tensor4",
        max(max_abs(cartan_residual(f, "plain")) for f in b_fields),
        tol,
    )
    suite.add(
        "cartan-paired",
        "aa4",
        max(max_abs(cartan_residual(pp, "paired")) for pp in paired),
        tol,
    )
    patterns = [sign_pattern(f) for f in b_fields]
    sign_gap = max(max(0.0, -sp.adjacent_min, sp.extreme_max) for sp in patterns)
    suite.add("sign-pattern", "tensor3", sign_gap, tol)

    blocks = [block_pair_residual(pp) for pp in paired]
    excess = max(m for m, _ in blocks) - 2
    suite.add("block-pair-count", "ble2", float(max(0, excess)), 0.5)
    suite.add("block-pair-relation", "ble2", max(r for _, r in blocks), tol)

    summary: dict[str, Any] = {
        "grid_points": len(grid),
        "pairs": paired[0].pairs(),
        "r": sorted({len(f.groups) for f in b_fields}),
        "eigenvalue_drift": drift(f.eigenvalues for f in b_fields),
    }
    if samples[0].n >= 3:
        spectrum = np.linalg.eigvalsh(schouten_tensor(samples[0].ricci))
        verdict_s = schouten_spectrum_classify(spectrum, tol)
        summary["schouten_spectrum"] = verdict_s.to_dict()
    suite.summary.update(summary)
    report.add_suite(suite)


def _verify_invariance(
    report: Report, imm: Immersion, grid: np.ndarray, config: RunConfig
) -> None:
    dim = Signature.moebius(imm.dim_in).dim
    for seed in range(config.seed, config.seed + config.transforms):
        M = random_orthochronous(seed, dim)
        with report.timed(f"moebius-invariance-{seed}"):
            _, suite = apply_moebius(
                imm,
                M,
                grid,
                config.tol,
                eps_group=config.eps_group,
                threads=config.threads,
            )
        suite.suite = f"moebius-invariance-{seed}"
        report.add_suite(suite)


def _verify_cone_split(
    report: Report, imm: Immersion, grid: np.ndarray, config: RunConfig
) -> None:
    with report.timed("cone-split"):
        cert = cone_split_certificate(imm, grid, config.tol, threads=config.threads)
    report.add_suite(cert.report)
    report.summaries["cone-split"]["valid"] = cert.valid


VERIFIERS = {
    "moebius": _verify_moebius,
    "laguerre": _verify_laguerre,
    "isotensor": _verify_isotensor,
    "invariance": _verify_invariance,
    "cone-split": _verify_cone_split,
}


def run_verify(config: RunConfig) -> Report:
    """モードに応じた検証スイートを走らせる"""
    report = Report("verify", config.to_dict())
    imm, desc = resolve_immersion(config)
    if desc is not None:
        report.summaries["family"] = desc.to_dict()
    VERIFIERS[config.mode](report, imm, _grid(imm, config), config)
    return report


def run_classify(config: RunConfig) -> Report:
    """組の集合（ファイルまたは族の基点）を分類する"""
    report = Report("classify", config.to_dict())
    if config.cloud:
        cloud = load_cloud(config.cloud, config.eps_group)
    else:
        imm, desc = resolve_immersion(config)
        if desc is not None:
            report.summaries["family"] = desc.to_dict()
        grid = _grid(imm, config)
        with report.timed("moebius-invariants"):
            data = map_points(
                lambda p: moebius_invariants(imm, p, config.eps_umb, config.eps_group),
                grid,
                config.threads,
            )
        cloud = cloud_from_spectrum(data[0].pairs, config.eps_group)
        report.summaries["cloud_drift"] = max(
            drift(np.sort(d.b) for d in data), drift(np.sort(d.a) for d in data)
        )
    report.summaries["cloud"] = cloud.to_dict()

    with report.timed("classify"):
        outcome = classify(cloud, config.tol)
    report.outcome = outcome.to_dict()

    suite = SuiteReport(suite="classification")
    if isinstance(outcome, Inconsistent):
        suite.add("consistent-cloud", outcome.witness, 1.0, 0.5)
    else:
        certified = outcome.verify(cloud, config.tol)
        suite.add("certificate", "plumbing", 0.0 if certified else 1.0, 0.5)
    report.add_suite(suite)
    report.add_suite(necessary_conditions(cloud, config.tol))
    return report


def run_example_list(config: RunConfig) -> Report:
    report = Report("example-list", config.to_dict())
    report.summaries["families"] = example_list()
    return report


RUNNERS = {
    "invariants": run_invariants,
    "verify": run_verify,
    "classify": run_classify,
    "example-list": run_example_list,
}


# ---------------------------------------------------------------------------
# エントリーポイント
# ---------------------------------------------------------------------------


def _exit_code_for(error: DupinLabError) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, GeometryError):
        return EXIT_GEOMETRY
    if isinstance(error, VerificationError):
        # TolAmbiguous / PatternMismatch は検証の不成立として扱う
        return EXIT_CHECK_FAILED
    return EXIT_CHECK_FAILED


def _error_report(
    command: str, config: Optional[RunConfig], error: DupinLabError
) -> Report:
    report = Report(command, config.to_dict() if config else {})
    report.error = {
        "name": error.name,
        "code": error.error_code.value,
        "message": str(error),
    }
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    """メイン関数"""
    logger = logging.getLogger(__name__)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    config: Optional[RunConfig] = None
    out_path = getattr(args, "out", None)
    try:
        config = resolve_config(args)
        out_path = config.out

        # 統合ロガー初期化（できるだけ早く）
        app_logger = setup_debug_logging() if config.debug else get_logger()

        logging.getLogger("startup").info(
            "dupinlab 起動: command=%s, mode=%s, threads=%d, debug=%s, python=%s",
            config.command,
            config.mode,
            config.threads,
            config.debug,
            sys.version.split(" ")[0],
        )

        report = RUNNERS[config.command](config)
        report.environment = SystemDiagnosticManager().environment_section()
        report.write(out_path)
        if not report.passed:
            app_logger.warning(
                "CLI",
                f"失敗したチェック: {', '.join(report.failing_tags())}",
                error_code=ErrorCode.CHECK_FAILED,
            )
            return EXIT_CHECK_FAILED
        return EXIT_OK

    except DupinLabError as e:
        code = _exit_code_for(e)
        get_logger().error(
            "CLI",
            f"{e.name}: {e}",
            error_code=e.error_code,
            context={"exit_code": code},
        )
        print(f"{e.name}: {e}", file=sys.stderr)
        try:
            _error_report(args.command, config, e).write(out_path)
        except OSError:
            pass
        return code
    except KeyboardInterrupt:
        logger.info("Ctrl+C が押されました。終了します...")
        return EXIT_OK
    except Exception as e:
        get_logger().error(
            "CLI",
            f"予期しないエラーが発生しました: {e}",
            error_code=ErrorCode.SYSTEM_STARTUP_ERROR,
            exception=e,
        )
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
