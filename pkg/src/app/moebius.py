"""
メビウス幾何

超曲面の光錐への持ち上げ Y と共形ガウス写像 ξ、メビウス不変量
（メビウス計量 g、ブラシュケテンソル A、メビウス第二基本形式 B、メビウス形式 C）を
各点で計算し、構造方程式の残差・等径判定・メビウス変換による不変性・錐分解の証明書を
まとめます。

座標成分:
    g = ρ² I
    B = ρ (II − H I)
    C_k = −ρ⁻¹ [∂_k H + (II − H I)_km I^{ml} ∂_l log ρ]
    A = −[Hess_I log ρ − d log ρ ⊗ d log ρ − H II] − ½ (|∇ log ρ|²_I − c + H²) I
ここで c は外側の空間の曲率（ユークリッドで 0、単位球面で 1）。
枠成分は B の g-一般化固有ベクトル枠（g-正規直交）で取ります。
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from src.app import jets
from src.app.checks import SuiteReport, drift, max_abs, strict_upper
from src.app.errors import (
    DimensionMismatch,
    PatternMismatch,
    PointAtInfinity,
    SignatureMismatch,
    UmbilicPoint,
)
from src.app.immersion import Immersion
from src.app.isotensor import PairedTensorSample, kulkarni_nomizu, paired_sample
from src.app.jets import Jet
from src.app.minkowski import (
    LorentzTransform,
    Signature,
    SignedVector,
    lorentz_inner,
)
from src.app.sweep import map_points
from src.app.surface import (
    EPS_GROUP,
    SurfaceJets,
    christoffel,
    covariant_derivative,
    covariant_derivative_form,
    curvature_ratio_table,
    point_frame,
    principal_decomposition,
    riemann_of_metric,
    sorted_eigh,
    surface_jets,
)
from src.utils.logger_config import ErrorCode, get_logger

UMBILIC_EPS = 1e-10
INFINITY_EPS = 1e-6
FD_STEP = 1e-2
DEFAULT_TOL = 1e-6
NORM_TOL = 1e-8

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# データ型
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoebiusJets:
    """座標成分の不変量（g・B は 2 階、C は 1 階のジェット、A は値のみ）"""

    rho: Jet
    g: Jet
    B: Jet
    C: Jet
    A: np.ndarray
    Y: Jet


@dataclass(frozen=True)
class MoebiusData:
    point: np.ndarray
    rho: float
    Y: SignedVector
    xi: SignedVector
    N: SignedVector
    g: np.ndarray
    frame: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    b: np.ndarray
    lambdas: np.ndarray
    H: float
    groups: tuple[tuple[int, ...], ...]
    jets: MoebiusJets = field(repr=False, compare=False)

    @property
    def a(self) -> np.ndarray:
        """A の対角成分（b と対になる固有値）"""
        return np.diag(self.A).copy()

    @property
    def pairs(self) -> np.ndarray:
        """(a_i, b_i) の組を行に並べたもの"""
        return np.column_stack([self.a, self.b])

    @property
    def r(self) -> int:
        return len(self.groups)

    def b_representatives(self) -> np.ndarray:
        return np.array([self.b[list(g)].mean() for g in self.groups])

    def lambda_representatives(self) -> np.ndarray:
        return np.array([self.lambdas[list(g)].mean() for g in self.groups])


@dataclass(frozen=True)
class StructureSample:
    """構造方程式に入る枠成分（dX[i, j, k] = X_ij,k）"""

    point: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dA: np.ndarray
    dB: np.ndarray
    dC: np.ndarray
    R: np.ndarray
    ricci: np.ndarray
    kappa: float

    @property
    def n(self) -> int:
        return self.B.shape[0]


@dataclass
class IsoparametricVerdict:
    verdict: bool
    max_C: float
    b_drift: float
    a_drift: float
    ratio_drift: float
    r_values: list[int]
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_C": self.max_C,
            "b_drift": self.b_drift,
            "a_drift": self.a_drift,
            "ratio_drift": self.ratio_drift,
            "r_values": self.r_values,
            "tolerance": self.tolerance,
        }


@dataclass
class ConeSplitCertificate:
    lambda_: float
    mu: float
    K: float
    block: tuple[int, ...]
    frames: list[dict[str, np.ndarray]]
    report: SuiteReport

    @property
    def valid(self) -> bool:
        return self.K < 0 and self.report.passed


# ---------------------------------------------------------------------------
# 点ごとの計算
# ---------------------------------------------------------------------------


def _ambient_curvature(imm: Immersion) -> float:
    return 1.0 if imm.sphere else 0.0


def _lift(imm: Immersion, f: Jet) -> Jet:
    """f を光錐の断面 Ŷ に持ち上げる（ρ を掛ける前）"""
    if imm.sphere:
        return jets.stack([1.0] + [f[i] for i in range(imm.dim_out)])
    q = jets.dot(f, f)
    return jets.stack(
        [(1.0 + q) * 0.5, (1.0 - q) * 0.5] + [f[i] for i in range(imm.dim_out)]
    )


def _conformal_gauss(
    imm: Immersion, f: np.ndarray, normal: np.ndarray, H: float
) -> np.ndarray:
    if imm.sphere:
        return np.concatenate([[H], normal + H * f])
    s = float(f @ normal)
    q = float(f @ f)
    return np.concatenate(
        [[s + H * (1.0 + q) / 2.0, -s + H * (1.0 - q) / 2.0], normal + H * f]
    )


def moebius_jets(
    imm: Immersion,
    point: Sequence[float],
    eps_umb: float = UMBILIC_EPS,
    check: bool = True,
) -> tuple[MoebiusJets, SurfaceJets]:
    """座標成分の不変量ジェットと、その計算に使った基本量を返す"""
    n = imm.dim_in
    if n < 2:
        raise DimensionMismatch(f"Möbius invariants need n >= 2, got {n}")
    sj = surface_jets(imm, point, order=4, check=check)
    W = jets.jet_einsum("ij,jk->ik", sj.I_inv, sj.II)
    norm2 = jets.trace(jets.jet_einsum("ij,jk->ik", W, W))
    rho2 = (norm2 - sj.H * sj.H * n) * (n / (n - 1.0))
    if float(rho2.value) <= eps_umb:
        get_logger().warning(
            "Moebius",
            f"{imm.name}: 臍点のため ρ² = {float(rho2.value):.3e} ≤ {eps_umb:.1e}",
            error_code=ErrorCode.UMBILIC_POINT,
            context={"point": np.asarray(point, dtype=float).tolist()},
        )
        raise UmbilicPoint(
            f"{imm.name}: ρ² = {float(rho2.value):.3e} at {np.asarray(point).tolist()}"
        )
    rho = jets.sqrt(rho2)
    log_rho = jets.log(rho2) * 0.5

    I = sj.I.truncate(2)
    g = rho2 * I
    traceless = sj.II - sj.H * I
    B = rho * traceless

    dH = sj.H.derivatives()
    dl = log_rho.derivatives()
    shifted = jets.jet_einsum(
        "km,m->k", jets.jet_einsum("km,ml->kl", traceless, sj.I_inv), dl
    )
    C = (dH + shifted) * jets.reciprocal(rho) * -1.0

    # A は値のみ（Hess log ρ で 2 階を使い切る）
    gamma_I = christoffel(sj.I).value
    dl0 = dl.value
    hess = log_rho.hessian() - np.einsum("kij,k->ij", gamma_I, dl0)
    I0 = I.value
    I_inv0 = sj.I_inv.value
    H0 = float(sj.H.value)
    grad2 = float(dl0 @ I_inv0 @ dl0)
    A = -(hess - np.outer(dl0, dl0) - H0 * sj.II.value) - 0.5 * (
        grad2 - _ambient_curvature(imm) + H0**2
    ) * I0
    A = (A + A.T) / 2.0

    Y = rho * _lift(imm, sj.f.truncate(2))
    return MoebiusJets(rho=rho, g=g, B=B, C=C, A=A, Y=Y), sj


def _null_normal(mj: MoebiusJets, signature: Signature) -> np.ndarray:
    """N = −(1/n)ΔY − (1/(2n²))⟨ΔY, ΔY⟩Y（Δ は g のラプラシアン）"""
    n = mj.g.shape[0]
    Yv = mj.Y.value
    dY = mj.Y.gradient()
    d2Y = mj.Y.hessian()
    gamma = christoffel(mj.g).value
    g_inv = linalg.inv(mj.g.value)
    second = d2Y - np.einsum("kij,ak->aij", gamma, dY)
    lap = np.einsum("ij,aij->a", g_inv, second)
    lap2 = float(lorentz_inner(lap, lap, signature))
    return -lap / n - lap2 / (2.0 * n * n) * Yv


def _principal_frame(
    A: np.ndarray, B: np.ndarray, g: np.ndarray, eps_group: float
) -> tuple[np.ndarray, np.ndarray, tuple[tuple[int, ...], ...]]:
    """B の g-一般化固有枠。重複固有値の群内では A を対角化し直す"""
    b, E, groups = sorted_eigh(B, g, eps=eps_group)
    E = np.array(E)
    for group in groups:
        if len(group) < 2:
            continue
        idx = list(group)
        block = E[:, idx].T @ A @ E[:, idx]
        _, rot = linalg.eigh((block + block.T) / 2.0)
        E[:, idx] = E[:, idx] @ rot
    return b, E, groups


def moebius_invariants(
    imm: Immersion,
    point: Sequence[float],
    eps_umb: float = UMBILIC_EPS,
    eps_group: float = EPS_GROUP,
    check: bool = True,
) -> MoebiusData:
    """点 point でのメビウス不変量（枠成分）"""
    point = np.asarray(point, dtype=float)
    mj, sj = moebius_jets(imm, point, eps_umb, check)
    signature = Signature.moebius(imm.dim_in)

    g = mj.g.value
    g = (g + g.T) / 2.0
    B_coord = mj.B.value
    b, E, groups = _principal_frame(mj.A, (B_coord + B_coord.T) / 2.0, g, eps_group)
    A = E.T @ mj.A @ E
    B = E.T @ B_coord @ E
    C = E.T @ mj.C.value

    pf = point_frame(imm, point, sj)
    lambdas = principal_decomposition(pf, eps_group).lambdas
    rho = float(mj.rho.value)
    H = float(sj.H.value)
    Y = mj.Y.value
    xi = _conformal_gauss(imm, sj.f.value, sj.normal.value, H)
    N = _null_normal(mj, signature)
    return MoebiusData(
        point=point,
        rho=rho,
        Y=SignedVector(Y, signature),
        xi=SignedVector(xi, signature),
        N=SignedVector(N, signature),
        g=g,
        frame=E,
        A=(A + A.T) / 2.0,
        B=(B + B.T) / 2.0,
        C=C,
        b=b,
        lambdas=lambdas,
        H=H,
        groups=groups,
        jets=mj,
    )


def moebius_position(
    imm: Immersion, point: Sequence[float], eps_umb: float = UMBILIC_EPS
) -> tuple[float, SignedVector, SignedVector]:
    """(ρ, Y, ξ)"""
    data = moebius_invariants(imm, point, eps_umb)
    return data.rho, data.Y, data.xi


# ---------------------------------------------------------------------------
# 構造方程式
# ---------------------------------------------------------------------------


def structure_sample(
    imm: Immersion,
    point: Sequence[float],
    fd_step: float = FD_STEP,
    eps_umb: float = UMBILIC_EPS,
) -> StructureSample:
    """構造方程式の評価に必要な量を 1 点で集める

    ∇A は A の座標成分をリチャードソン差分で微分してから共変微分に通す。
    """
    point = np.asarray(point, dtype=float)
    data = moebius_invariants(imm, point, eps_umb)
    mj = data.jets
    riemann = riemann_of_metric(mj.g, point=point, frame=data.frame)

    def blaschke(p: np.ndarray) -> np.ndarray:
        return moebius_jets(imm, p, eps_umb, check=False)[0].A

    dA_coord = jets.richardson_gradient(blaschke, point, fd_step)
    A_jet = Jet.from_value_and_gradient(mj.A, dA_coord)
    return StructureSample(
        point=point,
        A=data.A,
        B=data.B,
        C=data.C,
        dA=covariant_derivative(A_jet, riemann),
        dB=covariant_derivative(mj.B, riemann),
        dC=covariant_derivative_form(mj.C, riemann),
        R=riemann.R,
        ricci=riemann.ricci,
        kappa=riemann.kappa,
    )


def equation_residuals(sample: StructureSample) -> dict[str, float]:
    """構造方程式ごとの最大絶対残差"""
    A, B, C = sample.A, sample.B, sample.C
    dA, dB, dC = sample.dA, sample.dB, sample.dC
    n = sample.n
    delta = np.eye(n)

    # A_ij,k − A_ik,j = B_ik C_j − B_ij C_k
    blaschke = (
        dA
        - dA.transpose(0, 2, 1)
        - (np.einsum("ik,j->ijk", B, C) - np.einsum("ij,k->ijk", B, C))
    )
    # C_i,j − C_j,i = Σ_k (B_ik A_kj − B_jk A_ki)
    curl = dC - dC.T - (B @ A - (B @ A).T)
    # B_ij,k − B_ik,j = δ_ij C_k − δ_ik C_j
    codazzi = (
        dB
        - dB.transpose(0, 2, 1)
        - (np.einsum("ij,k->ijk", delta, C) - np.einsum("ik,j->ijk", delta, C))
    )
    gauss = sample.R - (0.5 * kulkarni_nomizu(B, B) + kulkarni_nomizu(A, delta))
    ricci = sample.ricci - (-B @ B + np.trace(A) * delta + (n - 2) * A)
    trace = max(
        abs(np.trace(B)),
        abs(np.sum(B * B) - (n - 1.0) / n),
        abs(np.trace(A) - (1.0 + n * n * sample.kappa) / (2.0 * n)),
    )
    # Σ_i B_ij,i = −(n−1) C_j
    divergence = np.einsum("iji->j", dB) + (n - 1) * C
    return {
        "blaschke-codazzi": max_abs(blaschke),
        "form-curl": max_abs(curl),
        "b-codazzi": max_abs(codazzi),
        "gauss": max_abs(gauss),
        "ricci": max_abs(ricci),
        "trace-identities": float(trace),
        "b-divergence": max_abs(divergence),
    }


def moebius_tensor_fields(
    sample: StructureSample, eps_group: float = EPS_GROUP
) -> PairedTensorSample:
    """(B, A) を同時固有枠の標本にする（曲率は g から）"""
    return paired_sample(
        sample.B,
        sample.dB,
        sample.A,
        sample.dA,
        R=sample.R,
        point=sample.point,
        eps_group=eps_group,
    )


# 残差名 → 構造方程式のタグ
STRUCTURE_TAGS = {
    "blaschke-codazzi": "equa1",
    "form-curl": "equa2",
    "b-codazzi": "equa3",
    "gauss": "equa4",
    "ricci": "equa5",
    "trace-identities": "equa6",
    "b-divergence": "equa3",
}


def verify_integrability(
    imm: Immersion,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    fd_step: float = FD_STEP,
    eps_umb: float = UMBILIC_EPS,
    threads: int = 1,
) -> SuiteReport:
    """格子上で構造方程式の残差を集計する"""
    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)
    samples = map_points(
        lambda p: structure_sample(imm, p, fd_step, eps_umb), grid, threads
    )
    per_point = [equation_residuals(s) for s in samples]

    report = SuiteReport(suite="moebius")
    for name, tag in STRUCTURE_TAGS.items():
        report.add(name, tag, max(r[name] for r in per_point), tol)
    report.summary.update(
        {
            "grid_points": len(grid),
            "fd_step": fd_step,
            "kappa_range": [
                min(s.kappa for s in samples),
                max(s.kappa for s in samples),
            ],
            "trace_A_range": [
                min(float(np.trace(s.A)) for s in samples),
                max(float(np.trace(s.A)) for s in samples),
            ],
        }
    )
    if not report.passed:
        logger.info("%s: failing structure checks %s", imm.name, report.failing_tags())
    return report


# ---------------------------------------------------------------------------
# 判定
# ---------------------------------------------------------------------------


def _ratio_table(values: np.ndarray, eps: float) -> Optional[np.ndarray]:
    if len(values) < 3:
        return None
    return curvature_ratio_table(values, eps)


def _table_gap(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> float:
    if a is None or b is None:
        return 0.0
    if a.shape != b.shape:
        return float("inf")
    both = np.isnan(a) & np.isnan(b)
    diff = np.where(both, 0.0, np.abs(a - b))
    return float(np.max(diff)) if diff.size else 0.0


def is_moebius_isoparametric(
    imm: Immersion,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    eps_umb: float = UMBILIC_EPS,
    eps_group: float = EPS_GROUP,
    threads: int = 1,
) -> IsoparametricVerdict:
    """C ≡ 0 かつ b_i が格子上で一定なら真"""
    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)
    data = map_points(
        lambda p: moebius_invariants(imm, p, eps_umb, eps_group), grid, threads
    )
    max_C = max(max_abs(d.C) for d in data)
    b_drift = drift(d.b for d in data)
    a_drift = drift(np.sort(d.a) for d in data)
    r_values = sorted({d.r for d in data})
    tables = [_ratio_table(d.b_representatives(), eps_group) for d in data]
    ratio_drift = 0.0
    if len(r_values) == 1:
        ratio_drift = max((_table_gap(t, tables[0]) for t in tables), default=0.0)
    else:
        ratio_drift = float("inf")
    verdict = max_C < tol and b_drift < tol
    return IsoparametricVerdict(
        verdict=verdict,
        max_C=max_C,
        b_drift=b_drift,
        a_drift=a_drift,
        ratio_drift=ratio_drift,
        r_values=r_values,
        tolerance=tol,
    )


def check_linear_dependence(
    A: np.ndarray,
    B: np.ndarray,
    g: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
) -> Optional[tuple[float, float]]:
    """最小二乗 A ≈ λB + μg。残差の最大ノルムが tol 未満なら (λ, μ)"""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    g = np.eye(A.shape[0]) if g is None else np.asarray(g, dtype=float)
    if A.shape != B.shape or A.shape != g.shape:
        raise DimensionMismatch(f"shapes {A.shape}, {B.shape}, {g.shape}")
    design = np.column_stack([B.ravel(), g.ravel()])
    coef, *_ = linalg.lstsq(design, A.ravel())
    residual = max_abs(A.ravel() - design @ coef)
    if residual >= tol:
        return None
    return float(coef[0]), float(coef[1])


# ---------------------------------------------------------------------------
# メビウス変換
# ---------------------------------------------------------------------------


def transform_immersion(
    imm: Immersion, M: LorentzTransform, eps_inf: float = INFINITY_EPS
) -> Immersion:
    """光錐上で M を作用させ、射影して戻したはめ込み（向きは未調整）"""
    signature = Signature.moebius(imm.dim_in)
    if M.signature != signature:
        raise SignatureMismatch(f"{M.signature} does not act on {signature}")
    matrix = M.matrix
    sphere = imm.sphere

    def outer(f: Jet) -> list[Jet]:
        Z = jets.jet_einsum("ab,b->a", matrix, _lift(imm, f))
        w = Z[0] if sphere else Z[0] + Z[1]
        if abs(float(w.value)) <= eps_inf:
            raise PointAtInfinity(f"Y₀+Y₁ = {float(w.value):.3e} after transform")
        start = 1 if sphere else 2
        inv = jets.reciprocal(w)
        return [Z[k] * inv for k in range(start, signature.dim)]

    return imm.compose(outer, name=f"M·{imm.name}", dim_out=imm.dim_out, sphere=sphere)


def apply_moebius(
    imm: Immersion,
    M: LorentzTransform,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    eps_inf: float = INFINITY_EPS,
    eps_group: float = EPS_GROUP,
    threads: int = 1,
) -> tuple[Immersion, SuiteReport]:
    """M で変換したはめ込みと、不変量のずれの報告

    変換後の向きは基点で ξ̃ = Mξ となるように選ぶ。
    """
    transformed = transform_immersion(imm, M, eps_inf)
    base = imm.base_point
    xi = moebius_invariants(imm, base, eps_group=eps_group).xi.components
    xi_t = moebius_invariants(transformed, base, eps_group=eps_group).xi.components
    signature = Signature.moebius(imm.dim_in)
    if float(lorentz_inner(xi_t, M.matrix @ xi, signature)) < 0:
        transformed = transformed.flipped()

    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)

    def compare(p: np.ndarray) -> dict[str, float]:
        d = moebius_invariants(imm, p, eps_group=eps_group)
        t = moebius_invariants(transformed, p, eps_group=eps_group)
        MY = M.matrix @ d.Y.components
        Mxi = M.matrix @ d.xi.components
        return {
            "g": max_abs(t.g - d.g),
            "b": max_abs(t.b - d.b),
            "ratios": _table_gap(
                _ratio_table(t.b_representatives(), eps_group),
                _ratio_table(d.b_representatives(), eps_group),
            ),
            "Y": max_abs(t.Y.components - MY) / max(1.0, max_abs(MY)),
            "xi": max_abs(t.xi.components - Mxi) / max(1.0, max_abs(Mxi)),
            "lambda": max_abs(t.lambdas - d.lambdas),
        }

    rows = map_points(compare, grid, threads)
    report = SuiteReport(suite="moebius-invariance")
    for name, key in (
        ("metric-drift", "g"),
        ("b-drift", "b"),
        ("curvature-ratio-drift", "ratios"),
        ("position-covariance", "Y"),
        ("gauss-map-covariance", "xi"),
    ):
        report.add(name, "co-var", max(r[key] for r in rows), tol)
    report.summary.update(
        {
            "grid_points": len(grid),
            "lambda_drift": max(r["lambda"] for r in rows),
            "transform_defect": M.defect(),
            "orientation": transformed.orientation,
        }
    )
    return transformed, report


# ---------------------------------------------------------------------------
# 錐分解の証明書
# ---------------------------------------------------------------------------


def _cluster(pairs: np.ndarray, tol: float) -> list[list[int]]:
    clusters: list[list[int]] = []
    for i, pair in enumerate(pairs):
        for cluster in clusters:
            if np.max(np.abs(pairs[cluster[0]] - pair)) < tol:
                cluster.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def split_parameters(
    pairs: np.ndarray, tol: float = DEFAULT_TOL
) -> tuple[float, float, tuple[int, ...]]:
    """(a, b) の組から分解ブロック (λ, μ) = (b, a) を探す

    ブロック外の組が a = −λb − μ を満たし K = λ² + 2μ < 0 となる候補のうち、
    重複度の大きいものを選ぶ。
    """
    pairs = np.asarray(pairs, dtype=float)
    clusters = sorted(_cluster(pairs, tol), key=lambda c: (-len(c), pairs[c[0], 1]))
    for cluster in clusters:
        mu, lam = pairs[cluster[0]]
        K = lam * lam + 2.0 * mu
        others = [i for i in range(len(pairs)) if i not in cluster]
        if not others or K >= -tol:
            continue
        residual = max(abs(pairs[i, 0] + lam * pairs[i, 1] + mu) for i in others)
        if residual < tol:
            return float(lam), float(mu), tuple(cluster)
    raise PatternMismatch(
        f"no (λ, μ) block with K < 0 among pairs {np.round(pairs, 8).tolist()}"
    )


def _split_frame(
    data: MoebiusData, lam: float, mu: float, perturbation: float
) -> dict[str, np.ndarray]:
    K = lam * lam + 2.0 * mu
    scale = np.sqrt(-K)
    Y = data.Y.components
    xi = data.xi.components
    N = data.N.components + perturbation * xi
    return {
        "F": lam * Y + xi,
        "P": (-(lam * lam + mu) * Y + N - lam * xi) / scale,
        "T": -(mu * Y + N - lam * xi) / scale,
    }


def cone_split_certificate(
    imm: Immersion,
    samples: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    norm_tol: float = NORM_TOL,
    fd_step: float = FD_STEP,
    perturbation: float = 0.0,
    threads: int = 1,
) -> ConeSplitCertificate:
    """(λ, μ) ブロックを取り出し、枠 F・P・T の正規化と平行性を確かめる

    Args:
        imm: メビウス等径な錐型の超曲面
        samples: 評価点（省略時は既定格子）
        tol: ブロック判定と平行性の許容値
        norm_tol: ⟨F,F⟩, ⟨P,P⟩, ⟨T,T⟩ と直交性の許容値
        fd_step: P・T の方向微分に使う差分の刻み
        perturbation: N に加える ξ の倍率（検出力の確認用）

    Returns:
        ConeSplitCertificate
    """
    samples = imm.grid() if samples is None else np.asarray(samples, dtype=float)
    data = map_points(lambda p: moebius_invariants(imm, p), samples, threads)
    lam, mu, block = split_parameters(data[0].pairs, tol)
    K = lam * lam + 2.0 * mu
    signature = Signature.moebius(imm.dim_in)
    others = [i for i in range(imm.dim_in) if i not in block]

    def frame_at(p: np.ndarray) -> np.ndarray:
        d = moebius_invariants(imm, p, check=False)
        fr = _split_frame(d, lam, mu, perturbation)
        return np.concatenate([fr["P"], fr["T"]])

    def ip(x: np.ndarray, y: np.ndarray) -> float:
        return float(lorentz_inner(x, y, signature))

    def certify(d: MoebiusData) -> dict[str, float]:
        fr = _split_frame(d, lam, mu, perturbation)
        F, P, T = fr["F"], fr["P"], fr["T"]
        dPT = jets.richardson_gradient(frame_at, d.point, fd_step)
        dP, dT = dPT[: signature.dim], dPT[signature.dim :]
        E = d.frame
        a, b = d.a, d.b
        return {
            "F": abs(ip(F, F) - 1.0),
            "P": abs(ip(P, P) - 1.0),
            "T": abs(ip(T, T) + 1.0),
            "orth": max(abs(ip(F, P)), abs(ip(F, T)), abs(ip(P, T))),
            "block": max(max(abs(a[i] - mu), abs(b[i] - lam)) for i in block),
            "relation": max((abs(a[i] + lam * b[i] + mu) for i in others), default=0.0),
            "dP": max_abs(dP @ E[:, list(block)]),
            "dT": max_abs(dT @ E[:, others]) if others else 0.0,
        }

    rows = map_points(certify, data, threads)
    report = SuiteReport(suite="cone-split")
    report.add("K-negative", "frame", strict_upper(K, 0.0, tol), tol)
    for name, tag, key, limit in (
        ("F-unit", "frame", "F", norm_tol),
        ("P-unit", "frame", "P", norm_tol),
        ("T-timelike-unit", "frame", "T", norm_tol),
        ("frame-orthogonal", "frame", "orth", norm_tol),
        ("block-constant", "cone-form", "block", tol),
        ("pair-relation", "cone-inv", "relation", tol),
        ("P-parallel-on-block", "stru1", "dP", tol),
        ("T-parallel-off-block", "stru1", "dT", tol),
    ):
        report.add(name, tag, max(r[key] for r in rows), limit)
    report.summary.update(
        {"lambda": lam, "mu": mu, "K": K, "block": list(block), "samples": len(samples)}
    )
    frames = [_split_frame(d, lam, mu, perturbation) for d in data]
    return ConeSplitCertificate(
        lambda_=lam, mu=mu, K=K, block=block, frames=frames, report=report
    )


def with_perturbed_B(
    sample: StructureSample, entry: tuple[int, int], amount: float
) -> StructureSample:
    """B の 1 成分をずらした標本（構造方程式の検出力確認用）"""
    B = np.array(sample.B)
    B[entry] += amount
    return replace(sample, B=B)
