"""
ラゲール幾何

主曲率半径 R_i = 1/λ_i から作るラゲール位置ベクトル Y ∈ ℝ₂ⁿ⁺⁴ と
不変量（ラゲール計量 g、第二基本形式 𝔹、ラゲールテンソル 𝕃、ラゲール形式 ℂ）を計算し、
構造方程式・等径判定・𝔹 の平行性を検証します。

座標成分（W = I⁻¹II、III = II I⁻¹ II、R = tr W⁻¹ / n）:
    ρ² = tr W⁻² − (tr W⁻¹)² / n
    g = ⟨dY, dY⟩ = ρ² III
    𝔹 = ρ (II − R III)
    ℂ_k = −ρ⁻¹ [∂_k R + (W⁻¹)^l_k ∂_l log ρ − R ∂_k log ρ]
𝕃 は g の曲率から R = −𝕃⊙g を解いて求めます。
"""

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from src.app import jets
from src.app.checks import SuiteReport, drift, max_abs
from src.app.errors import DimensionMismatch, UmbilicPoint, VanishingPrincipalCurvature
from src.app.immersion import Immersion
from src.app.isotensor import (
    SpectrumVerdict,
    TensorFieldSample,
    kulkarni_nomizu,
    laguerre_spectrum_classify,
    tensor_field_sample,
)
from src.app.jets import Jet
from src.app.minkowski import Signature, SignedVector, lorentz_inner
from src.app.sweep import map_points
from src.app.surface import (
    EPS_GROUP,
    RiemannData,
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

RADIUS_EPS = 1e-8
UMBILIC_EPS = 1e-10
FD_STEP = 1e-2
DEFAULT_TOL = 1e-6
METRIC_TOL = 1e-8

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LaguerreJets:
    rho: Jet
    g: Jet
    B: Jet
    C: Jet
    III: Jet
    Y: Jet


@dataclass(frozen=True)
class LaguerreData:
    point: np.ndarray
    radii: np.ndarray
    R: float
    rho: float
    Y: SignedVector
    N: SignedVector
    eta: SignedVector
    p: SignedVector
    g: np.ndarray
    frame: np.ndarray
    B: np.ndarray
    L: np.ndarray
    C: np.ndarray
    b: np.ndarray
    lambdas: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    metric_gap: float
    exponent_gap: float
    riemann: RiemannData = field(repr=False, compare=False)
    jets: LaguerreJets = field(repr=False, compare=False)

    @property
    def r(self) -> int:
        return len(self.groups)

    @property
    def L_eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh((self.L + self.L.T) / 2.0)

    def b_representatives(self) -> np.ndarray:
        return np.array([self.b[list(g)].mean() for g in self.groups])

    def frame_relations(self) -> dict[str, float]:
        """⟨η,𝔭⟩ = −1、⟨η,Y⟩ = ⟨𝔭,Y⟩ = ⟨η,η⟩ = ⟨η,N⟩ = 0、⟨Y,N⟩ = −1 の残差"""
        sig = self.Y.signature

        def ip(x: SignedVector, y: SignedVector) -> float:
            return float(lorentz_inner(x.components, y.components, sig))

        return {
            "eta_p": abs(ip(self.eta, self.p) + 1.0),
            "eta_Y": abs(ip(self.eta, self.Y)),
            "p_Y": abs(ip(self.p, self.Y)),
            "eta_eta": abs(ip(self.eta, self.eta)),
            "eta_N": abs(ip(self.eta, self.N)),
            "Y_N": abs(ip(self.Y, self.N) + 1.0),
            "Y_Y": abs(ip(self.Y, self.Y)),
            "N_N": abs(ip(self.N, self.N)),
        }


@dataclass(frozen=True)
class LaguerreSample:
    """構造方程式に入る枠成分（dX[i, j, k] = X_ij,k）"""

    point: np.ndarray
    B: np.ndarray
    L: np.ndarray
    C: np.ndarray
    dB: np.ndarray
    dL: np.ndarray
    dC: np.ndarray
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.B.shape[0]


@dataclass
class LaguerreVerdict:
    verdict: bool
    max_C: float
    b_drift: float
    L_drift: float
    ratio_drift: float
    r_values: list[int]
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_C": self.max_C,
            "b_drift": self.b_drift,
            "L_drift": self.L_drift,
            "ratio_drift": self.ratio_drift,
            "r_values": self.r_values,
            "tolerance": self.tolerance,
        }


# ---------------------------------------------------------------------------
# 向き
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _preferred_orientation(imm: Immersion) -> int:
    """基点で正の主曲率が多数になる向き（同数なら元の向き）"""
    sj = surface_jets(imm.with_orientation(1), imm.base_point, order=2)
    lambdas = principal_decomposition(point_frame(imm, imm.base_point, sj)).lambdas
    negative = int(np.sum(lambdas < 0))
    positive = int(np.sum(lambdas > 0))
    return -1 if negative > positive else 1


def laguerre_oriented(imm: Immersion) -> Immersion:
    """曲率半径ができるだけ正になるよう向きをそろえたはめ込み"""
    if imm.sphere:
        raise DimensionMismatch(
            f"{imm.name}: Laguerre geometry needs a hypersurface in ℝⁿ⁺¹"
        )
    return imm.with_orientation(_preferred_orientation(imm))


# ---------------------------------------------------------------------------
# 点ごとの計算
# ---------------------------------------------------------------------------


def laguerre_jets(
    imm: Immersion,
    point: Sequence[float],
    eps_rad: float = RADIUS_EPS,
    eps_umb: float = UMBILIC_EPS,
    check: bool = True,
) -> tuple[LaguerreJets, SurfaceJets]:
    n = imm.dim_in
    if n < 2:
        raise DimensionMismatch(f"Laguerre invariants need n >= 2, got {n}")
    sj = surface_jets(imm, point, order=4, check=check)
    lambdas = linalg.eigvalsh(sj.II.value, sj.I.value)
    if np.min(np.abs(lambdas)) <= eps_rad:
        get_logger().warning(
            "Laguerre",
            f"{imm.name}: 主曲率 {np.min(np.abs(lambdas)):.3e} が 0 に近すぎます",
            error_code=ErrorCode.VANISHING_PRINCIPAL_CURVATURE,
        )
        raise VanishingPrincipalCurvature(
            f"{imm.name}: min |λ| = {np.min(np.abs(lambdas)):.3e} at "
            f"{np.asarray(point).tolist()}"
        )

    W = jets.jet_einsum("ij,jk->ik", sj.I_inv, sj.II)
    W_inv = jets.jet_inv(W)
    sum_R = jets.trace(W_inv)
    sum_R2 = jets.trace(jets.jet_einsum("ij,jk->ik", W_inv, W_inv))
    R = sum_R * (1.0 / n)
    rho2 = sum_R2 - sum_R * sum_R * (1.0 / n)
    if float(rho2.value) <= eps_umb:
        get_logger().warning(
            "Laguerre",
            f"{imm.name}: 曲率半径がすべて等しい点です",
            error_code=ErrorCode.UMBILIC_POINT,
        )
        raise UmbilicPoint(f"{imm.name}: ρ² = {float(rho2.value):.3e}")
    rho = jets.sqrt(rho2)
    log_rho = jets.log(rho2) * 0.5

    III = jets.jet_einsum(
        "ij,jk->ik", sj.II, jets.jet_einsum("ij,jk->ik", sj.I_inv, sj.II)
    )
    g = rho2 * III
    B = rho * (sj.II - R * III)

    dR = R.derivatives()
    dl = log_rho.derivatives()
    shifted = jets.jet_einsum("lk,l->k", W_inv, dl) - R * dl
    C = (dR + shifted) * jets.reciprocal(rho) * -1.0

    x = sj.f
    xi = sj.normal
    s = jets.dot(x, xi)
    Y = rho * jets.stack([s, -s] + [xi[i] for i in range(imm.dim_out)] + [1.0])
    return LaguerreJets(rho=rho, g=g, B=B, C=C, III=III, Y=Y), sj


def recover_laguerre_tensor(R: np.ndarray) -> np.ndarray:
    """正規直交枠の曲率 R = −𝕃⊙g から 𝕃 を求める

    非対角は L_ik = −R_ijkj（j ∉ {i, k}）、対角は R_ijij = −(L_ii + L_jj) の最小二乗解。
    n = 2 では最小ノルム解 L_11 = L_22 = −R_1212/2、非対角 0。
    """
    n = R.shape[0]
    L = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    system = np.zeros((len(pairs), n))
    rhs = np.zeros(len(pairs))
    for row, (i, j) in enumerate(pairs):
        system[row, i] = system[row, j] = 1.0
        rhs[row] = -R[i, j, i, j]
    diagonal, *_ = linalg.lstsq(system, rhs)
    L[np.diag_indices(n)] = diagonal
    for i in range(n):
        for k in range(i + 1, n):
            others = [j for j in range(n) if j not in (i, k)]
            if others:
                L[i, k] = L[k, i] = -np.mean([R[i, j, k, j] for j in others])
    return L


def _null_normal(lj: LaguerreJets, signature: Signature) -> np.ndarray:
    """N = (1/n)ΔY + (1/(2n²))⟨ΔY, ΔY⟩Y"""
    n = lj.g.shape[0]
    dY = lj.Y.gradient()
    gamma = christoffel(lj.g).value
    second = lj.Y.hessian() - np.einsum("kij,ak->aij", gamma, dY)
    lap = np.einsum("ij,aij->a", linalg.inv(lj.g.value), second)
    lap2 = float(lorentz_inner(lap, lap, signature))
    return lap / n + lap2 / (2.0 * n * n) * lj.Y.value


def laguerre_invariants(
    imm: Immersion,
    point: Sequence[float],
    eps_rad: float = RADIUS_EPS,
    eps_umb: float = UMBILIC_EPS,
    eps_group: float = EPS_GROUP,
    check: bool = True,
    orient: bool = True,
) -> LaguerreData:
    """点 point でのラゲール不変量（𝔹 の主枠での成分）"""
    if orient:
        imm = laguerre_oriented(imm)
    point = np.asarray(point, dtype=float)
    lj, sj = laguerre_jets(imm, point, eps_rad, eps_umb, check)
    n = imm.dim_in
    signature = Signature.laguerre(n)

    g = lj.g.value
    g = (g + g.T) / 2.0
    B_coord = lj.B.value
    b, E, groups = sorted_eigh((B_coord + B_coord.T) / 2.0, g, eps=eps_group)
    riemann = riemann_of_metric(lj.g, point=point, frame=E)
    L = recover_laguerre_tensor(riemann.R)

    lambdas = principal_decomposition(point_frame(imm, point, sj), eps_group).lambdas
    radii = 1.0 / lambdas
    x = sj.f.value
    xi = sj.normal.value
    s = float(x @ xi)
    q = float(x @ x)
    R_mean = float(np.mean(radii))
    eta = np.concatenate(
        [[(1.0 + q) / 2.0, (1.0 - q) / 2.0], x, [0.0]]
    ) + R_mean * np.concatenate([[s, -s], xi, [1.0]])
    p = np.zeros(signature.dim)
    p[0], p[1] = 1.0, -1.0

    dY = lj.Y.gradient()
    g_from_Y = np.einsum("ai,a,aj->ij", dY, signature.diagonal, dY)
    scale = max(max_abs(g_from_Y), 1e-300)
    rho = float(lj.rho.value)
    B = E.T @ B_coord @ E
    return LaguerreData(
        point=point,
        radii=radii,
        R=R_mean,
        rho=rho,
        Y=SignedVector(lj.Y.value, signature),
        N=SignedVector(_null_normal(lj, signature), signature),
        eta=SignedVector(eta, signature),
        p=SignedVector(p, signature),
        g=g,
        frame=E,
        B=(B + B.T) / 2.0,
        L=L,
        C=E.T @ lj.C.value,
        b=b,
        lambdas=lambdas,
        groups=groups,
        metric_gap=max_abs(g_from_Y - g) / scale,
        exponent_gap=max_abs(g_from_Y - rho * lj.III.value) / scale,
        riemann=riemann,
        jets=lj,
    )


# ---------------------------------------------------------------------------
# 構造方程式
# ---------------------------------------------------------------------------


def _laguerre_tensor_coord(data: LaguerreData) -> np.ndarray:
    """枠成分の 𝕃 を座標成分へ（E⁻¹ = Eᵀg）"""
    back = data.g @ data.frame
    return back @ data.L @ back.T


def laguerre_sample(
    imm: Immersion,
    point: Sequence[float],
    fd_step: float = FD_STEP,
    eps_rad: float = RADIUS_EPS,
) -> LaguerreSample:
    """∇𝕃 は座標成分の差分、∇𝔹・∇ℂ はジェットから"""
    imm = laguerre_oriented(imm)
    point = np.asarray(point, dtype=float)
    data = laguerre_invariants(imm, point, eps_rad, orient=False)

    def tensor_at(p: np.ndarray) -> np.ndarray:
        return _laguerre_tensor_coord(
            laguerre_invariants(imm, p, eps_rad, check=False, orient=False)
        )

    dL_coord = jets.richardson_gradient(tensor_at, point, fd_step)
    L_jet = Jet.from_value_and_gradient(_laguerre_tensor_coord(data), dL_coord)
    return LaguerreSample(
        point=point,
        B=data.B,
        L=data.L,
        C=data.C,
        dB=covariant_derivative(data.jets.B, data.riemann),
        dL=covariant_derivative(L_jet, data.riemann),
        dC=covariant_derivative_form(data.jets.C, data.riemann),
        R=data.riemann.R,
    )


def laguerre_residuals(sample: LaguerreSample) -> dict[str, float]:
    B, L, C = sample.B, sample.L, sample.C
    dB, dL, dC = sample.dB, sample.dL, sample.dC
    n = sample.n
    delta = np.eye(n)
    BL = B @ L
    codazzi_B = (
        dB
        - dB.transpose(0, 2, 1)
        - (np.einsum("ik,j->ijk", delta, C) - np.einsum("ij,k->ijk", delta, C))
    )
    return {
        "tensor-codazzi": max_abs(dL - dL.transpose(0, 2, 1)),
        "form-curl": max_abs(dC - dC.T - (BL - BL.T)),
        "b-codazzi": max_abs(codazzi_B),
        "curvature-from-L": max_abs(sample.R + kulkarni_nomizu(L, delta)),
        "normalization": max(abs(float(np.sum(B * B)) - 1.0), abs(float(np.trace(B)))),
        "b-divergence": max_abs(np.einsum("iji->j", dB) - (n - 1) * C),
    }


def laguerre_tensor_fields(
    sample: LaguerreSample, eps_group: float = EPS_GROUP
) -> tuple[TensorFieldSample, TensorFieldSample]:
    """𝔹 と 𝕃 をそれぞれの固有枠の標本にする"""
    return (
        tensor_field_sample(sample.B, sample.dB, sample.R, sample.point, eps_group),
        tensor_field_sample(sample.L, sample.dL, sample.R, sample.point, eps_group),
    )


def laguerre_spectrum(data: LaguerreData, tol: float = DEFAULT_TOL) -> SpectrumVerdict:
    """𝕃 の固有値に対するスペクトル判定"""
    return laguerre_spectrum_classify(data.L_eigenvalues, tol)


# 残差名 → 構造方程式のタグ
LAGUERRE_TAGS = {
    "tensor-codazzi": "2.5",
    "form-curl": "2.6",
    "b-codazzi": "2.7",
    "curvature-from-L": "2.8",
    "normalization": "2.9",
    "b-divergence": "2.9",
}


def verify_laguerre_integrability(
    imm: Immersion,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    fd_step: float = FD_STEP,
    eps_rad: float = RADIUS_EPS,
    threads: int = 1,
) -> SuiteReport:
    imm = laguerre_oriented(imm)
    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)
    samples = map_points(
        lambda p: laguerre_sample(imm, p, fd_step, eps_rad), grid, threads
    )
    data = map_points(
        lambda p: laguerre_invariants(imm, p, eps_rad, orient=False), grid, threads
    )
    per_point = [laguerre_residuals(s) for s in samples]

    report = SuiteReport(suite="laguerre")
    for name, tag in LAGUERRE_TAGS.items():
        report.add(name, tag, max(r[name] for r in per_point), tol)
    report.add(
        "metric-consistency",
        "lac",
        max(d.metric_gap for d in data),
        METRIC_TOL,
    )
    report.summary.update(
        {
            "grid_points": len(grid),
            "orientation": imm.orientation,
            "b_drift": drift(d.b for d in data),
            "L_drift": drift(d.L_eigenvalues for d in data),
            "max_C": max(max_abs(d.C) for d in data),
            "nabla_B": max(max_abs(s.dB) for s in samples),
            "flatness": max(max_abs(s.R) for s in samples),
            "exponent_gap": max(d.exponent_gap for d in data),
            "r_values": sorted({d.r for d in data}),
            "L_spectrum": laguerre_spectrum(data[0], tol).to_dict(),
        }
    )
    if not report.passed:
        logger.info("%s: failing Laguerre checks %s", imm.name, report.failing_tags())
    return report


# ---------------------------------------------------------------------------
# 判定
# ---------------------------------------------------------------------------


def is_laguerre_isoparametric(
    imm: Immersion,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    eps_rad: float = RADIUS_EPS,
    eps_group: float = EPS_GROUP,
    threads: int = 1,
) -> LaguerreVerdict:
    """ℂ ≡ 0 かつラゲール主曲率が格子上で一定なら真"""
    imm = laguerre_oriented(imm)
    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)
    data = map_points(
        lambda p: laguerre_invariants(
            imm, p, eps_rad, eps_group=eps_group, orient=False
        ),
        grid,
        threads,
    )
    r_values = sorted({d.r for d in data})
    ratio_drift = float("inf") if len(r_values) > 1 else 0.0
    if len(r_values) == 1 and r_values[0] >= 3:
        tables = [curvature_ratio_table(d.b_representatives(), eps_group) for d in data]
        ratio_drift = max(
            float(np.nanmax(np.abs(t - tables[0]))) for t in tables
        )
    max_C = max(max_abs(d.C) for d in data)
    b_drift = drift(d.b for d in data)
    return LaguerreVerdict(
        verdict=max_C < tol and b_drift < tol,
        max_C=max_C,
        b_drift=b_drift,
        L_drift=drift(d.L_eigenvalues for d in data),
        ratio_drift=ratio_drift,
        r_values=r_values,
        tolerance=tol,
    )


def is_parallel_B(
    imm: Immersion,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    eps_rad: float = RADIUS_EPS,
    threads: int = 1,
) -> tuple[bool, float]:
    """‖∇𝔹‖∞ < tol なら真"""
    imm = laguerre_oriented(imm)
    grid = imm.grid() if grid is None else np.asarray(grid, dtype=float)

    def nabla_B(p: np.ndarray) -> float:
        data = laguerre_invariants(imm, p, eps_rad, orient=False)
        return max_abs(covariant_derivative(data.jets.B, data.riemann))

    norm = max(map_points(nabla_B, grid, threads))
    return norm < tol, norm


def with_perturbed_B(
    sample: LaguerreSample, entry: tuple[int, int], amount: float
) -> LaguerreSample:
    B = np.array(sample.B)
    B[entry] += amount
    return replace(sample, B=B)
