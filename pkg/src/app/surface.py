"""
点ごとの曲面幾何

第一・第二基本形式、主曲率分解、メビウス／ラゲール曲率比、
および任意の計量に対するリーマン幾何エンジン（クリストッフェル記号・曲率・共変微分）。

曲率の符号規約: R_ijkl = ⟨R(e_i, e_j)e_l, e_k⟩。単位球面 S² で R_1212 = +1。
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from src.app import jets
from src.app.errors import (
    DegenerateDenominator,
    DimensionMismatch,
    FrameMismatch,
    GroupingAmbiguous,
    MetricNotPositive,
    OrderUnavailable,
    RankDeficient,
)
from src.app.immersion import Immersion
from src.app.jets import Jet

EPS_GROUP = 1e-8
RANK_TOL = 1e-10
SIGN_TOL = 1e-12
ORIENTATION_STEPS = 16
FRAME_TOL = 1e-8

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# データ型
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceJets:
    """基本量のジェット（f は 4 階、I・N は 3 階、II・H は 2 階）"""

    f: Jet
    J: Jet
    I: Jet
    I_inv: Jet
    normal: Jet
    II: Jet
    H: Jet


@dataclass(frozen=True)
class PointFrame:
    point: np.ndarray
    I: np.ndarray
    II_coord: np.ndarray
    II: np.ndarray
    normal: np.ndarray
    H: float
    frame: np.ndarray
    ambient_frame: np.ndarray
    orientation: int

    def frame_residual(self) -> float:
        gram = self.ambient_frame.T @ self.ambient_frame
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


@dataclass(frozen=True)
class PrincipalData:
    lambdas: np.ndarray
    directions: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    r: int

    def group_of(self, index: int) -> int:
        for k, group in enumerate(self.groups):
            if index in group:
                return k
        raise IndexError(index)

    def representatives(self) -> np.ndarray:
        return np.array([self.lambdas[list(g)].mean() for g in self.groups])


@dataclass(frozen=True)
class RiemannData:
    point: Optional[np.ndarray]
    g: np.ndarray
    christoffel: np.ndarray  # Γ[m, i, j] = Γ^m_ij
    R_coord: np.ndarray
    frame: np.ndarray
    R: np.ndarray
    ricci: np.ndarray
    kappa: float

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def symmetry_residual(self) -> float:
        R = self.R
        return float(
            max(
                np.max(np.abs(R + R.transpose(1, 0, 2, 3))),
                np.max(np.abs(R + R.transpose(0, 1, 3, 2))),
                np.max(np.abs(R - R.transpose(2, 3, 0, 1))),
            )
        )

    def bianchi_residual(self) -> float:
        R = self.R
        cyclic = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(cyclic)))

    def sectional(self) -> np.ndarray:
        """K[i, j] = R_ijij"""
        return np.einsum("ijij->ij", self.R)


# ---------------------------------------------------------------------------
# 向き
# ---------------------------------------------------------------------------


def _value_normal(imm: Immersion, point: np.ndarray) -> np.ndarray:
    f = imm.jet(point, order=1, check=False)
    J = f.gradient()
    sv = linalg.svdvals(J)
    if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
        raise RankDeficient(f"{imm.name}: Jacobian rank < {imm.dim_in} at {point}")
    basis = np.column_stack([J, f.value]) if imm.sphere else J
    u, _, _ = linalg.svd(basis)
    return u[:, -1]


@lru_cache(maxsize=64)
def _base_normal(imm: Immersion) -> tuple[float, ...]:
    normal = _value_normal(imm, imm.base_point)
    nonzero = np.flatnonzero(np.abs(normal) > SIGN_TOL)
    if nonzero.size and normal[nonzero[-1]] < 0:
        normal = -normal
    return tuple(normal)


def oriented_normal(imm: Immersion, point: Sequence[float]) -> np.ndarray:
    """基点で最後の非零成分を正にした法線を、直線経路に沿って連続的に運ぶ"""
    point = np.asarray(point, dtype=float)
    base = imm.base_point
    normal = np.array(_base_normal(imm))
    if np.any(point != base):
        for t in np.linspace(0.0, 1.0, ORIENTATION_STEPS + 1)[1:]:
            step = _value_normal(imm, base + t * (point - base))
            normal = step if step @ normal >= 0 else -step
    return imm.orientation * normal


# ---------------------------------------------------------------------------
# 基本形式
# ---------------------------------------------------------------------------


def surface_jets(
    imm: Immersion, point: Sequence[float], order: int = 4, check: bool = True
) -> SurfaceJets:
    """f を order 階で評価し、I・N・II・H のジェットを作る"""
    if order < 2:
        raise OrderUnavailable(
            f"fundamental forms need jets of order >= 2, got {order}"
        )
    if not imm.is_hypersurface:
        raise DimensionMismatch(
            f"{imm.name}: dim_out={imm.dim_out} "
            f"is not a hypersurface of dim {imm.dim_in}"
        )
    point = imm.check_point(point) if check else np.asarray(point, dtype=float)
    f = imm.jet(point, order, check=False)
    w0 = oriented_normal(imm, point)  # 階数落ちはここで RankDeficient
    J = f.derivatives()
    I = jets.jet_einsum("ai,aj->ij", J, J)
    I_inv = jets.jet_inv(I)
    m = imm.dim_out

    projector = np.eye(m) - jets.jet_einsum(
        "ai,ij->aj", J, jets.jet_einsum("ij,bj->ib", I_inv, J)
    )
    if imm.sphere:
        projector = projector - jets.jet_einsum("a,b->ab", f.truncate(order - 1), f)
    raw = jets.jet_einsum("ab,b->a", projector, w0)
    normal = raw / jets.sqrt(jets.dot(raw, raw))

    F2 = J.derivatives()
    II = jets.jet_einsum("aij,a->ij", F2, normal)
    H = jets.trace(jets.jet_einsum("ij,jk->ik", I_inv, II)) / imm.dim_in
    return SurfaceJets(f=f, J=J, I=I, I_inv=I_inv, normal=normal, II=II, H=H)


def orthonormal_frame(metric: np.ndarray) -> np.ndarray:
    """計量のコレスキー分解によるグラム・シュミット枠 E（EᵀgE = Id）"""
    try:
        L = linalg.cholesky(metric, lower=True)
    except linalg.LinAlgError as e:
        raise MetricNotPositive(f"metric is not positive definite: {e}") from None
    return linalg.solve_triangular(L, np.eye(metric.shape[0]), lower=True).T


def point_frame(imm: Immersion, point: Sequence[float], sj: SurfaceJets) -> PointFrame:
    I = sj.I.value
    E = orthonormal_frame(I)
    II_coord = sj.II.value
    II = E.T @ II_coord @ E
    return PointFrame(
        point=np.asarray(point, dtype=float),
        I=I,
        II_coord=II_coord,
        II=(II + II.T) / 2.0,
        normal=sj.normal.value,
        H=float(sj.H.value),
        frame=E,
        ambient_frame=sj.J.value @ E,
        orientation=imm.orientation,
    )


def fundamental_forms(
    imm: Immersion, point: Sequence[float], order: int = 4
) -> PointFrame:
    """第一・第二基本形式と単位法線（II は I-正規直交枠成分）"""
    return point_frame(imm, point, surface_jets(imm, point, order))


def spherical_fundamental_forms(
    imm: Immersion, point: Sequence[float], order: int = 4
) -> PointFrame:
    """単位球面内の超曲面の I_u, II_u（法線は球面の接空間へ射影）"""
    if not imm.sphere:
        raise DimensionMismatch(f"{imm.name} is not a spherical immersion")
    return fundamental_forms(imm, point, order)


# ---------------------------------------------------------------------------
# 主曲率
# ---------------------------------------------------------------------------


def group_values(
    values: Sequence[float], eps: float = EPS_GROUP
) -> tuple[tuple[int, ...], ...]:
    """昇順の値を隣接差で分割（差 < eps は同群、≥ 10eps で分離、その間は曖昧）"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return ()
    groups = [[0]]
    for k in range(1, values.size):
        gap = values[k] - values[k - 1]
        if gap < eps:
            groups[-1].append(k)
        elif gap >= 10.0 * eps:
            groups.append([k])
        else:
            raise GroupingAmbiguous(
                f"gap {gap:.3e} between values {k - 1} and {k} lies in "
                f"[{eps:.1e}, {10 * eps:.1e})"
            )
    return tuple(tuple(g) for g in groups)


def _normalize_sign(v: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(v) > SIGN_TOL)
    if nonzero.size and v[nonzero[0]] < 0:
        return -v
    return v


def sorted_eigh(
    matrix: np.ndarray, metric: Optional[np.ndarray] = None, eps: float = EPS_GROUP
) -> tuple[np.ndarray, np.ndarray, tuple[tuple[int, ...], ...]]:
    """対称（一般化）固有値問題を昇順に解き、群内は方向の辞書式順で並べる"""
    values, vectors = linalg.eigh(matrix, metric)
    groups = group_values(values, eps)
    vectors = np.array(vectors)
    for group in groups:
        cols = [_normalize_sign(vectors[:, k]) for k in group]
        cols.sort(key=lambda v: tuple(-v))
        for k, v in zip(group, cols):
            vectors[:, k] = v
    return values, vectors, groups


def principal_decomposition(
    pf: PointFrame, eps_group: float = EPS_GROUP
) -> PrincipalData:
    """II（正規直交枠）の固有分解と ε_group によるグループ化"""
    lambdas, directions, groups = sorted_eigh(pf.II, eps=eps_group)
    return PrincipalData(
        lambdas=lambdas, directions=directions, groups=groups, r=len(groups)
    )


def moebius_curvature(
    lambdas: Sequence[float], i: int, j: int, s: int, eps: float = EPS_GROUP
) -> float:
    """M_ijs = (λ_i − λ_j)/(λ_i − λ_s)"""
    if i == j:
        return 0.0
    denom = lambdas[i] - lambdas[s]
    if abs(denom) <= eps:
        raise DegenerateDenominator(f"λ_{i} - λ_{s} = {denom:.3e}")
    return float((lambdas[i] - lambdas[j]) / denom)


def laguerre_curvature(
    radii: Sequence[float], i: int, j: int, s: int, eps: float = EPS_GROUP
) -> float:
    """Υ_ijs = (R_i − R_j)/(R_i − R_s)"""
    return moebius_curvature(radii, i, j, s, eps)


def curvature_ratio_table(
    values: Sequence[float], eps: float = EPS_GROUP
) -> np.ndarray:
    """相異なる代表値すべての (i, j, s) に対する比の表（分母が退化する組は nan）"""
    values = np.asarray(values, dtype=float)
    k = values.size
    table = np.full((k, k, k), np.nan)
    for i in range(k):
        for j in range(k):
            for s in range(k):
                if s == i:
                    continue
                table[i, j, s] = moebius_curvature(values, i, j, s, eps)
    return table


# ---------------------------------------------------------------------------
# リーマン幾何
# ---------------------------------------------------------------------------

MetricField = Callable[[np.ndarray], Jet]


def christoffel(metric: Jet) -> Jet:
    """Γ^m_ij = ½ g^{ml}(∂_i g_lj + ∂_j g_li − ∂_l g_ij)（1 階低いジェット）"""
    if metric.order < 1:
        raise OrderUnavailable("Christoffel symbols need metric jets of order >= 1")
    dg = metric.derivatives()  # dg[i, j, l] = ∂_l g_ij
    # term[l, i, j] = ∂_i g_lj + ∂_j g_li − ∂_l g_ij
    term = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
    ginv = jets.jet_inv(metric.truncate(metric.order - 1))
    return jets.jet_einsum("ml,lij->mij", ginv, term) * 0.5


def riemann_of_metric(
    metric: Union[Jet, MetricField],
    point: Optional[Sequence[float]] = None,
    frame: Optional[np.ndarray] = None,
) -> RiemannData:
    """計量ジェット（2 階以上）から曲率をフレーム成分で求める

    Args:
        metric: 計量の (n, n) ジェット、または点からそれを返す関数
        point: metric が関数のときの評価点
        frame: g-正規直交枠（列がフレームベクトルの座標成分）。省略時はコレスキー枠

    Returns:
        RiemannData
    """
    if callable(metric) and not isinstance(metric, Jet):
        metric = metric(np.asarray(point, dtype=float))
    if metric.order < 2:
        raise OrderUnavailable("curvature needs metric jets of order >= 2")
    g = metric.value
    g = (g + g.T) / 2.0
    if np.min(linalg.eigvalsh(g)) <= 0:
        raise MetricNotPositive(f"metric eigenvalues {linalg.eigvalsh(g)}")

    gamma = christoffel(metric)
    G = gamma.value
    dG = gamma.derivatives().value  # dG[m, i, j, k] = ∂_k Γ^m_ij
    R_up = (
        np.einsum("ljki->lijk", dG)
        - np.einsum("likj->lijk", dG)
        + np.einsum("lim,mjk->lijk", G, G)
        - np.einsum("ljm,mik->lijk", G, G)
    )
    R_coord = np.einsum("km,mijl->ijkl", g, R_up)

    E = orthonormal_frame(g) if frame is None else _check_frame(g, frame)
    R = np.einsum("ijkl,ia,jb,kc,ld->abcd", R_coord, E, E, E, E)
    n = g.shape[0]
    ricci = np.einsum("abad->bd", R)
    kappa = float(np.einsum("abab->", R) / (n * (n - 1))) if n > 1 else 0.0
    return RiemannData(
        point=None if point is None else np.asarray(point, dtype=float),
        g=g,
        christoffel=G,
        R_coord=R_coord,
        frame=E,
        R=R,
        ricci=ricci,
        kappa=kappa,
    )


def _check_frame(g: np.ndarray, frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    if frame.shape != g.shape:
        raise FrameMismatch(f"frame shape {frame.shape} vs metric {g.shape}")
    defect = np.max(np.abs(frame.T @ g @ frame - np.eye(g.shape[0])))
    if defect > FRAME_TOL:
        raise FrameMismatch(f"frame is not g-orthonormal (defect {defect:.3e})")
    return frame


def covariant_derivative(
    tensor: Jet, riemann: RiemannData, frame: Optional[np.ndarray] = None
) -> np.ndarray:
    """対称 2-テンソル（座標成分ジェット）の共変微分のフレーム成分 T[a, b, c] = (∇_{E_c}T)(E_a, E_b)"""
    n = riemann.dim
    if tensor.shape != (n, n):
        raise FrameMismatch(f"tensor shape {tensor.shape} vs metric dim {n}")
    if tensor.order < 1:
        raise OrderUnavailable("covariant derivative needs tensor jets of order >= 1")
    E = riemann.frame if frame is None else _check_frame(riemann.g, frame)
    T = tensor.value
    dT = tensor.derivatives().value  # dT[i, j, k] = ∂_k T_ij
    G = riemann.christoffel
    nabla = dT - np.einsum("mki,mj->ijk", G, T) - np.einsum("mkj,im->ijk", G, T)
    return np.einsum("ijk,ia,jb,kc->abc", nabla, E, E, E)


def covariant_derivative_form(
    form: Jet, riemann: RiemannData, frame: Optional[np.ndarray] = None
) -> np.ndarray:
    """1-形式の共変微分のフレーム成分 C[a, c] = (∇_{E_c}C)(E_a)"""
    n = riemann.dim
    if form.shape != (n,):
        raise FrameMismatch(f"form shape {form.shape} vs metric dim {n}")
    E = riemann.frame if frame is None else _check_frame(riemann.g, frame)
    C = form.value
    dC = form.derivatives().value  # dC[i, k] = ∂_k C_i
    nabla = dC - np.einsum("mki,m->ik", riemann.christoffel, C)
    return np.einsum("ik,ia,kc->ac", nabla, E, E)


def frame_components(tensor: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """座標成分の 2-テンソルを枠成分 EᵀTE に変換"""
    return frame.T @ tensor @ frame
