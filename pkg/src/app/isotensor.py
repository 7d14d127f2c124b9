"""
等径テンソルの代数

リーマン多様体上の対称 2-テンソル（正規直交枠成分と共変微分）について、
コダッツィ残差、等径判定、接続形式、勾配からの断面曲率、一般化カルタン恒等式、
クルカルニ・野水積、ガウス関係式、スペクトルの判定を行います。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.app.checks import drift, max_abs
from src.app.errors import DegenerateDenominator, DimensionMismatch, SameGroup
from src.app.surface import EPS_GROUP, group_values, sorted_eigh

logger = logging.getLogger(__name__)

DENOMINATOR_EPS = 1e-8


# ---------------------------------------------------------------------------
# 標本
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorFieldSample:
    """固有枠での T（対角）、T_ij,k、固有値、グループ、曲率（任意）"""

    T: np.ndarray
    dT: np.ndarray
    eigenvalues: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    R: Optional[np.ndarray] = None
    point: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def group_index(self) -> np.ndarray:
        """各添字が属するグループ番号"""
        index = np.empty(self.n, dtype=int)
        for k, group in enumerate(self.groups):
            index[list(group)] = k
        return index

    def require_curvature(self) -> np.ndarray:
        if self.R is None:
            raise DimensionMismatch("tensor sample carries no curvature")
        return self.R


@dataclass(frozen=True)
class PairedTensorSample:
    """同じ枠で同時対角化した 2 つの標本（first ~ B、second ~ A）"""

    first: TensorFieldSample
    second: TensorFieldSample
    refined: tuple[tuple[int, ...], ...]
    commutator: float

    @property
    def b(self) -> np.ndarray:
        return self.first.eigenvalues

    @property
    def a(self) -> np.ndarray:
        return self.second.eigenvalues

    def pairs(self) -> list[tuple[float, float, int]]:
        """相異なる (a, b) と重複度"""
        return [
            (float(self.a[list(g)].mean()), float(self.b[list(g)].mean()), len(g))
            for g in self.refined
        ]


def _rotate(
    T: np.ndarray, dT: np.ndarray, R: Optional[np.ndarray], V: np.ndarray
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    T_rot = V.T @ T @ V
    dT_rot = np.einsum("ijk,ia,jb,kc->abc", dT, V, V, V)
    R_rot = None if R is None else np.einsum("ijkl,ia,jb,kc,ld->abcd", R, V, V, V, V)
    return (T_rot + T_rot.T) / 2.0, dT_rot, R_rot


def tensor_field_sample(
    T: np.ndarray,
    dT: np.ndarray,
    R: Optional[np.ndarray] = None,
    point: Optional[Sequence[float]] = None,
    eps_group: float = EPS_GROUP,
) -> TensorFieldSample:
    """正規直交枠の成分を T の固有枠へ回して標本にする"""
    T = np.asarray(T, dtype=float)
    values, V, groups = sorted_eigh((T + T.T) / 2.0, eps=eps_group)
    T_rot, dT_rot, R_rot = _rotate(T, np.asarray(dT, dtype=float), R, V)
    return TensorFieldSample(
        T=T_rot,
        dT=dT_rot,
        eigenvalues=values,
        groups=groups,
        R=R_rot,
        point=None if point is None else np.asarray(point, dtype=float),
    )


def paired_sample(
    T1: np.ndarray,
    dT1: np.ndarray,
    T2: np.ndarray,
    dT2: np.ndarray,
    R: Optional[np.ndarray] = None,
    point: Optional[Sequence[float]] = None,
    eps_group: float = EPS_GROUP,
) -> PairedTensorSample:
    """T1 の固有空間ごとに T2 を対角化して同時固有枠を作る"""
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    if T1.shape != T2.shape:
        raise DimensionMismatch(f"shapes {T1.shape} and {T2.shape}")
    commutator = max_abs(T1 @ T2 - T2 @ T1)
    b, V, groups = sorted_eigh((T1 + T1.T) / 2.0, eps=eps_group)
    V = np.array(V)
    refined: list[tuple[int, ...]] = []
    for group in groups:
        idx = list(group)
        block = V[:, idx].T @ T2 @ V[:, idx]
        a_block, rot, sub_groups = sorted_eigh((block + block.T) / 2.0, eps=eps_group)
        V[:, idx] = V[:, idx] @ rot
        refined.extend(tuple(idx[k] for k in sub) for sub in sub_groups)

    T1_rot, dT1_rot, R_rot = _rotate(T1, np.asarray(dT1, dtype=float), R, V)
    T2_rot, dT2_rot, _ = _rotate(T2, np.asarray(dT2, dtype=float), None, V)
    point = None if point is None else np.asarray(point, dtype=float)
    first = TensorFieldSample(
        T1_rot, dT1_rot, np.diag(T1_rot).copy(), groups, R_rot, point
    )
    a = np.diag(T2_rot).copy()
    second = TensorFieldSample(
        T2_rot, dT2_rot, a, _groups_of_values(a, eps_group), R_rot, point
    )
    return PairedTensorSample(
        first=first, second=second, refined=tuple(refined), commutator=commutator
    )


def _groups_of_values(values: np.ndarray, eps: float) -> tuple[tuple[int, ...], ...]:
    """並び順によらない値のグループ化"""
    order = np.argsort(values, kind="stable")
    sorted_groups = group_values(values[order], eps)
    return tuple(tuple(int(order[k]) for k in g) for g in sorted_groups)


# ---------------------------------------------------------------------------
# 基本演算
# ---------------------------------------------------------------------------


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """(h⊙k)_ijkl = h_ik k_jl + h_jl k_ik − h_il k_jk − h_jk k_il"""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if h.shape != k.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(
            f"Kulkarni–Nomizu needs equal square shapes: {h.shape}, {k.shape}"
        )
    return (
        np.einsum("ik,jl->ijkl", h, k)
        + np.einsum("jl,ik->ijkl", h, k)
        - np.einsum("il,jk->ijkl", h, k)
        - np.einsum("jk,il->ijkl", h, k)
    )


def gauss_relation_residual(
    R: np.ndarray, T1: np.ndarray, T2: np.ndarray, g: Optional[np.ndarray] = None
) -> float:
    """max |R − (½ T1⊙T1 + T2⊙g)|"""
    R = np.asarray(R, dtype=float)
    T1 = np.asarray(T1, dtype=float)
    g = np.eye(T1.shape[0]) if g is None else np.asarray(g, dtype=float)
    if R.shape != (T1.shape[0],) * 4:
        raise DimensionMismatch(f"curvature shape {R.shape} vs tensor {T1.shape}")
    return max_abs(R - (0.5 * kulkarni_nomizu(T1, T1) + kulkarni_nomizu(T2, g)))


def codazzi_residual(field: TensorFieldSample) -> float:
    """max |T_ij,k − T_kj,i|"""
    return max_abs(field.dT - field.dT.transpose(2, 1, 0))


def vanishing_pattern(field: TensorFieldSample) -> float:
    """[i]=[j]、[j]=[k]、[i]=[k] のいずれかを満たす T_ij,k の最大絶対値"""
    gi = field.group_index()
    same = (
        (gi[:, None, None] == gi[None, :, None])
        | (gi[None, :, None] == gi[None, None, :])
        | (gi[:, None, None] == gi[None, None, :])
    )
    return max_abs(field.dT[same])


def extra_vanishing(paired: PairedTensorSample) -> float:
    """[j]=[i]、k ∉ [j] の T̂_ij,k の最大絶対値"""
    gi = paired.first.group_index()
    same_ij = gi[:, None, None] == gi[None, :, None]
    k_outside = gi[None, :, None] != gi[None, None, :]
    return max_abs(paired.second.dT[same_ij & k_outside])


@dataclass
class TensorVerdict:
    verdict: bool
    codazzi: float
    eigenvalue_drift: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "codazzi": self.codazzi,
            "eigenvalue_drift": self.eigenvalue_drift,
            "tolerance": self.tolerance,
        }


def isoparametric_check(
    fields: Sequence[TensorFieldSample], tol: float
) -> TensorVerdict:
    """各点でコダッツィ残差 < tol かつ固有値の変動 < tol"""
    codazzi = max(codazzi_residual(f) for f in fields)
    spread = drift(f.eigenvalues for f in fields)
    return TensorVerdict(
        verdict=codazzi < tol and spread < tol,
        codazzi=codazzi,
        eigenvalue_drift=spread,
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# 接続形式と曲率
# ---------------------------------------------------------------------------


def connection_form(field: TensorFieldSample, i: int, j: int) -> np.ndarray:
    """ω_ij の係数 ω_ij(E_k) = T_ij,k / (b_i − b_j)"""
    gi = field.group_index()
    if gi[i] == gi[j]:
        raise SameGroup(f"indices {i} and {j} share an eigenvalue group")
    b = field.eigenvalues
    return field.dT[i, j, :] / (b[i] - b[j])


def connection_forms(field: TensorFieldSample) -> np.ndarray:
    """全 (i, j) の ω_ij 係数（同じグループの組は nan）"""
    n = field.n
    gi = field.group_index()
    omega = np.full((n, n, n), np.nan)
    for i in range(n):
        for j in range(n):
            if gi[i] != gi[j]:
                omega[i, j] = connection_form(field, i, j)
    return omega


def sectional_from_gradients(field: TensorFieldSample) -> np.ndarray:
    """R_ijij = Σ_{k∉[i],[j]} 2 T²_ij,k / ((b_k − b_i)(b_k − b_j))（同じグループの組は nan）"""
    n = field.n
    b = field.eigenvalues
    gi = field.group_index()
    K = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            if gi[i] == gi[j]:
                continue
            total = 0.0
            for k in range(n):
                if gi[k] in (gi[i], gi[j]):
                    continue
                total += 2.0 * field.dT[i, j, k] ** 2 / ((b[k] - b[i]) * (b[k] - b[j]))
            K[i, j] = total
    return K


def _ratio(numerator: float, denominator: float, eps: float) -> float:
    if abs(denominator) <= eps:
        raise DegenerateDenominator(f"denominator {denominator:.3e} within {eps:.1e}")
    return numerator / denominator


def cartan_residual(
    field,
    mode: str = "plain",
    members: Optional[Sequence[int]] = None,
    eps: float = DENOMINATOR_EPS,
) -> list[float]:
    """一般化カルタン恒等式の各添字での和

    Args:
        field: plain と line では TensorFieldSample、paired では PairedTensorSample
        mode: plain は Σ_{j∉[i]} R_ijij/(b_j − b_i)、paired は T1 の固有空間内で
            Σ_{j∈[i], j∉(i)} R_ijij/(a_i − a_j)、line は members に限った plain の和
        members: line モードで使う添字の集合

    Returns:
        各添字 i に対する和（0 が期待値）
    """
    if mode == "paired":
        R = field.first.require_curvature()
        b_groups = field.first.group_index()
        a = field.a
        refined = np.empty(len(a), dtype=int)
        for k, group in enumerate(field.refined):
            refined[list(group)] = k
        sums = []
        for i in range(len(a)):
            total = 0.0
            for j in range(len(a)):
                if b_groups[j] == b_groups[i] and refined[j] != refined[i]:
                    total += _ratio(R[i, j, i, j], a[i] - a[j], eps)
            sums.append(total)
        return sums

    if mode not in ("plain", "line"):
        raise ValueError(f"unknown Cartan mode {mode!r}")
    R = field.require_curvature()
    b = field.eigenvalues
    gi = field.group_index()
    indices = list(range(field.n)) if mode == "plain" else list(members or [])
    sums = []
    for i in indices:
        total = 0.0
        for j in indices:
            if gi[j] != gi[i]:
                total += _ratio(R[i, j, i, j], b[j] - b[i], eps)
        sums.append(total)
    return sums


@dataclass
class SignPattern:
    adjacent_min: float
    extreme_max: float

    def holds(self, slack: float = 1e-8) -> bool:
        return self.adjacent_min >= -slack and self.extreme_max <= slack


def sign_pattern(field: TensorFieldSample) -> SignPattern:
    """隣接グループ間の R_ijij ≥ 0 と、両端グループ間の R_ijij ≤ 0"""
    R = field.require_curvature()
    groups = field.groups
    adjacent = []
    for lo, hi in zip(groups[:-1], groups[1:]):
        adjacent.extend(R[i, j, i, j] for i in lo for j in hi)
    extreme = []
    if len(groups) > 1:
        extreme = [R[i, j, i, j] for i in groups[0] for j in groups[-1]]
    return SignPattern(
        adjacent_min=float(min(adjacent)) if adjacent else 0.0,
        extreme_max=float(max(extreme)) if extreme else 0.0,
    )


def block_pair_residual(paired: PairedTensorSample) -> tuple[int, float]:
    """T1 の各固有空間での T2 の相異なる固有値数の最大と、2 値の固有空間での |b² + a + ā|"""
    most = 1
    residual = 0.0
    for group in paired.first.groups:
        values = sorted(
            {
                round(float(paired.a[list(sub)].mean()), 12)
                for sub in paired.refined
                if set(sub) <= set(group)
            }
        )
        most = max(most, len(values))
        if len(values) == 2:
            b = float(paired.b[group[0]])
            residual = max(residual, abs(b * b + values[0] + values[1]))
    return most, residual


# ---------------------------------------------------------------------------
# スペクトル判定
# ---------------------------------------------------------------------------


@dataclass
class SpectrumVerdict:
    kind: str
    values: list[float]
    multiplicities: list[int]
    sums: list[float]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "values": self.values,
            "multiplicities": self.multiplicities,
            "sums": self.sums,
        }


def _spectrum_groups(
    spectrum: Sequence, tol: float
) -> tuple[list[float], list[int]]:
    """値の並び、または (値, 重複度) の並びを代表値と重複度にまとめる"""
    expanded: list[float] = []
    for item in spectrum:
        if isinstance(item, (tuple, list)):
            value, mult = item
            expanded.extend([float(value)] * int(mult))
        else:
            expanded.append(float(item))
    values = np.sort(np.array(expanded))
    groups = group_values(values, tol)
    return [float(values[list(g)].mean()) for g in groups], [len(g) for g in groups]


def _cartan_sums(values: list[float], mults: list[int], sign: float) -> list[float]:
    """R_ijij = sign·(v_i + v_j) を仮定したときの Σ_{j∉[i]} R_ijij/(v_j − v_i)"""
    sums = []
    for i, vi in enumerate(values):
        total = 0.0
        for j, vj in enumerate(values):
            if j != i:
                total += mults[j] * sign * (vi + vj) / (vj - vi)
        sums.append(total)
    return sums


def schouten_spectrum_classify(
    spectrum: Sequence, tol: float = 1e-8
) -> SpectrumVerdict:
    """局所共形平坦（R = S⊙g）のもとでのスホーテンテンソルの定数スペクトル判定

    ConstantCurvature（1 値）、TwoBlock（{b, −b}）、Infeasible（カルタン和が 0 でない）。
    """
    values, mults = _spectrum_groups(spectrum, tol)
    sums = _cartan_sums(values, mults, 1.0)
    if len(values) == 1:
        kind = "ConstantCurvature"
    elif (
        len(values) == 2
        and abs(values[0] + values[1]) < tol
        and max(map(abs, sums)) < tol
    ):
        kind = "TwoBlock"
    else:
        kind = "Infeasible"
    return SpectrumVerdict(kind, values, mults, sums)


def laguerre_spectrum_classify(
    spectrum: Sequence, tol: float = 1e-8
) -> SpectrumVerdict:
    """R_ijij = −(τ_i + τ_j) のもとでのラゲールテンソルの定数スペクトル判定

    Zero（{0}）、Uniform（0 でない 1 値）、TwoBlock（{τ, −τ}）、Infeasible。
    """
    values, mults = _spectrum_groups(spectrum, tol)
    sums = _cartan_sums(values, mults, -1.0)
    if len(values) == 1:
        kind = "Zero" if abs(values[0]) < tol else "Uniform"
    elif (
        len(values) == 2
        and abs(values[0] + values[1]) < tol
        and max(map(abs, sums)) < tol
    ):
        kind = "TwoBlock"
    else:
        kind = "Infeasible"
    return SpectrumVerdict(kind, values, mults, sums)


def schouten_tensor(ricci: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """S = (Ric − scal/(2(n−1)) g)/(n−2)（正規直交枠）"""
    ricci = np.asarray(ricci, dtype=float)
    n = ricci.shape[0] if n is None else n
    if n < 3:
        raise DimensionMismatch(f"Schouten tensor needs n >= 3, got {n}")
    scal = float(np.trace(ricci))
    return (ricci - scal / (2.0 * (n - 1)) * np.eye(n)) / (n - 2)
