"""
ミンコフスキー空間

符号 (1 マイナス) の ℝ₁ⁿ⁺³ と (2 マイナス) の ℝ₂ⁿ⁺⁴ を同じ型で扱う線形代数。
光錐上の判定とローレンツ変換の生成・作用を提供します。
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.app.errors import InvalidTransform, SignatureMismatch

TRANSFORM_TOL = 1e-12
MAX_RAPIDITY = 2.0


@dataclass(frozen=True)
class Signature:
    """計量の符号。negative_slots の成分にマイナスが付く"""

    dim: int
    negative_slots: tuple[int, ...] = (0,)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise SignatureMismatch(f"dimension must be positive: {self.dim}")
        slots = tuple(int(s) for s in self.negative_slots)
        if len(set(slots)) != len(slots) or any(
            s < 0 or s >= self.dim for s in slots
        ):
            raise SignatureMismatch(
                f"invalid negative slots {slots} for dim {self.dim}"
            )
        object.__setattr__(self, "negative_slots", slots)

    @classmethod
    def moebius(cls, n: int) -> "Signature":
        """ℝ₁ⁿ⁺³（先頭成分のみ負）"""
        return cls(n + 3, (0,))

    @classmethod
    def laguerre(cls, n: int) -> "Signature":
        """ℝ₂ⁿ⁺⁴（先頭と末尾が負）"""
        return cls(n + 4, (0, n + 3))

    @property
    def diagonal(self) -> np.ndarray:
        d = np.ones(self.dim)
        d[list(self.negative_slots)] = -1.0
        return d

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


@dataclass(frozen=True)
class SignedVector:
    """符号付き計量を持つベクトル"""

    components: np.ndarray
    signature: Signature

    def __post_init__(self) -> None:
        comps = np.array(self.components, dtype=float)
        comps.setflags(write=False)
        if comps.shape != (self.signature.dim,):
            raise SignatureMismatch(
                f"expected {self.signature.dim} components, got shape {comps.shape}"
            )
        object.__setattr__(self, "components", comps)

    def norm2(self) -> float:
        return inner(self, self)


@dataclass(frozen=True)
class LorentzTransform:
    """符号行列 G を保存する変換 MᵀGM = G"""

    matrix: np.ndarray
    signature: Signature
    tol: float = field(default=TRANSFORM_TOL, compare=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        d = self.signature.dim
        if m.shape != (d, d):
            raise SignatureMismatch(f"matrix shape {m.shape} does not match dim {d}")
        g = self.signature.matrix
        defect = np.max(np.abs(m.T @ g @ m - g))
        if defect > self.tol * max(1.0, np.max(np.abs(m)) ** 2):
            raise InvalidTransform(f"MᵀGM - G = {defect:.3e}")
        if self.signature.negative_slots == (0,) and m[0, 0] <= 0:
            raise InvalidTransform("transform reverses time orientation")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def compose(self, other: "LorentzTransform") -> "LorentzTransform":
        _check(self.signature, other.signature)
        return LorentzTransform(self.matrix @ other.matrix, self.signature)

    def defect(self) -> float:
        g = self.signature.matrix
        return float(np.max(np.abs(self.matrix.T @ g @ self.matrix - g)))


def _check(a: Signature, b: Signature) -> None:
    if a != b:
        raise SignatureMismatch(f"{a} != {b}")


def lorentz_inner(x: np.ndarray, y: np.ndarray, signature: Signature) -> np.ndarray:
    """配列版の内積（最終軸で縮約、ブロードキャスト可）"""
    return np.sum(np.asarray(x) * np.asarray(y) * signature.diagonal, axis=-1)


def inner(x: SignedVector, y: SignedVector) -> float:
    """符号付き内積 ⟨x, y⟩"""
    _check(x.signature, y.signature)
    return float(lorentz_inner(x.components, y.components, x.signature))


def apply(m: LorentzTransform, x: SignedVector) -> SignedVector:
    """変換 M を x に作用させる"""
    _check(m.signature, x.signature)
    return SignedVector(m.matrix @ x.components, x.signature)


def orthochronous_from(
    angles: Sequence[float], rapidity: float, dim: int
) -> LorentzTransform:
    """空間回転（隣接 Givens 回転の合成）と (0,1) 平面のブーストから変換を構成

    Args:
        angles: 空間成分 (1..dim-1) の隣接ペアごとの回転角。長さ dim-2
        rapidity: ブーストのラピディティ
        dim: 次元 (n+3)
    """
    if dim < 4:
        raise SignatureMismatch(f"dim must be >= 4, got {dim}")
    angles = list(angles)
    if len(angles) != dim - 2:
        raise SignatureMismatch(f"expected {dim - 2} angles, got {len(angles)}")

    rotation = np.eye(dim)
    for offset, angle in enumerate(angles):
        i, j = 1 + offset, 2 + offset
        givens = np.eye(dim)
        c, s = np.cos(angle), np.sin(angle)
        givens[i, i], givens[i, j], givens[j, i], givens[j, j] = c, -s, s, c
        rotation = givens @ rotation

    boost = np.eye(dim)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    boost[0, 0], boost[0, 1], boost[1, 0], boost[1, 1] = ch, sh, sh, ch

    return LorentzTransform(boost @ rotation, Signature(dim, (0,)))


def random_orthochronous(seed: int, dim: int) -> LorentzTransform:
    """シード固定の直時的ローレンツ変換（ラピディティは ±2 以内）"""
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-np.pi, np.pi, size=dim - 2)
    rapidity = rng.uniform(-MAX_RAPIDITY, MAX_RAPIDITY)
    # 回転の前後でブーストを挟み、ブーストの向きも一様に近づける
    pre = orthochronous_from(rng.uniform(-np.pi, np.pi, size=dim - 2), 0.0, dim)
    return orthochronous_from(angles, rapidity, dim).compose(pre)


def is_null(x: SignedVector, tol: float = 1e-10) -> bool:
    return abs(inner(x, x)) < tol
