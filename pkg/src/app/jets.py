"""
ジェット（切断テイラー展開）

写像の値と 4 階までのすべての偏微分を点ごとに厳密に伝播します。
係数は c_α = ∂^α f / α! を多重指数の密テーブルで保持し、先頭軸が係数軸、
残りの軸がジェットの配列形状（ベクトル・行列のジェット）です。
"""

import string
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from src.app.errors import (
    DimensionMismatch,
    DivisionNearZero,
    DomainError,
    OrderOutOfRange,
)

MAX_ORDER = 4
DIVISION_EPS = 1e-14

Number = Union[float, int, np.ndarray]


# ---------------------------------------------------------------------------
# 多重指数テーブル
# ---------------------------------------------------------------------------


def _compositions(degree: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(degree,)]
    out = []
    for head in range(degree, -1, -1):
        for tail in _compositions(degree - head, parts - 1):
            out.append((head,) + tail)
    return out


@lru_cache(maxsize=None)
def multi_indices(dim_in: int, order: int) -> tuple[tuple[int, ...], ...]:
    """次数順、同次数内は辞書式降順の多重指数一覧（e_0 が e_1 より先）"""
    out: list[tuple[int, ...]] = []
    for degree in range(order + 1):
        out.extend(_compositions(degree, dim_in))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_map(dim_in: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: k for k, alpha in enumerate(multi_indices(dim_in, order))}


@lru_cache(maxsize=None)
def _factorials(dim_in: int, order: int) -> np.ndarray:
    from math import factorial

    return np.array(
        [
            np.prod([factorial(a) for a in alpha])
            for alpha in multi_indices(dim_in, order)
        ],
        dtype=float,
    )


@lru_cache(maxsize=None)
def _product_table(
    dim_in: int, order: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """切断積 c_γ = Σ_{α+β=γ} a_α b_β のための (I, J, scatter) テーブル"""
    idx = multi_indices(dim_in, order)
    pos = _index_map(dim_in, order)
    left, right, target = [], [], []
    for a, alpha in enumerate(idx):
        for b, beta in enumerate(idx):
            if sum(alpha) + sum(beta) > order:
                continue
            gamma = tuple(x + y for x, y in zip(alpha, beta))
            left.append(a)
            right.append(b)
            target.append(pos[gamma])
    scatter = np.zeros((len(idx), len(left)))
    scatter[target, np.arange(len(left))] = 1.0
    return np.array(left), np.array(right), scatter


@lru_cache(maxsize=None)
def _derivative_table(
    dim_in: int, order: int, axis: int
) -> tuple[np.ndarray, np.ndarray]:
    pos = _index_map(dim_in, order)
    source, factor = [], []
    for gamma in multi_indices(dim_in, order - 1):
        shifted = list(gamma)
        shifted[axis] += 1
        source.append(pos[tuple(shifted)])
        factor.append(gamma[axis] + 1.0)
    return np.array(source), np.array(factor)


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise OrderOutOfRange(f"order must be in 0..{MAX_ORDER}, got {order}")


# ---------------------------------------------------------------------------
# Jet
# ---------------------------------------------------------------------------


class Jet:
    """多変数切断テイラー展開（配列値可）"""

    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray, dim_in: int, order: int) -> None:
        _check_order(order)
        coeffs = np.asarray(coeffs, dtype=float)
        expected = len(multi_indices(dim_in, order))
        if coeffs.shape[0] != expected:
            raise DimensionMismatch(
                f"jet of dim_in={dim_in}, order={order} needs {expected} "
                f"coefficients, got {coeffs.shape[0]}"
            )
        self.coeffs = coeffs
        self.dim_in = dim_in
        self.order = order

    # --- 構築 -------------------------------------------------------------

    @classmethod
    def constant(cls, value: Number, dim_in: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((len(multi_indices(dim_in, order)),) + value.shape)
        coeffs[0] = value
        return cls(coeffs, dim_in, order)

    @classmethod
    def from_value_and_gradient(
        cls, value: Number, gradient: np.ndarray
    ) -> "Jet":
        """値と勾配（最終軸が入力次元）から 1 階ジェットを作る"""
        gradient = np.asarray(gradient, dtype=float)
        dim_in = gradient.shape[-1]
        value = np.broadcast_to(np.asarray(value, dtype=float), gradient.shape[:-1])
        coeffs = np.empty((dim_in + 1,) + value.shape)
        coeffs[0] = value
        coeffs[1:] = np.moveaxis(gradient, -1, 0)
        return cls(coeffs, dim_in, 1)

    # --- 属性 -------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def T(self) -> "Jet":
        if self.ndim < 2:
            return self
        return Jet(np.swapaxes(self.coeffs, -1, -2), self.dim_in, self.order)

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, dim_in={self.dim_in}, order={self.order})"

    # --- 微分係数の取り出し -------------------------------------------------

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.order:
            raise OrderOutOfRange(f"multi-index {alpha} exceeds order {self.order}")
        return self.coeffs[_index_map(self.dim_in, self.order)[alpha]]

    def partial(self, *axes: int) -> np.ndarray:
        """偏微分値 ∂_{axes[0]} ∂_{axes[1]} ... f"""
        alpha = [0] * self.dim_in
        for axis in axes:
            alpha[axis] += 1
        k = _index_map(self.dim_in, self.order).get(tuple(alpha))
        if k is None:
            raise OrderOutOfRange(f"derivative {axes} exceeds order {self.order}")
        return self.coeffs[k] * _factorials(self.dim_in, self.order)[k]

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise OrderOutOfRange("gradient needs order >= 1")
        return np.moveaxis(self.coeffs[1 : self.dim_in + 1], 0, -1)

    def hessian(self) -> np.ndarray:
        n = self.dim_in
        out = np.empty(self.shape + (n, n))
        for i in range(n):
            for j in range(i, n):
                out[..., i, j] = out[..., j, i] = self.partial(i, j)
        return out

    def derivative(self, axis: int) -> "Jet":
        """∂_axis f を 1 階低いジェットとして返す"""
        if self.order < 1:
            raise OrderOutOfRange("cannot differentiate an order-0 jet")
        source, factor = _derivative_table(self.dim_in, self.order, axis)
        coeffs = self.coeffs[source] * factor.reshape((-1,) + (1,) * self.ndim)
        return Jet(coeffs, self.dim_in, self.order - 1)

    def derivatives(self) -> "Jet":
        """全方向の微分を最終軸に並べたジェット（形状 shape + (dim_in,)）"""
        return stack([self.derivative(m) for m in range(self.dim_in)], axis=-1)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        _check_order(order)
        size = len(multi_indices(self.dim_in, order))
        return Jet(self.coeffs[:size], self.dim_in, order)

    # --- 配列操作 ---------------------------------------------------------

    def __getitem__(self, index) -> "Jet":
        if not isinstance(index, tuple):
            index = (index,)
        return Jet(self.coeffs[(slice(None),) + index], self.dim_in, self.order)

    def transpose(self, *axes: int) -> "Jet":
        order = (0,) + tuple(a + 1 for a in axes)
        return Jet(np.transpose(self.coeffs, order), self.dim_in, self.order)

    def reshape(self, *shape: int) -> "Jet":
        return Jet(
            self.coeffs.reshape((self.coeffs.shape[0],) + tuple(shape)),
            self.dim_in,
            self.order,
        )

    def sum(self, axis: Optional[int] = None) -> "Jet":
        if axis is None:
            axes = tuple(range(1, self.coeffs.ndim))
        else:
            axes = axis + 1 if axis >= 0 else axis
        return Jet(self.coeffs.sum(axis=axes), self.dim_in, self.order)

    # --- 算術 -------------------------------------------------------------

    def expanded(self, ndim: int) -> np.ndarray:
        """係数軸の直後に長さ 1 の軸を挿入し、配列形状の次元を ndim にそろえる"""
        extra = ndim - self.ndim
        if extra <= 0:
            return self.coeffs
        return self.coeffs.reshape(self.coeffs.shape[:1] + (1,) * extra + self.shape)

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            a, b = _coerce(self, other)
            ndim = max(a.ndim, b.ndim)
            return Jet(a.expanded(ndim) + b.expanded(ndim), a.dim_in, a.order)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coeffs = np.broadcast_to(
            self.expanded(len(shape)), self.coeffs.shape[:1] + shape
        ).copy()
        coeffs[0] += other
        return Jet(coeffs, self.dim_in, self.order)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs, self.dim_in, self.order)

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            a, b = _coerce(self, other)
            ndim = max(a.ndim, b.ndim)
            left, right, scatter = _product_table(a.dim_in, a.order)
            prod = a.expanded(ndim)[left] * b.expanded(ndim)[right]
            return Jet(np.tensordot(scatter, prod, axes=(1, 0)), a.dim_in, a.order)
        other = np.asarray(other, dtype=float)
        return Jet(self.expanded(other.ndim) * other, self.dim_in, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        if np.any(np.abs(other) <= DIVISION_EPS):
            raise DivisionNearZero("division by a constant near zero")
        return Jet(self.expanded(other.ndim) / other, self.dim_in, self.order)

    def __rtruediv__(self, other) -> "Jet":
        return reciprocal(self) * other

    def __pow__(self, exponent: int) -> "Jet":
        if isinstance(exponent, (int, np.integer)):
            return pow_int(self, int(exponent))
        return power(self, float(exponent))

    def __matmul__(self, other) -> "Jet":
        return jet_einsum("...ij,...jk->...ik", self, other)

    def __rmatmul__(self, other) -> "Jet":
        return jet_einsum("...ij,...jk->...ik", other, self)


JetLike = Union[Jet, float, np.ndarray]


def _coerce(a: Jet, b: Jet) -> tuple[Jet, Jet]:
    if a.dim_in != b.dim_in:
        raise DimensionMismatch(f"dim_in {a.dim_in} != {b.dim_in}")
    order = min(a.order, b.order)
    return a.truncate(order), b.truncate(order)


# ---------------------------------------------------------------------------
# 構築ヘルパー
# ---------------------------------------------------------------------------


def lift(point: Sequence[float], order: int) -> list[Jet]:
    """座標ジェット: i 番目は値 point_i、1 階微分 e_i、高階 0"""
    _check_order(order)
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    size = len(multi_indices(n, order))
    jets = []
    for i in range(n):
        coeffs = np.zeros(size)
        coeffs[0] = point[i]
        if order >= 1:
            coeffs[1 + i] = 1.0
        jets.append(Jet(coeffs, n, order))
    return jets


def variables(point: Sequence[float], order: int) -> Jet:
    """座標ジェットをベクトルとしてまとめたもの"""
    return stack(lift(point, order))


def stack(items: Sequence[JetLike], axis: int = 0) -> Jet:
    """ジェット（と定数）を新しい軸で積み重ねる"""
    template = [x for x in items if isinstance(x, Jet)]
    if not template:
        raise DimensionMismatch("stack needs at least one Jet")
    dim_in = template[0].dim_in
    order = min(x.order for x in template)
    jets = [
        x.truncate(order)
        if isinstance(x, Jet)
        else Jet.constant(x, dim_in, order)
        for x in items
    ]
    shape = np.broadcast_shapes(*(j.shape for j in jets))
    size = len(multi_indices(dim_in, order))
    arrays = [np.broadcast_to(j.expanded(len(shape)), (size,) + shape) for j in jets]
    axis = axis + 1 if axis >= 0 else axis
    return Jet(np.stack(arrays, axis=axis), dim_in, order)


def as_jet(x: JetLike, like: Jet) -> Jet:
    if isinstance(x, Jet):
        return x
    return Jet.constant(x, like.dim_in, like.order)


# ---------------------------------------------------------------------------
# 縮約
# ---------------------------------------------------------------------------


def jet_einsum(spec: str, a: JetLike, b: JetLike) -> Union[Jet, np.ndarray]:
    """2 オペランドの einsum（ジェット同士は切断積で縮約）"""
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    free = next(ch for ch in string.ascii_letters if ch not in spec)
    if isinstance(a, Jet) and isinstance(b, Jet):
        a, b = _coerce(a, b)
        left, right, scatter = _product_table(a.dim_in, a.order)
        prod = np.einsum(
            f"{free}{sa},{free}{sb}->{free}{out}", a.coeffs[left], b.coeffs[right]
        )
        return Jet(np.tensordot(scatter, prod, axes=(1, 0)), a.dim_in, a.order)
    if isinstance(a, Jet):
        coeffs = np.einsum(f"{free}{sa},{sb}->{free}{out}", a.coeffs, np.asarray(b))
        return Jet(coeffs, a.dim_in, a.order)
    if isinstance(b, Jet):
        coeffs = np.einsum(f"{sa},{free}{sb}->{free}{out}", np.asarray(a), b.coeffs)
        return Jet(coeffs, b.dim_in, b.order)
    return np.einsum(spec, a, b)


def dot(a: JetLike, b: JetLike) -> JetLike:
    """最終軸のユークリッド内積"""
    return jet_einsum("...i,...i->...", a, b)


def jet_inv(a: Jet) -> Jet:
    """行列ジェットの逆行列（ノイマン級数）"""
    inv0 = np.linalg.inv(a.value)
    nilpotent = jet_einsum("...ij,...jk->...ik", inv0, a - a.value)
    term = Jet.constant(inv0, a.dim_in, a.order)
    total = term
    for _ in range(a.order):
        term = -jet_einsum("...ij,...jk->...ik", nilpotent, term)
        total = total + term
    return total


def trace(a: JetLike) -> JetLike:
    if isinstance(a, Jet):
        return Jet(np.trace(a.coeffs, axis1=-2, axis2=-1), a.dim_in, a.order)
    return np.trace(a, axis1=-2, axis2=-1)


# ---------------------------------------------------------------------------
# 初等関数
# ---------------------------------------------------------------------------


def _taylor(a: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """f(a) = Σ_k f^(k)(a₀)/k! (a − a₀)^k"""
    from math import factorial

    nilpotent = a - a.value
    result = Jet.constant(derivs[0], a.dim_in, a.order)
    term: Optional[Jet] = None
    for k in range(1, a.order + 1):
        term = nilpotent if term is None else term * nilpotent
        result = result + term * (np.asarray(derivs[k]) / factorial(k))
    return result


def _falling_powers(value: np.ndarray, p: float, order: int) -> list[np.ndarray]:
    derivs = []
    coef = 1.0
    for k in range(order + 1):
        derivs.append(coef * value ** (p - k))
        coef *= p - k
    return derivs


def exp(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return _taylor(a, [e] * (a.order + 1))


def sin(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.value), np.cos(a.value)
    return _taylor(a, [s, c, -s, -c, s][: a.order + 1])


def cos(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.value), np.cos(a.value)
    return _taylor(a, [c, -s, -c, s, c][: a.order + 1])


def sinh(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        return np.sinh(a)
    s, c = np.sinh(a.value), np.cosh(a.value)
    return _taylor(a, [s, c, s, c, s][: a.order + 1])


def cosh(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        return np.cosh(a)
    s, c = np.sinh(a.value), np.cosh(a.value)
    return _taylor(a, [c, s, c, s, c][: a.order + 1])


def log(a: JetLike) -> JetLike:
    value = a.value if isinstance(a, Jet) else np.asarray(a)
    if np.any(value <= 0):
        raise DomainError("log of a nonpositive value")
    if not isinstance(a, Jet):
        return np.log(a)
    derivs = [np.log(value)] + _falling_powers(value, -1.0, a.order - 1)
    return _taylor(a, derivs)


def power(a: JetLike, p: float) -> JetLike:
    """実数べき a^p（a > 0）"""
    value = a.value if isinstance(a, Jet) else np.asarray(a)
    if np.any(value <= 0):
        raise DomainError(f"real power {p} of a nonpositive value")
    if not isinstance(a, Jet):
        return np.power(a, p)
    return _taylor(a, _falling_powers(value, p, a.order))


def sqrt(a: JetLike) -> JetLike:
    if not isinstance(a, Jet):
        value = np.asarray(a)
        if np.any(value < 0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(a)
    return power(a, 0.5)


def reciprocal(a: JetLike) -> JetLike:
    value = a.value if isinstance(a, Jet) else np.asarray(a)
    if np.any(np.abs(value) <= DIVISION_EPS):
        raise DivisionNearZero("reciprocal of a value near zero")
    if not isinstance(a, Jet):
        return 1.0 / value
    return _taylor(a, _falling_powers(value, -1.0, a.order))


def pow_int(a: JetLike, k: int) -> JetLike:
    """整数べき（負の指数は逆数経由）"""
    if k < 0:
        return pow_int(reciprocal(a), -k)
    if not isinstance(a, Jet):
        return np.asarray(a, dtype=float) ** k
    result = Jet.constant(np.ones(a.shape), a.dim_in, a.order)
    base = a
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result


ELEMENTARY: dict[str, Callable[[JetLike], JetLike]] = {
    "sin": sin,
    "cos": cos,
    "sinh": sinh,
    "cosh": cosh,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
}


# ---------------------------------------------------------------------------
# 差分オラクル
# ---------------------------------------------------------------------------


def _central(
    fn: Callable[[np.ndarray], np.ndarray],
    point: np.ndarray,
    axes: Sequence[int],
    h: float,
) -> np.ndarray:
    if not axes:
        return np.asarray(fn(point), dtype=float)
    step = np.zeros_like(point)
    step[axes[0]] = h
    rest = axes[1:]
    forward = _central(fn, point + step, rest, h)
    backward = _central(fn, point - step, rest, h)
    return (forward - backward) / (2.0 * h)


def richardson_partial(
    fn: Callable[[np.ndarray], np.ndarray],
    point: Sequence[float],
    alpha: Sequence[int],
    h: float = 1e-2,
) -> np.ndarray:
    """中心差分 + リチャードソン外挿で ∂^α fn(point) を推定

    Args:
        fn: 点（ndarray）を受け取り配列を返す関数
        point: 評価点
        alpha: 多重指数
        h: 基本刻み幅

    Returns:
        偏微分の推定値（誤差 O(h⁴)）
    """
    point = np.asarray(point, dtype=float)
    axes = [i for i, a in enumerate(alpha) for _ in range(int(a))]
    coarse = _central(fn, point, axes, h)
    fine = _central(fn, point, axes, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def richardson_gradient(
    fn: Callable[[np.ndarray], np.ndarray],
    point: Sequence[float],
    h: float = 1e-2,
) -> np.ndarray:
    """各座標方向の 1 階微分を最終軸に並べて返す"""
    point = np.asarray(point, dtype=float)
    parts = []
    for m in range(point.shape[0]):
        alpha = [0] * point.shape[0]
        alpha[m] = 1
        parts.append(richardson_partial(fn, point, alpha, h))
    return np.stack(parts, axis=-1)
