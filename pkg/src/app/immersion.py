"""
パラメータ付き超曲面

成分関数（座標ジェット → 成分ジェット）と定義域の箱・除外領域・向きをまとめ、
各点のジェットを返すオラクルとして振る舞います。
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from src.app import jets
from src.app.errors import DimensionMismatch, PointOutsideDomain
from src.app.jets import Jet, JetLike

BOX_SLACK = 1e-12
DEFAULT_GRID_POINTS = 4
DEFAULT_MARGIN = 0.05

logger = logging.getLogger(__name__)

ComponentFn = Callable[[Sequence[Jet]], Sequence[JetLike]]


@dataclass(frozen=True)
class Exclusion:
    """predicate(point) < threshold となる点を定義域から除外する"""

    label: str
    predicate: Callable[[np.ndarray], float]
    threshold: float

    def excludes(self, point: np.ndarray) -> bool:
        return float(self.predicate(point)) < self.threshold


@dataclass(frozen=True)
class Immersion:
    """閉じた式で与えられたはめ込み f: box ⊂ ℝⁿ → ℝᵐ

    sphere が真のとき像は単位球面 S^{n+1} ⊂ ℝ^{n+2} に含まれる球面内超曲面、
    偽のとき ℝⁿ⁺¹ の超曲面として扱う。orientation は法線の向きに掛かる符号。
    """

    name: str
    dim_in: int
    dim_out: int
    box: tuple[tuple[float, float], ...]
    components: ComponentFn
    exclusions: tuple[Exclusion, ...] = ()
    sphere: bool = False
    orientation: int = 1

    def __post_init__(self) -> None:
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != self.dim_in:
            raise DimensionMismatch(
                f"{self.name}: box has {len(box)} intervals for dim_in={self.dim_in}"
            )
        if any(hi <= lo for lo, hi in box):
            raise DimensionMismatch(f"{self.name}: degenerate domain box {box}")
        if self.orientation not in (1, -1):
            raise DimensionMismatch(f"orientation must be ±1, got {self.orientation}")
        object.__setattr__(self, "box", box)

    # --- 定義域 -----------------------------------------------------------

    @property
    def is_hypersurface(self) -> bool:
        return self.dim_out == self.dim_in + (2 if self.sphere else 1)

    @property
    def base_point(self) -> np.ndarray:
        return np.array([(lo + hi) / 2.0 for lo, hi in self.box])

    def contains(self, point: Sequence[float]) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim_in,):
            return False
        inside = all(
            lo - BOX_SLACK <= x <= hi + BOX_SLACK
            for x, (lo, hi) in zip(point, self.box)
        )
        return inside and not any(z.excludes(point) for z in self.exclusions)

    def check_point(self, point: Sequence[float]) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        if not self.contains(point):
            raise PointOutsideDomain(
                f"{self.name}: point {point.tolist()} outside domain"
            )
        return point

    def grid(
        self, points: int = DEFAULT_GRID_POINTS, margin: float = DEFAULT_MARGIN
    ) -> np.ndarray:
        """境界から margin だけ内側の一様格子（除外領域の点は捨てる）"""
        axes = []
        for lo, hi in self.box:
            width = hi - lo
            axes.append(np.linspace(lo + margin * width, hi - margin * width, points))
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        samples = mesh.reshape(-1, self.dim_in)
        kept = np.array([p for p in samples if self.contains(p)])
        if len(kept) < len(samples):
            logger.warning(
                "%s: %d grid points fall in excluded zones",
                self.name,
                len(samples) - len(kept),
            )
        return kept

    # --- 評価 -------------------------------------------------------------

    def jet(self, point: Sequence[float], order: int = 4, check: bool = True) -> Jet:
        """各成分のジェットを形状 (dim_out,) のベクトルジェットで返す"""
        point = self.check_point(point) if check else np.asarray(point, dtype=float)
        coords = jets.lift(point, order)
        values = list(self.components(coords))
        if len(values) != self.dim_out:
            raise DimensionMismatch(
                f"{self.name}: expected {self.dim_out} components, got {len(values)}"
            )
        return jets.stack([jets.as_jet(v, coords[0]) for v in values])

    def evaluate(self, point: Sequence[float], check: bool = True) -> np.ndarray:
        return self.jet(point, order=0, check=check).value

    # --- 派生 -------------------------------------------------------------

    def with_orientation(self, orientation: int) -> "Immersion":
        return replace(self, orientation=orientation)

    def flipped(self) -> "Immersion":
        return replace(self, orientation=-self.orientation)

    def compose(
        self,
        outer: Callable[[Jet], Sequence[JetLike]],
        name: Optional[str] = None,
        dim_out: Optional[int] = None,
        sphere: bool = False,
    ) -> "Immersion":
        """像側の写像 outer を合成した新しいはめ込み"""
        inner = self.components

        def components(coords: Sequence[Jet]) -> Sequence[JetLike]:
            values = [jets.as_jet(v, coords[0]) for v in inner(coords)]
            return outer(jets.stack(values))

        return replace(
            self,
            name=name or f"{self.name}∘",
            dim_out=dim_out if dim_out is not None else self.dim_out,
            components=components,
            sphere=sphere,
            orientation=1,
        )
