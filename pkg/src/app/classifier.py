"""
固有値の組 (a, b) の分類

可換な 2 つの等径テンソル（B 型と A 型）の定数固有値の組から、同じ傾きで並ぶ組の集合
（アンカーを通る直線族）を作り、次のいずれかを証明書付きで返します。

- LinearlyDependent: すべての組が直線 a = λb + μ 上にあり λ² − 2μ < 0
- Reducible: b の値 b̄ と a の値 ā を持つブロックがあり、残りの組が a = −b̄·b − ā 上
  にあって b̄² + 2ā < 0
- Inconsistent: 実際のデータでは起こり得ない配置（破れた関係のタグと該当する組）

組の集合はテキスト（1 行に "a b 重複度"、# 以降はコメント）からも読み込めます。
"""

import logging
import math
from typing import Iterable, Optional, Sequence, Union

import attrs
import numpy as np

from src.app import exprdsl
from src.app.checks import SuiteReport, strict_upper
from src.app.errors import (
    CloudParseError,
    DivisionNearZero,
    DslError,
    InvalidCloud,
    TolAmbiguous,
)
from src.utils.logger_config import ErrorCode, get_logger

TOL_GROUP = 1e-8
SLOPE_REL_TOL = 1e-7
AMBIGUITY_FACTOR = 10.0
CHECK_TOL = 1e-6

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# 組と集合
# ---------------------------------------------------------------------------


@attrs.frozen(order=True)
class EigenPair:
    # 並び順は (b, a)
    b: float = attrs.field(converter=float)
    a: float = attrs.field(converter=float)
    multiplicity: int = attrs.field(default=1, converter=int, order=False)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "multiplicity": self.multiplicity}


def _merge(pairs: Iterable[EigenPair], tol: float) -> tuple[EigenPair, ...]:
    merged: list[EigenPair] = []
    for pair in sorted(pairs):
        for k, kept in enumerate(merged):
            if abs(kept.a - pair.a) < tol and abs(kept.b - pair.b) < tol:
                merged[k] = attrs.evolve(
                    kept, multiplicity=kept.multiplicity + pair.multiplicity
                )
                break
        else:
            merged.append(pair)
    return tuple(sorted(merged))


@attrs.frozen
class PairCloud:
    """相異なる (a, b) の組と重複度（b, a の昇順に正規化）"""

    pairs: tuple[EigenPair, ...]
    tol_group: float = TOL_GROUP

    def __attrs_post_init__(self) -> None:
        for pair in self.pairs:
            if pair.multiplicity < 1:
                raise InvalidCloud(f"multiplicity must be positive: {pair}")
            if not (math.isfinite(pair.a) and math.isfinite(pair.b)):
                raise InvalidCloud(f"non-finite pair: {pair}")
        object.__setattr__(self, "pairs", _merge(self.pairs, self.tol_group))
        if self.n < 3:
            raise InvalidCloud(f"total multiplicity {self.n} < 3")

    @classmethod
    def from_pairs(
        cls,
        rows: Iterable[Sequence[float]],
        tol_group: float = TOL_GROUP,
    ) -> "PairCloud":
        """(a, b) または (a, b, 重複度) の並びから作る"""
        pairs = []
        for row in rows:
            row = list(row)
            mult = int(row[2]) if len(row) > 2 else 1
            pairs.append(EigenPair(b=row[1], a=row[0], multiplicity=mult))
        return cls(tuple(pairs), tol_group)

    @property
    def n(self) -> int:
        return sum(p.multiplicity for p in self.pairs)

    @property
    def s(self) -> int:
        return len(self.pairs)

    def b_groups(self) -> list[list[EigenPair]]:
        """b の値でまとめた組（b の昇順）"""
        groups: list[list[EigenPair]] = []
        for pair in self.pairs:
            if groups and abs(groups[-1][0].b - pair.b) < self.tol_group:
                groups[-1].append(pair)
            else:
                groups.append([pair])
        return groups

    @property
    def r(self) -> int:
        return len(self.b_groups())

    def slope_tolerance(self) -> float:
        """|ε − ε′|·(b の幅) < 1e−7·(1 + max|a|) を等しい傾きとみなす"""
        span = max(p.b for p in self.pairs) - min(p.b for p in self.pairs)
        scale = 1.0 + max(abs(p.a) for p in self.pairs)
        return SLOPE_REL_TOL * scale / max(span, self.tol_group)

    def to_dict(self) -> dict:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "n": self.n,
            "r": self.r,
            "s": self.s,
        }


@attrs.frozen
class LineSet:
    """アンカーを通り傾き slope を持つ組の集合（slope = inf は b が等しい組）"""

    anchor: EigenPair
    slope: float
    members: tuple[EigenPair, ...]

    @property
    def pairs(self) -> tuple[EigenPair, ...]:
        return tuple(sorted((self.anchor,) + self.members))

    @property
    def size(self) -> int:
        return len(self.members) + 1

    @property
    def intercept(self) -> float:
        """a = εb + d の d（傾き無限大では nan）"""
        if math.isinf(self.slope):
            return float("nan")
        return self.anchor.a - self.slope * self.anchor.b

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor.to_dict(),
            "slope": None if math.isinf(self.slope) else self.slope,
            "intercept": None if math.isinf(self.slope) else self.intercept,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def build_line_sets(cloud: PairCloud, anchor_index: int) -> list[LineSet]:
    """アンカー以外の組を傾きごとに分け、傾きの昇順（無限大は最後）で返す

    傾き無限大の集合の大きさはここでは制限せず、necessary_conditions が検査します。
    """
    anchor = cloud.pairs[anchor_index]
    slope_tol = cloud.slope_tolerance()
    slopes: list[tuple[float, EigenPair]] = []
    for k, pair in enumerate(cloud.pairs):
        if k == anchor_index:
            continue
        db = anchor.b - pair.b
        slope = math.inf if abs(db) < cloud.tol_group else (anchor.a - pair.a) / db
        slopes.append((slope, pair))
    slopes.sort(key=lambda item: (item[0], item[1]))

    sets: list[tuple[float, list[EigenPair]]] = []
    for slope, pair in slopes:
        if sets:
            last = sets[-1][0]
            gap = 0.0 if math.isinf(slope) and math.isinf(last) else abs(slope - last)
            if gap < slope_tol:
                sets[-1][1].append(pair)
                continue
            if gap < AMBIGUITY_FACTOR * slope_tol:
                get_logger().warning(
                    "Classifier",
                    f"傾き {last:.12g} と {slope:.12g} の区別が許容値の近くです",
                    error_code=ErrorCode.TOL_AMBIGUOUS,
                )
                raise TolAmbiguous(
                    f"slopes {last!r} and {slope!r} differ by {gap:.3e} "
                    f"(tolerance {slope_tol:.3e})"
                )
        sets.append((slope, [pair]))
    return [
        LineSet(anchor=anchor, slope=float(slope), members=tuple(members))
        for slope, members in sets
    ]


# ---------------------------------------------------------------------------
# 結果
# ---------------------------------------------------------------------------


def _on_line(pair: EigenPair, slope: float, intercept: float) -> float:
    return abs(pair.a - slope * pair.b - intercept)


@attrs.frozen
class LinearlyDependent:
    lambda_: float
    mu: float
    gate: float

    kind = "LinearlyDependent"

    def verify(self, cloud: PairCloud, tol: float = CHECK_TOL) -> bool:
        on_line = all(_on_line(p, self.lambda_, self.mu) < tol for p in cloud.pairs)
        return on_line and (cloud.r <= 2 or self.gate < 0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lambda_,
            "mu": self.mu,
            "slope_intercept_gate": self.gate,
        }


@attrs.frozen
class Reducible:
    b_split: float
    a_split: float
    line: tuple[EigenPair, ...]

    kind = "Reducible"

    @property
    def gate(self) -> float:
        """b̄² + 2ā（負であること）"""
        return self.b_split**2 + 2.0 * self.a_split

    def verify(self, cloud: PairCloud, tol: float = CHECK_TOL) -> bool:
        on_line = all(
            _on_line(p, -self.b_split, -self.a_split) < tol for p in self.line
        )
        return on_line and self.gate < 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "b_split": self.b_split,
            "a_split": self.a_split,
            "split_gate": self.gate,
            "line": [p.to_dict() for p in self.line],
        }


@attrs.frozen
class Inconsistent:
    witness: str
    pairs: tuple[EigenPair, ...]
    detail: str = ""

    kind = "Inconsistent"

    def verify(self, cloud: PairCloud, tol: float = CHECK_TOL) -> bool:
        return all(p in cloud.pairs for p in self.pairs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "witness": self.witness,
            "detail": self.detail,
            "pairs": [p.to_dict() for p in self.pairs],
        }


Outcome = Union[LinearlyDependent, Reducible, Inconsistent]


# ---------------------------------------------------------------------------
# 分類
# ---------------------------------------------------------------------------


def _split_from(
    cloud: PairCloud, b_split: float, a_split: float, tol: float
) -> Optional[Reducible]:
    """(b̄, ā) ブロック以外の組がすべて a = −b̄·b − ā 上にあれば Reducible"""
    line = tuple(
        p
        for p in cloud.pairs
        if not (
            abs(p.b - b_split) < cloud.tol_group
            and abs(p.a - a_split) < cloud.tol_group
        )
    )
    outcome = Reducible(b_split=b_split, a_split=a_split, line=line)
    return outcome if outcome.verify(cloud, tol) else None


def _classify_split_block(cloud: PairCloud, tol: float) -> Outcome:
    """ある b の値に 2 つの a が乗る場合"""
    split_groups = [g for g in cloud.b_groups() if len(g) > 1]
    crowded = [g for g in split_groups if len(g) > 2]
    if crowded:
        return Inconsistent(
            "ble2",
            tuple(crowded[0]),
            "more than two distinct a values share one b",
        )
    first, second = split_groups[0]
    b_bar = first.b
    residual = abs(b_bar * b_bar + first.a + second.a)
    if residual >= tol:
        return Inconsistent(
            "ble2",
            (first, second),
            f"|b̄² + a + ā| = {residual:.3e}",
        )
    a_min = min(first.a, second.a)
    outcome = _split_from(cloud, b_bar, a_min, tol)
    if outcome is None:
        return Inconsistent(
            "case1",
            tuple(cloud.pairs),
            f"pairs off the line a = −({b_bar:.12g})·b − ({a_min:.12g})",
        )
    return outcome


def _linear(cloud: PairCloud, line: LineSet) -> LinearlyDependent:
    slope = line.slope
    return LinearlyDependent(
        lambda_=slope, mu=line.intercept, gate=slope * slope - 2.0 * line.intercept
    )


def classify(cloud: PairCloud, tol: float = CHECK_TOL) -> Outcome:
    """組の集合を LinearlyDependent / Reducible / Inconsistent に分類する

    Args:
        cloud: 固有値の組
        tol: 直線・ブロック関係の許容値

    Returns:
        証明書を持つ分類結果
    """
    if cloud.s > cloud.r:
        outcome = _classify_split_block(cloud, tol)
        logger.debug("split-block cloud classified as %s", outcome.kind)
        return outcome

    pairs = cloud.pairs
    if cloud.r <= 2:
        if cloud.r == 1:
            return LinearlyDependent(lambda_=0.0, mu=pairs[0].a, gate=-2.0 * pairs[0].a)
        line = build_line_sets(cloud, 0)[0]
        return _linear(cloud, line)

    # b が最小の組をアンカーにする
    sets = build_line_sets(cloud, 0)
    lowest = sets[0]
    if lowest.size == cloud.s:
        outcome = _linear(cloud, lowest)
        if outcome.gate >= 0:
            return Inconsistent(
                "le4",
                lowest.pairs,
                f"ε² − 2d = {outcome.gate:.6g} is not negative",
            )
        return outcome
    if lowest.size == 2:
        # 分割ブロックは最小傾きの相手側の組
        partner = lowest.members[0]
        outcome = _split_from(cloud, partner.b, partner.a, tol)
        if outcome is not None:
            return outcome
        return Inconsistent(
            "case3",
            lowest.pairs,
            f"pairs off the line a = −({partner.b:.12g})·b − ({partner.a:.12g})",
        )
    return Inconsistent(
        "case2",
        lowest.pairs,
        f"{lowest.size} of {cloud.s} pairs share the minimal slope",
    )


# ---------------------------------------------------------------------------
# 必要条件
# ---------------------------------------------------------------------------


def _unique_line_sets(cloud: PairCloud) -> list[LineSet]:
    seen: set[tuple[EigenPair, ...]] = set()
    unique = []
    for i in range(cloud.s):
        for line in build_line_sets(cloud, i):
            key = line.pairs
            if key not in seen:
                seen.add(key)
                unique.append(line)
    return unique


def necessary_conditions(cloud: PairCloud, tol: float = CHECK_TOL) -> SuiteReport:
    """直線族ごとの必要条件を評価する

    2 組の集合: b_ib_j + a_i + a_j = 0。傾き無限大の集合は高々 2 組。
    3 組以上の集合（b の昇順）: 隣接する組の b b′ + a + a′ ≥ 0、両端の組で ≤ 0、
    両端の b + ε の符号（負・正）、ε² − 2d < 0。
    """
    report = SuiteReport(suite="necessary-conditions")
    lines = _unique_line_sets(cloud)
    for line in lines:
        ps = line.pairs
        label = ",".join(f"({p.a:.6g},{p.b:.6g})" for p in ps)
        if math.isinf(line.slope):
            excess = float(max(0, line.size - 2))
            report.add(f"vertical-line {label}", "le2", excess, 0.5)
        if line.size == 2:
            p, q = ps
            report.add(f"two-pair-line {label}", "le2", abs(p.b * q.b + p.a + q.a), tol)
        if line.size == 2 or math.isinf(line.slope):
            continue
        eps = line.slope
        adjacent = min(p.b * q.b + p.a + q.a for p, q in zip(ps[:-1], ps[1:]))
        first, last = ps[0], ps[-1]
        extreme = first.b * last.b + first.a + last.a
        report.add(
            f"consecutive-products {label}",
            "le31",
            max(0.0, -adjacent),
            tol,
        )
        report.add(f"extreme-pair {label}", "le31", max(0.0, extreme), tol)
        report.add(
            f"line-ends {label}",
            "le5",
            strict_upper(max(first.b + eps, -(last.b + eps)), 0.0, tol),
            tol,
        )
        report.add(
            f"slope-intercept {label}",
            "le4",
            strict_upper(eps * eps - 2.0 * line.intercept, 0.0, tol),
            tol,
        )
    report.summary.update({"line_sets": len(lines), "r": cloud.r, "s": cloud.s})
    return report


# ---------------------------------------------------------------------------
# 入出力
# ---------------------------------------------------------------------------


def _number(text: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return float(exprdsl.evaluate(exprdsl.parse_expression(text, 0), []))
    except (DslError, DivisionNearZero, IndexError) as e:
        raise CloudParseError(f"line {line_no}: cannot read {text!r}: {e}") from None


def parse_cloud(text: str, tol_group: float = TOL_GROUP) -> PairCloud:
    """1 行に "a b 重複度"（各欄は数値または定数式、# 以降はコメント）"""
    pairs = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        fields = content.split()
        if len(fields) != 3:
            raise CloudParseError(
                f"line {line_no}: expected 'a b multiplicity', got {len(fields)} fields"
            )
        a = _number(fields[0], line_no)
        b = _number(fields[1], line_no)
        if not fields[2].isdigit() or int(fields[2]) < 1:
            raise CloudParseError(
                f"line {line_no}: multiplicity must be a positive integer, "
                f"got {fields[2]!r}"
            )
        pairs.append(EigenPair(b=b, a=a, multiplicity=int(fields[2])))
    if not pairs:
        raise CloudParseError("no pairs found")
    return PairCloud(tuple(pairs), tol_group)


def load_cloud(path: str, tol_group: float = TOL_GROUP) -> PairCloud:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        get_logger().error(
            "Classifier",
            f"組のファイルを読めません: {path}",
            error_code=ErrorCode.FILE_IO_ERROR,
            exception=e,
        )
        raise CloudParseError(f"cannot read {path}: {e}") from e
    return parse_cloud(text, tol_group)


def cloud_from_spectrum(pairs: np.ndarray, tol_group: float = TOL_GROUP) -> PairCloud:
    """点ごとの (a_i, b_i) 行（重複度 1）をまとめた組の集合"""
    return PairCloud.from_pairs(np.asarray(pairs, dtype=float).tolist(), tol_group)
