"""
例となる超曲面の族

各族は閉じた式によるジェット生成関数（はめ込み）と、同じ式を DSL で書き直した
ソーステキスト、および解析的な参照値を FamilyDescriptor にまとめて返します。
球面内の超曲面は ℝ^{n+2} への成分で表し、sphere フラグを立てます。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from src.app import exprdsl, jets
from src.app.errors import (
    BadDimensions,
    BadKappa,
    DegenerateAngle,
    FamilyParameterError,
    PoleProximity,
    UnknownFamily,
)
from src.app.immersion import Exclusion, Immersion
from src.app.jets import Jet, JetLike
from src.utils.logger_config import ErrorCode, get_logger

ANGLE_BOX = (0.4, 1.2)
LINE_BOX = (-0.5, 0.5)
FLAT_BOX = (0.1, 0.5)
HYPERBOLIC_BOX = (0.5, 2.0)
HYPERBOLIC_CAP = 3.0
ANGLE_GUARD = 1e-3
POLE_EPS = 1e-3
DEFAULT_T_RANGE = (1.0, 2.0)

logger = logging.getLogger(__name__)

Terms = Callable[[Sequence[str]], list[str]]


@dataclass(frozen=True)
class FamilyDescriptor:
    """族のタグ・パラメータ・はめ込み・DSL 表現・参照値"""

    tag: str
    params: dict[str, Any]
    immersion: Immersion
    terms: Terms = field(repr=False, compare=False)
    reference: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.immersion.dim_in

    def dsl_source(self) -> str:
        """同じはめ込みを DSL で書いたソーステキスト"""
        imm = self.immersion
        names = [f"u{i + 1}" for i in range(imm.dim_in)]
        box = " x ".join(f"[{lo!r}, {hi!r}]" for lo, hi in imm.box)
        header = f"n={imm.dim_in}{' sphere' if imm.sphere else ''} on {box}"
        for zone in self.params.get("_dsl_exclusions", ()):
            header += f" exclude {zone(names)}"
        body = "".join(f";\n  {term}" for term in self.terms(names))
        return f"# {self.tag}\n{header}{body}\n"

    def dsl_immersion(self) -> Immersion:
        tree = exprdsl.parse(self.dsl_source())
        return exprdsl.to_immersion(tree, name=f"{self.tag}(dsl)")

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.tag,
            "params": {k: v for k, v in self.params.items() if not k.startswith("_")},
            "dim_in": self.immersion.dim_in,
            "dim_out": self.immersion.dim_out,
            "sphere": self.immersion.sphere,
            "box": [list(b) for b in self.immersion.box],
            "exclusions": [z.label for z in self.immersion.exclusions],
            "reference": self.reference,
        }


# ---------------------------------------------------------------------------
# 共通部品
# ---------------------------------------------------------------------------


def _lit(x: float) -> str:
    return f"({float(x)!r})"


def _sphere_point(angles: Sequence[JetLike]) -> list[JetLike]:
    """S^m の角度座標 (cos a1, sin a1 cos a2, …, sin a1 ⋯ sin a_m)"""
    if not angles:
        return [1.0]
    out: list[JetLike] = []
    prefix: Optional[JetLike] = None
    for a in angles:
        out.append(jets.cos(a) if prefix is None else prefix * jets.cos(a))
        prefix = jets.sin(a) if prefix is None else prefix * jets.sin(a)
    out.append(prefix)
    return out


def _sphere_terms(angles: Sequence[str]) -> list[str]:
    if not angles:
        return ["1"]
    out = []
    prefix: list[str] = []
    for a in angles:
        out.append("*".join(prefix + [f"cos({a})"]))
        prefix.append(f"sin({a})")
    out.append("*".join(prefix))
    return out


def _fail(exc: type, message: str) -> Exception:
    get_logger().warning(
        "Families", message, error_code=ErrorCode.FAMILY_PARAMETER_ERROR
    )
    return exc(message)


# ---------------------------------------------------------------------------
# 球面内の超曲面
# ---------------------------------------------------------------------------


def clifford_moebius_pairs(
    p: int, q: int, theta: float
) -> list[tuple[float, float, int]]:
    """S^p(cos θ)×S^q(sin θ) のメビウス (a, b, 重複度)（b の符号は向きに依存）"""
    n = p + q
    k = [math.tan(theta)] * p + [-1.0 / math.tan(theta)] * q
    H = sum(k) / n
    rho2 = n / (n - 1.0) * sum((x - H) ** 2 for x in k)
    rho = math.sqrt(rho2)
    pairs = {}
    for x in k:
        key = (
            round((H * x + 0.5 * (1.0 - H * H)) / rho2, 14),
            round((x - H) / rho, 14),
        )
        pairs[key] = pairs.get(key, 0) + 1
    return [(a, b, m) for (a, b), m in sorted(pairs.items(), key=lambda kv: kv[0][1])]


def make_clifford_torus(
    p: int = 1, q: int = 1, theta: float = math.pi / 4, perturbation: float = 0.0
) -> FamilyDescriptor:
    """S^p(cos θ)×S^q(sin θ) ⊂ S^{p+q+1}

    perturbation ≠ 0 では θ を θ + ε sin(u1) cos(u_{p+1}) に置き換え、
    等径でない球面内超曲面にする。
    """
    if p < 1 or q < 1:
        raise _fail(BadDimensions, f"Clifford torus needs p, q >= 1, got ({p}, {q})")
    if not ANGLE_GUARD < theta < math.pi / 2 - ANGLE_GUARD:
        raise _fail(DegenerateAngle, f"θ = {theta!r} outside (0, π/2)")
    n = p + q

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        th: JetLike = theta
        if perturbation:
            th = theta + perturbation * jets.sin(coords[0]) * jets.cos(coords[p])
        first = _sphere_point(coords[:p])
        second = _sphere_point(coords[p:])
        c, s = jets.cos(th), jets.sin(th)
        return [c * x for x in first] + [s * z for z in second]

    def terms(names: Sequence[str]) -> list[str]:
        th = _lit(theta)
        if perturbation:
            wobble = f"{_lit(perturbation)}*sin({names[0]})*cos({names[p]})"
            th = f"({_lit(theta)} + {wobble})"
        return [f"cos({th})*{x}" for x in _sphere_terms(names[:p])] + [
            f"sin({th})*{z}" for z in _sphere_terms(names[p:])
        ]

    imm = Immersion(
        name=f"clifford({p},{q})",
        dim_in=n,
        dim_out=n + 2,
        box=(ANGLE_BOX,) * n,
        components=components,
        sphere=True,
    )
    reference: dict[str, Any] = {"isoparametric": perturbation == 0.0}
    if perturbation == 0.0:
        reference["principal_curvatures"] = sorted(
            [math.tan(theta)] * p + [-1.0 / math.tan(theta)] * q
        )
        pairs = clifford_moebius_pairs(p, q, theta)
        reference["moebius_pairs"] = [list(x) for x in pairs]
    return FamilyDescriptor(
        tag="clifford-torus",
        params={"p": p, "q": q, "theta": theta, "perturbation": perturbation},
        immersion=imm,
        terms=terms,
        reference=reference,
    )


def make_sphere(n: int = 2, radius: float = 1.0) -> FamilyDescriptor:
    """半径 radius の球面 Sⁿ ⊂ ℝⁿ⁺¹（臍点の対照）"""
    desc = make_ellipsoid([radius] * (n + 1))
    return replace(
        desc,
        tag="sphere",
        params={"n": n, "radius": radius},
        reference={"umbilic": True},
    )


# ---------------------------------------------------------------------------
# ℝⁿ⁺¹ の超曲面
# ---------------------------------------------------------------------------


def make_cone(
    u: FamilyDescriptor, n: int, t_range: Sequence[float] = DEFAULT_T_RANGE
) -> FamilyDescriptor:
    """球面内超曲面 u: M^k → S^{k+1} 上の錐 f(t, y, p) = (y, t·u(p))

    座標の並びは (t, y_1, …, y_{n−k−1}, p_1, …, p_k)。
    """
    sph = u.immersion
    k = sph.dim_in
    if not sph.sphere:
        raise _fail(BadDimensions, f"{sph.name} is not a hypersurface of a sphere")
    lines = n - k - 1
    if lines < 0:
        raise _fail(BadDimensions, f"cone needs n - k - 1 >= 0, got n={n}, k={k}")
    t_lo, t_hi = (float(t) for t in t_range)
    if not 0.0 < t_lo < t_hi:
        raise _fail(BadDimensions, f"t_range must lie in (0, ∞): {tuple(t_range)}")

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        t = coords[0]
        ys = list(coords[1 : 1 + lines])
        return ys + [t * c for c in sph.components(coords[1 + lines :])]

    def terms(names: Sequence[str]) -> list[str]:
        t = names[0]
        return list(names[1 : 1 + lines]) + [
            f"{t}*({c})" for c in u.terms(names[1 + lines :])
        ]

    imm = Immersion(
        name=f"cone[{sph.name}]",
        dim_in=n,
        dim_out=n + 1,
        box=((t_lo, t_hi),) + (LINE_BOX,) * lines + sph.box,
        components=components,
    )
    reference: dict[str, Any] = {
        "moebius_isoparametric": u.reference.get("isoparametric")
    }
    up = u.params
    if (
        (up.get("p"), up.get("q")) == (1, 1)
        and abs(up.get("theta", 0.0) - math.pi / 4) < 1e-15
        and not up.get("perturbation")
    ):
        rho0 = math.sqrt(2.0 * n / (n - 1.0))
        reference.update(
            {
                "lambda_pattern": "0 (x{}), ±1/t".format(n - 2),
                "b_spectrum": sorted([0.0] * (n - 2) + [-1.0 / rho0, 1.0 / rho0]),
                "moebius_pairs": [
                    [1.0 / (2 * rho0**2), -1.0 / rho0, 1],
                    [-1.0 / (2 * rho0**2), 0.0, n - 2],
                    [1.0 / (2 * rho0**2), 1.0 / rho0, 1],
                ],
                "rho_times_t": rho0,
                "K": -1.0 / rho0**2,
            }
        )
    return FamilyDescriptor(
        tag="cone",
        params={"n": n, "k": k, "t_range": [t_lo, t_hi], "base": u.to_dict()["params"]},
        immersion=imm,
        terms=terms,
        reference=reference,
    )


def make_stereographic_image(
    spherical: FamilyDescriptor, eps_pole: float = POLE_EPS
) -> FamilyDescriptor:
    """σ(x, x_{n+2}) = x / (1 − x_{n+2}) による ℝⁿ⁺¹ への像"""
    sph = spherical.immersion
    if not sph.sphere:
        raise _fail(BadDimensions, f"{sph.name} is not a hypersurface of a sphere")
    samples = sph.grid(points=5, margin=0.0)
    gap = min(1.0 - float(sph.evaluate(p)[-1]) for p in samples)
    if gap < eps_pole:
        raise _fail(
            PoleProximity,
            f"{sph.name}: patch comes within {gap:.2e} of the projection pole",
        )
    last = sph.dim_out - 1

    def outer(f: Jet) -> list[JetLike]:
        inv = jets.reciprocal(1.0 - f[last])
        return [f[i] * inv for i in range(last)]

    def terms(names: Sequence[str]) -> list[str]:
        comps = spherical.terms(names)
        return [f"({c})/(1 - ({comps[-1]}))" for c in comps[:-1]]

    def pole_zone(names: Sequence[str]) -> str:
        return f"1 - ({spherical.terms(names)[-1]}) < {eps_pole!r}"

    imm = sph.compose(
        outer, name=f"σ∘{sph.name}", dim_out=sph.dim_out - 1, sphere=False
    )
    pole = Exclusion(
        label="pole",
        predicate=lambda p: 1.0 - float(sph.evaluate(p, check=False)[-1]),
        threshold=eps_pole,
    )
    imm = replace(imm, exclusions=imm.exclusions + (pole,))
    params = dict(spherical.params)
    params["_dsl_exclusions"] = (pole_zone,)
    params["eps_pole"] = eps_pole
    reference = {
        key: spherical.reference[key]
        for key in ("isoparametric", "moebius_pairs")
        if key in spherical.reference
    }
    return FamilyDescriptor(
        tag=f"stereographic-{spherical.tag}",
        params=params,
        immersion=imm,
        terms=terms,
        reference=reference,
    )


def make_cyclide(
    k: int = 1, n: int = 3, s_range: Sequence[float] = HYPERBOLIC_BOX
) -> FamilyDescriptor:
    """x(u, v, w) = ((u/w)(1 + w), v/w)、u ∈ S^k、(v, w) = (sinh s·ω, cosh s) ∈ H^{n−k}

    座標の並びは (S^k の角度 k 個, s, S^{n−k−1} の角度)。
    """
    if not 1 <= k <= n - 1:
        raise _fail(BadDimensions, f"cyclide needs 1 <= k <= n - 1, got k={k}, n={n}")
    s_lo, s_hi = (float(s) for s in s_range)
    if not 0.0 < s_lo < s_hi <= HYPERBOLIC_CAP:
        raise _fail(
            BadDimensions,
            f"s_range must lie in (0, {HYPERBOLIC_CAP}]: {tuple(s_range)}",
        )
    m = n - k - 1

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        u = _sphere_point(coords[:k])
        s = coords[k]
        omega = _sphere_point(coords[k + 1 :]) if m > 0 else [1.0]
        w = jets.cosh(s)
        inv_w = jets.reciprocal(w)
        scale = (1.0 + w) * inv_w
        sh = jets.sinh(s) * inv_w
        return [scale * x for x in u] + [sh * o for o in omega]

    def terms(names: Sequence[str]) -> list[str]:
        u = _sphere_terms(names[:k])
        s = names[k]
        omega = _sphere_terms(names[k + 1 :]) if m > 0 else ["1"]
        scale = f"((1 + cosh({s}))/cosh({s}))"
        sh = f"(sinh({s})/cosh({s}))"
        return [f"{scale}*{x}" for x in u] + [f"{sh}*{o}" for o in omega]

    imm = Immersion(
        name=f"cyclide({k},{n})",
        dim_in=n,
        dim_out=n + 1,
        box=(ANGLE_BOX,) * k + ((s_lo, s_hi),) + (ANGLE_BOX,) * m,
        components=components,
    )
    return FamilyDescriptor(
        tag="cyclide",
        params={"k": k, "n": n, "s_range": [s_lo, s_hi]},
        immersion=imm,
        terms=terms,
        reference={
            "laguerre_isoparametric": True,
            "laguerre_groups": 2,
            "parallel_B": True,
        },
    )


def make_flat_laguerre(
    multiplicities: Sequence[int] = (1, 1, 1), kappas: Sequence[float] = (1.0, 2.0, 3.0)
) -> FamilyDescriptor:
    """x(u) = (φ, ((1 + φκ₁)u₁, …, (1 + φκ_s)u_s))

    φ = Σκ_i|u_i|² / (Σκ_i²|u_i|² + 1)、u_i ∈ ℝ^{m_i}。
    """
    ms = [int(m) for m in multiplicities]
    ks = [float(x) for x in kappas]
    if len(ms) != len(ks) or not ms or any(m < 1 for m in ms):
        raise _fail(BadDimensions, f"multiplicities {ms} do not match constants {ks}")
    if any(x == 0.0 for x in ks) or len(set(ks)) != len(ks):
        raise _fail(BadKappa, f"constants must be nonzero and pairwise distinct: {ks}")
    n = sum(ms)
    blocks = []
    start = 0
    for m in ms:
        blocks.append(list(range(start, start + m)))
        start += m

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        sq = [sum(coords[i] * coords[i] for i in block) for block in blocks]
        num = sum(kap * s for kap, s in zip(ks, sq))
        den = sum(kap * kap * s for kap, s in zip(ks, sq)) + 1.0
        phi = num * jets.reciprocal(den)
        out: list[JetLike] = [phi]
        for kap, block in zip(ks, blocks):
            factor = 1.0 + phi * kap
            out.extend(factor * coords[i] for i in block)
        return out

    def terms(names: Sequence[str]) -> list[str]:
        sq = [
            "(" + " + ".join(f"{names[i]}^2" for i in block) + ")" for block in blocks
        ]
        num = " + ".join(f"{_lit(kap)}*{s}" for kap, s in zip(ks, sq))
        den = " + ".join(f"{_lit(kap * kap)}*{s}" for kap, s in zip(ks, sq)) + " + 1"
        phi = f"(({num})/({den}))"
        out = [phi]
        for kap, block in zip(ks, blocks):
            out.extend(f"(1 + {phi}*{_lit(kap)})*{names[i]}" for i in block)
        return out

    imm = Immersion(
        name=f"flat-laguerre{tuple(ms)}",
        dim_in=n,
        dim_out=n + 1,
        box=(FLAT_BOX,) * n,
        components=components,
    )
    return FamilyDescriptor(
        tag="flat-laguerre",
        params={"m": ms, "kappa": ks},
        immersion=imm,
        terms=terms,
        reference={
            "laguerre_isoparametric": True,
            "laguerre_groups": len(ms),
            "multiplicities": sorted(ms),
            "flat": True,
            "L_spectrum": "Zero",
        },
    )


def make_ellipsoid(semi_axes: Sequence[float] = (1.0, 1.3, 1.7)) -> FamilyDescriptor:
    """x_i = a_i · S_i(角度)（等径でない対照）"""
    axes = [float(a) for a in semi_axes]
    if len(axes) < 3 or any(a <= 0 for a in axes):
        raise _fail(BadDimensions, f"ellipsoid needs >= 3 positive semi-axes: {axes}")
    n = len(axes) - 1

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        return [a * x for a, x in zip(axes, _sphere_point(coords))]

    def terms(names: Sequence[str]) -> list[str]:
        return [f"{_lit(a)}*{x}" for a, x in zip(axes, _sphere_terms(names))]

    imm = Immersion(
        name=f"ellipsoid{tuple(axes)}",
        dim_in=n,
        dim_out=n + 1,
        box=(ANGLE_BOX,) * n,
        components=components,
    )
    return FamilyDescriptor(
        tag="ellipsoid",
        params={"axes": axes},
        immersion=imm,
        terms=terms,
        reference={"isoparametric": False, "umbilic": len(set(axes)) == 1},
    )


def make_cylinder(radius: float = 1.0, n: int = 2) -> FamilyDescriptor:
    """(r cos u1, r sin u1, u2, …, un)（主曲率 0 を持つ対照）"""
    if radius <= 0 or n < 2:
        raise _fail(
            BadDimensions, f"cylinder needs radius > 0 and n >= 2: {radius}, {n}"
        )

    def components(coords: Sequence[Jet]) -> list[JetLike]:
        circle = [radius * jets.cos(coords[0]), radius * jets.sin(coords[0])]
        return circle + list(coords[1:])

    def terms(names: Sequence[str]) -> list[str]:
        r = _lit(radius)
        return [f"{r}*cos({names[0]})", f"{r}*sin({names[0]})"] + list(names[1:])

    imm = Immersion(
        name=f"cylinder({radius})",
        dim_in=n,
        dim_out=n + 1,
        box=(ANGLE_BOX,) + (LINE_BOX,) * (n - 1),
        components=components,
    )
    return FamilyDescriptor(
        tag="cylinder",
        params={"radius": radius, "n": n},
        immersion=imm,
        terms=terms,
        reference={"vanishing_curvature": True},
    )


# ---------------------------------------------------------------------------
# 登録簿
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyEntry:
    builder: Callable[..., FamilyDescriptor]
    description: str
    defaults: dict[str, Any]


def _cone_clifford(
    n: int = 3,
    p: int = 1,
    q: int = 1,
    theta: float = math.pi / 4,
    perturbation: float = 0.0,
    t_range: Sequence[float] = DEFAULT_T_RANGE,
) -> FamilyDescriptor:
    desc = make_cone(make_clifford_torus(p, q, theta, perturbation), n, t_range)
    return replace(desc, tag="cone-clifford")


def _stereographic_clifford(
    p: int = 1, q: int = 2, theta: float = math.pi / 4
) -> FamilyDescriptor:
    return make_stereographic_image(make_clifford_torus(p, q, theta))


FAMILIES: dict[str, FamilyEntry] = {
    "clifford-torus": FamilyEntry(
        make_clifford_torus,
        "S^p(cos θ)×S^q(sin θ) in S^{p+q+1}",
        {"p": 1, "q": 1, "theta": math.pi / 4, "perturbation": 0.0},
    ),
    "cone-clifford": FamilyEntry(
        _cone_clifford,
        "cone (y, t·u) over a Clifford torus u",
        {"n": 3, "p": 1, "q": 1, "theta": math.pi / 4, "perturbation": 0.0,
         "t_range": list(DEFAULT_T_RANGE)},
    ),
    "stereographic-clifford": FamilyEntry(
        _stereographic_clifford,
        "stereographic image of a Clifford torus",
        {"p": 1, "q": 2, "theta": math.pi / 4},
    ),
    "cyclide": FamilyEntry(
        make_cyclide,
        "cyclide of Dupin over S^k × H^{n-k}",
        {"k": 1, "n": 3, "s_range": list(HYPERBOLIC_BOX)},
    ),
    "flat-laguerre": FamilyEntry(
        make_flat_laguerre,
        "flat Laguerre isoparametric hypersurface",
        {"multiplicities": [1, 1, 1], "kappas": [1.0, 2.0, 3.0]},
    ),
    "ellipsoid": FamilyEntry(
        make_ellipsoid,
        "ellipsoid patch (negative control)",
        {"semi_axes": [1.0, 1.3, 1.7]},
    ),
    "sphere": FamilyEntry(
        make_sphere, "round sphere (umbilic control)", {"n": 2, "radius": 1.0}
    ),
    "cylinder": FamilyEntry(
        make_cylinder,
        "circular cylinder (zero principal curvature)",
        {"radius": 1.0, "n": 2},
    ),
}


def build_family(tag: str, **params: Any) -> FamilyDescriptor:
    """タグとパラメータ（None は既定値）から族を作る"""
    entry = FAMILIES.get(tag)
    if entry is None:
        get_logger().error(
            "Families",
            f"未知の族です: {tag}",
            error_code=ErrorCode.CONFIG_UNKNOWN_FAMILY,
        )
        raise UnknownFamily(f"unknown family {tag!r}; known: {', '.join(FAMILIES)}")
    given = {k: v for k, v in params.items() if v is not None}
    unknown = sorted(set(given) - set(entry.defaults))
    if unknown:
        raise FamilyParameterError(
            f"{tag} does not take parameter(s) {', '.join(unknown)}"
        )
    logger.debug("building family %s with %s", tag, given)
    return entry.builder(**given)


def example_list() -> list[dict[str, Any]]:
    return [
        {"family": tag, "description": entry.description, "defaults": entry.defaults}
        for tag, entry in FAMILIES.items()
    ]


def agreement(
    desc: FamilyDescriptor, points: Optional[np.ndarray] = None, order: int = 2
) -> float:
    """生成関数と DSL 表現のジェット係数の最大差"""
    native = desc.immersion
    dsl = desc.dsl_immersion()
    if points is None:
        points = native.grid(points=2)
    else:
        points = np.asarray(points, dtype=float)
    return max(
        float(np.max(np.abs(native.jet(p, order).coeffs - dsl.jet(p, order).coeffs)))
        for p in points
    )
