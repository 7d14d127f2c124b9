"""
はめ込み記述用の小さな式言語

ヘッダで次元と定義域を宣言し、セミコロン区切りで成分式を並べます::

    n=2 on [0.3, 1.2] x [0, 6.28] exclude u1 - 0.1 < 0 ; u1*cos(u2); u1*sin(u2); u1^2

優先順位は ^ > 単項マイナス > * / > + − で、二項演算は左結合です。
`sphere` キーワード（``n=2 sphere on ...``）は単位球面内の超曲面を表し、
成分数は n+2 になります。`#` から行末まではコメントです。
"""

import math
from typing import Optional, Sequence, Union

import attrs

from src.app import jets
from src.app.errors import (
    ArityError,
    DivisionNearZero,
    DslSyntaxError,
    UnknownIdentifier,
)
from src.app.immersion import Exclusion, Immersion
from src.app.jets import Jet, JetLike

SINGLE_CHAR_OPS = "+-*/^()[],;=<"
CONSTANTS = {"pi": math.pi}


# ---------------------------------------------------------------------------
# 構文木
# ---------------------------------------------------------------------------


@attrs.frozen
class Const:
    value: float


@attrs.frozen
class Param:
    index: int  # 1 始まり（u1 が 1）


@attrs.frozen
class Neg:
    operand: "ExprTree"


@attrs.frozen
class BinOp:
    op: str
    left: "ExprTree"
    right: "ExprTree"


@attrs.frozen
class Call:
    name: str
    arg: "ExprTree"


@attrs.frozen
class Pow:
    base: "ExprTree"
    exponent: int


ExprTree = Union[Const, Param, Neg, BinOp, Call, Pow]


@attrs.frozen
class ExcludedZone:
    expr: ExprTree
    threshold: float


@attrs.frozen
class ImmersionSpec:
    """構文解析済みのはめ込み定義"""

    dim_in: int
    dim_out: int
    components: tuple[ExprTree, ...]
    domain_box: tuple[tuple[float, float], ...]
    excluded_zones: tuple[ExcludedZone, ...] = ()
    sphere: bool = False


# ---------------------------------------------------------------------------
# 字句解析
# ---------------------------------------------------------------------------


@attrs.frozen
class Token:
    kind: str  # NUMBER / IDENT / OP / EOF
    text: str
    line: int
    column: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(source):
        ch = source[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < len(source) and source[i] != "\n":
                i += 1
            continue
        start_col = col
        leading_dot = ch == "." and i + 1 < len(source) and source[i + 1].isdigit()
        if ch.isdigit() or leading_dot:
            j = i
            while j < len(source) and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < len(source) and source[j] in "eE":
                k = j + 1
                if k < len(source) and source[k] in "+-":
                    k += 1
                if k < len(source) and source[k].isdigit():
                    j = k
                    while j < len(source) and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if text.count(".") > 1:
                raise DslSyntaxError(
                    f"malformed number {text!r}", line, start_col, "number"
                )
            tokens.append(Token("NUMBER", text, line, start_col))
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(source) and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", source[i:j], line, start_col))
        elif ch in SINGLE_CHAR_OPS:
            j = i + 1
            tokens.append(Token("OP", ch, line, start_col))
        else:
            raise DslSyntaxError(
                f"unexpected character {ch!r}", line, start_col, "token"
            )
        col += j - i
        i = j
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# 構文解析
# ---------------------------------------------------------------------------


class _Parser:
    """再帰下降パーサー"""

    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.dim_in: Optional[int] = None

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "EOF":
            self.pos += 1
        return token

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        token = self.current
        return token.kind == kind and (text is None or token.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            token = self.current
            found = token.text or "end of input"
            raise DslSyntaxError(
                f"unexpected {found!r}", token.line, token.column, text or kind.lower()
            )
        return self.advance()

    def fail(self, expected: str) -> DslSyntaxError:
        token = self.current
        found = token.text or "end of input"
        return DslSyntaxError(
            f"unexpected {found!r}", token.line, token.column, expected
        )

    # --- ヘッダ -----------------------------------------------------------

    def parse_spec(self) -> ImmersionSpec:
        self.expect("IDENT", "n")
        self.expect("OP", "=")
        dim_token = self.expect("NUMBER")
        if not dim_token.text.isdigit() or int(dim_token.text) < 1:
            raise DslSyntaxError(
                "dimension must be a positive integer",
                dim_token.line,
                dim_token.column,
                "positive integer",
            )
        self.dim_in = int(dim_token.text)

        sphere = False
        if self.at("IDENT", "sphere"):
            self.advance()
            sphere = True
        self.expect("IDENT", "on")

        box = [self.parse_interval()]
        while self.at("IDENT", "x"):
            self.advance()
            box.append(self.parse_interval())
        if len(box) != self.dim_in:
            raise ArityError(
                f"header declares n={self.dim_in} but {len(box)} intervals"
            )

        zones = []
        while self.at("IDENT", "exclude"):
            self.advance()
            expr = self.parse_expr()
            self.expect("OP", "<")
            zones.append(ExcludedZone(expr, self.parse_constant()))

        components = []
        while self.at("OP", ";"):
            self.advance()
            if self.at("EOF"):
                break
            components.append(self.parse_expr())
        if not self.at("EOF"):
            raise self.fail("';' or end of input")
        if not components:
            raise self.fail("';' followed by a component")

        dim_out = self.dim_in + (2 if sphere else 1)
        if len(components) != dim_out:
            raise ArityError(
                f"n={self.dim_in}{' sphere' if sphere else ''} needs {dim_out} "
                f"components, got {len(components)}"
            )
        return ImmersionSpec(
            dim_in=self.dim_in,
            dim_out=dim_out,
            components=tuple(components),
            domain_box=tuple(box),
            excluded_zones=tuple(zones),
            sphere=sphere,
        )

    def parse_interval(self) -> tuple[float, float]:
        open_token = self.expect("OP", "[")
        lo = self.parse_constant()
        self.expect("OP", ",")
        hi = self.parse_constant()
        self.expect("OP", "]")
        if not lo < hi:
            raise DslSyntaxError(
                f"empty interval [{lo}, {hi}]",
                open_token.line,
                open_token.column,
                "lo < hi",
            )
        return (lo, hi)

    def parse_constant(self) -> float:
        token = self.current
        expr = self.parse_expr()
        try:
            return float(evaluate(expr, []))
        except IndexError:
            raise UnknownIdentifier(
                f"parameters are not allowed in constants (line {token.line}, "
                f"column {token.column})"
            ) from None

    # --- 式 ---------------------------------------------------------------

    def parse_expr(self) -> ExprTree:
        node = self.parse_term()
        while self.at("OP", "+") or self.at("OP", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> ExprTree:
        node = self.parse_unary()
        while self.at("OP", "*") or self.at("OP", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> ExprTree:
        if self.at("OP", "-"):
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> ExprTree:
        node = self.parse_atom()
        while self.at("OP", "^"):
            self.advance()
            sign = 1
            if self.at("OP", "-"):
                self.advance()
                sign = -1
            token = self.current
            if token.kind != "NUMBER" or not token.text.isdigit():
                raise self.fail("integer exponent")
            self.advance()
            node = Pow(node, sign * int(token.text))
        return node

    def parse_atom(self) -> ExprTree:
        token = self.current
        if token.kind == "NUMBER":
            self.advance()
            return Const(float(token.text))
        if token.kind == "OP" and token.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect("OP", ")")
            return node
        if token.kind == "IDENT":
            self.advance()
            if self.at("OP", "("):
                return self.parse_call(token)
            return self.resolve_identifier(token)
        raise self.fail("expression")

    def parse_call(self, name_token: Token) -> ExprTree:
        if name_token.text not in jets.ELEMENTARY:
            raise UnknownIdentifier(
                f"unknown function {name_token.text!r} "
                f"(line {name_token.line}, column {name_token.column})"
            )
        self.expect("OP", "(")
        args = []
        if not self.at("OP", ")"):
            args.append(self.parse_expr())
            while self.at("OP", ","):
                self.advance()
                args.append(self.parse_expr())
        self.expect("OP", ")")
        if len(args) != 1:
            raise ArityError(
                f"{name_token.text} takes 1 argument, got {len(args)} "
                f"(line {name_token.line}, column {name_token.column})"
            )
        return Call(name_token.text, args[0])

    def resolve_identifier(self, token: Token) -> ExprTree:
        name = token.text
        if name in CONSTANTS:
            return Const(CONSTANTS[name])
        if name.startswith("u") and name[1:].isdigit():
            index = int(name[1:])
            if 1 <= index <= (self.dim_in or 0):
                return Param(index)
        raise UnknownIdentifier(
            f"unknown identifier {name!r} (line {token.line}, column {token.column})"
        )


def parse(source: str) -> ImmersionSpec:
    """ソーステキストを ImmersionSpec に変換"""
    return _Parser(tokenize(source)).parse_spec()


def parse_expression(source: str, dim_in: int) -> ExprTree:
    """単独の式を解析（ヘッダなし）"""
    parser = _Parser(tokenize(source))
    parser.dim_in = dim_in
    node = parser.parse_expr()
    if not parser.at("EOF"):
        raise parser.fail("end of input")
    return node


# ---------------------------------------------------------------------------
# 評価
# ---------------------------------------------------------------------------


def _divide(a: JetLike, b: JetLike) -> JetLike:
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        if abs(float(b)) <= jets.DIVISION_EPS:
            raise DivisionNearZero("division by zero in constant expression")
        return float(a) / float(b)
    return a / b


def evaluate(node: ExprTree, variables: Sequence[JetLike]) -> JetLike:
    """構文木を変数（ジェットまたは数値）で評価"""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Param):
        return variables[node.index - 1]
    if isinstance(node, Neg):
        return -evaluate(node.operand, variables)
    if isinstance(node, BinOp):
        left = evaluate(node.left, variables)
        right = evaluate(node.right, variables)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return _divide(left, right)
    if isinstance(node, Call):
        return jets.ELEMENTARY[node.name](evaluate(node.arg, variables))
    if isinstance(node, Pow):
        return jets.pow_int(evaluate(node.base, variables), node.exponent)
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(spec: ImmersionSpec, point: Sequence[float], order: int) -> Jet:
    """各成分のジェット（形状 (dim_out,)）"""
    return to_immersion(spec).jet(point, order)


def to_immersion(spec: ImmersionSpec, name: str = "dsl") -> Immersion:
    def components(coords: Sequence[Jet]) -> list[JetLike]:
        return [evaluate(c, coords) for c in spec.components]

    exclusions = tuple(
        Exclusion(
            label=format_expr(zone.expr),
            predicate=lambda p, expr=zone.expr: float(evaluate(expr, list(p))),
            threshold=zone.threshold,
        )
        for zone in spec.excluded_zones
    )
    return Immersion(
        name=name,
        dim_in=spec.dim_in,
        dim_out=spec.dim_out,
        box=spec.domain_box,
        components=components,
        exclusions=exclusions,
        sphere=spec.sphere,
    )


def load(path: str, name: Optional[str] = None) -> Immersion:
    """UTF-8 の DSL ファイルを読み込みはめ込みを返す"""
    with open(path, encoding="utf-8") as f:
        source = f.read()
    return to_immersion(parse(source), name=name or path)


# ---------------------------------------------------------------------------
# 整形
# ---------------------------------------------------------------------------


def format_expr(node: ExprTree) -> str:
    """再解析で同一の木に戻る完全括弧表記"""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Param):
        return f"u{node.index}"
    if isinstance(node, Neg):
        return f"-({format_expr(node.operand)})"
    if isinstance(node, BinOp):
        return f"({format_expr(node.left)} {node.op} {format_expr(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({format_expr(node.arg)})"
    if isinstance(node, Pow):
        return f"({format_expr(node.base)})^{node.exponent}"
    raise TypeError(f"not an expression node: {node!r}")


def format_spec(spec: ImmersionSpec) -> str:
    box = " x ".join(f"[{lo!r}, {hi!r}]" for lo, hi in spec.domain_box)
    header = f"n={spec.dim_in}{' sphere' if spec.sphere else ''} on {box}"
    for zone in spec.excluded_zones:
        header += f" exclude {format_expr(zone.expr)} < {zone.threshold!r}"
    body = "".join(f";\n  {format_expr(c)}" for c in spec.components)
    return header + body + "\n"
