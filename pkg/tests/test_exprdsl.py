import math

import numpy as np
import pytest

from src.app import exprdsl, jets
from src.app.errors import (
    ArityError,
    ConfigError,
    DivisionNearZero,
    DslSyntaxError,
    PointOutsideDomain,
    UnknownIdentifier,
)
from src.app.exprdsl import BinOp, Call, Const, Neg, Param, Pow

TORUS = """
# 2 次元トーラス
n=2 on [0.1, 1.4] x [0.1, 1.4];
  (2 + cos(u1)) * cos(u2);
  (2 + cos(u1)) * sin(u2);
  sin(u1)
"""


def test_precedence_and_associativity():
    tree = exprdsl.parse_expression("1 - u1 * u2 ^ 2 - 3", 2)
    assert tree == BinOp(
        "-",
        BinOp("-", Const(1.0), BinOp("*", Param(1), Pow(Param(2), 2))),
        Const(3.0),
    )


def test_unary_minus_binds_looser_than_power():
    assert exprdsl.parse_expression("-u1^2", 1) == Neg(Pow(Param(1), 2))
    assert exprdsl.parse_expression("u1^-2", 1) == Pow(Param(1), -2)


def test_calls_and_constants():
    tree = exprdsl.parse_expression("sin(pi * u1)", 1)
    assert tree == Call("sin", BinOp("*", Const(math.pi), Param(1)))
    assert exprdsl.evaluate(tree, [0.5]) == pytest.approx(1.0)


def test_parse_header_and_components():
    spec = exprdsl.parse(TORUS)
    assert spec.dim_in == 2
    assert spec.dim_out == 3
    assert spec.domain_box == ((0.1, 1.4), (0.1, 1.4))
    assert not spec.sphere
    assert len(spec.components) == 3


def test_trailing_semicolon_allowed():
    spec = exprdsl.parse("n=1 on [0, 1]; u1; u1^2;")
    assert spec.dim_out == 2


def test_sphere_header_needs_extra_component():
    spec = exprdsl.parse("n=1 sphere on [0, 1]; cos(u1); sin(u1); 0")
    assert spec.sphere
    assert spec.dim_out == 3
    with pytest.raises(ArityError):
        exprdsl.parse("n=1 sphere on [0, 1]; cos(u1); sin(u1)")


def test_constant_expressions_in_header():
    spec = exprdsl.parse("n=1 on [-pi/2, 2*pi]; u1; 1")
    assert spec.domain_box == ((-math.pi / 2, 2 * math.pi),)


def test_exclusions_shrink_the_domain():
    spec = exprdsl.parse("n=1 on [0, 1] exclude u1 - 0.5 < 0; u1; u1^2")
    imm = exprdsl.to_immersion(spec)
    assert not imm.contains([0.25])
    assert imm.contains([0.75])
    with pytest.raises(PointOutsideDomain):
        imm.jet([0.25], 2)
    assert all(p[0] >= 0.5 for p in imm.grid(points=5, margin=0.0))


def test_syntax_error_reports_position():
    with pytest.raises(DslSyntaxError) as info:
        exprdsl.parse("n=2 on [0, 1] x [0, 1];\n  u1 +* u2; u2; 1")
    err = info.value
    assert (err.line, err.column) == (2, 7)
    assert err.expected == "expression"
    assert isinstance(err, ConfigError)


@pytest.mark.parametrize(
    "source",
    [
        "n=0 on [0, 1]; u1",
        "n=1 on [1, 0]; u1; u1",
        "n=1 on [0, 1] u1; u1",
        "n=1 on [0, 1]",
        "n=1 on [0, 1]; u1 $ 2; 1",
        "n=1 on [0, 1]; u1^1.5; 1",
        "n=1 on [0, 1]; (u1; 1",
    ],
)
def test_malformed_sources(source):
    with pytest.raises(DslSyntaxError):
        exprdsl.parse(source)


def test_arity_errors():
    with pytest.raises(ArityError):
        exprdsl.parse("n=2 on [0, 1]; u1; u2; 1")
    with pytest.raises(ArityError):
        exprdsl.parse("n=1 on [0, 1]; u1; 1; 2")
    with pytest.raises(ArityError):
        exprdsl.parse_expression("sin(u1, u1)", 1)


@pytest.mark.parametrize(
    "source, dim_in",
    [("u3", 2), ("foo(u1)", 1), ("bar", 1), ("u0", 1)],
)
def test_unknown_identifiers(source, dim_in):
    with pytest.raises(UnknownIdentifier):
        exprdsl.parse_expression(source, dim_in)


def test_parameters_rejected_in_constants():
    with pytest.raises(UnknownIdentifier):
        exprdsl.parse("n=1 on [0, u1]; u1; 1")


def test_constant_division_by_zero():
    with pytest.raises(DivisionNearZero):
        exprdsl.parse("n=1 on [0, 1/0]; u1; 1")


def test_jets_follow_the_components():
    imm = exprdsl.to_immersion(exprdsl.parse(TORUS))
    p = (0.4, 0.9)
    f = imm.jet(p, 3)
    assert f.shape == (3,)
    radius = 2 + math.cos(0.4)
    np.testing.assert_allclose(
        f.value, [radius * math.cos(0.9), radius * math.sin(0.9), math.sin(0.4)]
    )
    assert f.partial(0)[2] == pytest.approx(math.cos(0.4))
    assert f.partial(0, 1)[0] == pytest.approx(math.sin(0.4) * math.sin(0.9))


def test_evaluate_mixes_jets_and_numbers():
    x, y = jets.lift((1.0, 2.0), 2)
    tree = exprdsl.parse_expression("u1 / u2 + 3", 2)
    value = exprdsl.evaluate(tree, [x, y])
    assert value.value == pytest.approx(3.5)
    np.testing.assert_allclose(value.gradient(), [0.5, -0.25])


def test_format_round_trip():
    spec = exprdsl.parse(
        "n=2 on [-0.5, 1] x [0, pi] exclude u1^2 - u2 < -0.25;"
        " -u1 * exp(u2); sinh(u1) / (1 + u2^-2); sqrt(1 + u1^2)"
    )
    assert exprdsl.parse(exprdsl.format_spec(spec)) == spec


def test_load_reads_utf8_file(tmp_path):
    path = tmp_path / "torus.dsl"
    path.write_text(TORUS, encoding="utf-8")
    imm = exprdsl.load(str(path))
    assert imm.name == str(path)
    assert imm.dim_out == 3
    assert exprdsl.load(str(path), name="torus").name == "torus"
