import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbound.expr import (MAX_DEPTH, BinOp, Call, ExprError, ExprEvalError, Neg, Num, Var,
                          compile_expr, depth, evaluate, parse, to_source, variables)

import exprgen


def test_power_node():
    assert parse("mu^2", ["mu"]) == BinOp("^", Var("mu"), Num(2.0))


def test_weighted_sum():
    tree = parse("0.8*x1 + 0.2*x2", ["x1", "x2"])
    assert tree == BinOp("+", BinOp("*", Num(0.8), Var("x1")), BinOp("*", Num(0.2), Var("x2")))


@pytest.mark.parametrize("src, message, offset", [
    ("mu + sigma", "unknown variable 'sigma'", 5),
    ("(mu + 1", "unbalanced parentheses", 0),
    ("mu + 1)", "unbalanced parentheses", 6),
    ("2 * (mu", "unbalanced parentheses", 4),
    ("1.2.3 + mu", "malformed number '1.2.3'", 0),
    ("mu * 1e+", "malformed number", 5),
    ("", "empty expression", 0),
    ("mu +", "unexpected end of expression", 4),
    ("mu # 2", "unexpected character", 3),
    ("mu mu", "unexpected 'mu'", 3),
])
def test_positioned_diagnostics(src, message, offset):
    with pytest.raises(ExprError) as info:
        parse(src, ["mu"])
    assert message in str(info.value)
    assert info.value.offset == offset
    assert str(info.value).endswith(f"at offset {offset}")


def test_unknown_variable_exact_message():
    with pytest.raises(ExprError, match=r"^unknown variable 'sigma' at offset 5$"):
        parse("mu + sigma", ["mu"])


def test_offsets_count_bytes():
    with pytest.raises(ExprError) as info:
        parse("  mu + zz", ["mu"])
    assert info.value.offset == 2 * 2 + 5


def test_precedence():
    assert evaluate(parse("-2^2", []), {}) == -4.0
    assert evaluate(parse("2^3^2", []), {}) == 512.0
    assert evaluate(parse("2^-1", []), {}) == 0.5
    assert evaluate(parse("8 / 4 / 2", []), {}) == 1.0
    assert evaluate(parse("1 - 2 - 3", []), {}) == -4.0
    assert evaluate(parse("2 * -3", []), {}) == -6.0


def test_whitespace_insensitive():
    assert parse(" mu ^ 2 ", ["mu"]) == parse("mu^2", ["mu"])


def test_eval_examples():
    assert evaluate(parse("mu^2", ["mu"]), {"mu": 1.5}) == 2.25
    assert evaluate(parse("x^2 - 1", ["x"]), {"x": 2.0}) == 3.0
    with pytest.raises(ExprEvalError, match="log"):
        evaluate(parse("log(p)", ["p"]), {"p": 0.0})


@pytest.mark.parametrize("src, env", [
    ("0^-1", {}), ("(-8)^(1/3)", {}), ("sqrt(x)", {"x": -1.0}), ("1/x", {"x": 0.0}),
    ("exp(x)", {"x": 1000.0}), ("x^x", {"x": 1e10}), ("log(-x)", {"x": 2.0}),
])
def test_domain_faults(src, env):
    with pytest.raises(ExprEvalError):
        evaluate(parse(src, list(env)), env)


def test_fault_names_subexpression():
    with pytest.raises(ExprEvalError, match=r"in 'log\(x - 1\)'"):
        evaluate(parse("2 + log(x - 1)", ["x"]), {"x": 1.0})


def test_negative_base_integer_power():
    assert evaluate(parse("(-2)^3", []), {}) == -8.0


def test_array_bindings():
    out = evaluate(parse("x1 * 0.5 + abs(x2)", ["x1", "x2"]),
                   {"x1": np.array([1.0, 2.0]), "x2": np.array([-1.0, 3.0])})
    assert out.tolist() == [1.5, 4.0]
    with pytest.raises(ExprEvalError):
        evaluate(parse("log(x)", ["x"]), {"x": np.array([1.0, 0.0])})


def test_unbound_variable_at_eval():
    with pytest.raises(ExprEvalError, match="unbound"):
        evaluate(parse("x", ["x"]), {})


def test_compile_expr():
    f = compile_expr("sqrt(a*b)", ["a", "b"])
    assert f(a=4.0, b=9.0) == 6.0


def test_variables():
    assert variables(parse("a*exp(b) - a", ["a", "b", "c"])) == {"a", "b"}


def test_depth_limit():
    ok = "(" * (MAX_DEPTH - 1) + "1" + ")" * (MAX_DEPTH - 1)
    assert depth(parse(ok, [])) == 1
    with pytest.raises(ExprError, match="deeper than"):
        parse("(" * (MAX_DEPTH + 1) + "1" + ")" * (MAX_DEPTH + 1), [])
    with pytest.raises(ExprError, match="deeper than"):
        parse("-" * (MAX_DEPTH + 1) + "1", [])
    with pytest.raises(ExprError, match="deeper than"):
        parse("+".join(["1"] * (MAX_DEPTH + 2)), [])


def test_function_name_as_variable():
    assert parse("exp", ["exp"]) == Var("exp")
    assert parse("exp(exp)", ["exp"]) == Call("exp", Var("exp"))


def test_scientific_literals():
    assert parse("1e-5", []) == Num(1e-5)
    assert parse(".5", []) == Num(0.5)
    assert parse("3.", []) == Num(3.0)
    assert to_source(Num(1e-300)) == "1e-300"


@st.composite
def trees(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    d = draw(st.integers(1, 8))
    return exprgen.random_tree(np.random.default_rng(seed), d)


@settings(max_examples=300, deadline=None)
@given(tree=trees())
def test_round_trip(tree):
    src = to_source(tree)
    again = parse(src, exprgen.VARS)
    assert again == tree
    assert to_source(again) == src


@settings(max_examples=300, deadline=None)
@given(tree=trees(), a=st.floats(-3, 3), b=st.floats(0.1, 4), c=st.floats(-50, 50))
def test_differential_evaluation(tree, a, b, c):
    env = {"a": a, "b": b, "c": c}
    src = to_source(tree)
    expected = exprgen.reference_eval(src, env)
    if expected is None:
        with pytest.raises(ExprEvalError):
            evaluate(tree, env)
    else:
        got = evaluate(tree, env)
        assert math.isclose(got, expected, rel_tol=1e-12, abs_tol=1e-300) or got == expected


def test_neg_of_power_printing():
    tree = Neg(BinOp("^", Var("a"), Num(2.0)))
    assert to_source(tree) == "-a^2"
    tree = BinOp("^", Neg(Var("a")), Num(2.0))
    assert to_source(tree) == "(-a)^2"
    assert parse(to_source(tree), ["a"]) == tree
