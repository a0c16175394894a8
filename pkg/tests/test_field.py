import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morseflow import catalog
from morseflow.errors import ArityError, EvalError, ExprSyntaxError, UnknownBuiltin, UnknownVariable
from morseflow.field import BinOp, Call, Num, Var, eval_jet2, evaluate, linear_substitute, parse_expr, to_source
from oracles import central_gradient, central_jacobian


def test_parse_two_cosines():
    e = parse_expr("cos(x1) + 0.5*cos(x2)", 2)
    assert e.root == BinOp("+", Call("cos", Var(0)), BinOp("*", Num(0.5), Call("cos", Var(1))))


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("x1 +", 1)
    assert info.value.offset == 4


@pytest.mark.parametrize("src", ["cos(x3)", "x0 + 1"])
def test_unknown_variable(src):
    with pytest.raises(UnknownVariable):
        parse_expr(src, 2)


@pytest.mark.parametrize("src", ["sin()", "cos(x1, x2)"])
def test_arity(src):
    with pytest.raises(ArityError):
        parse_expr(src, 2)


@pytest.mark.parametrize("src", ["foo(x1)", "x1 * * x2", "(x1", "x1 x2", "2 ^ x1", ""])
def test_malformed(src):
    with pytest.raises(ExprSyntaxError):
        parse_expr(src, 2)


def test_whitespace_and_exponent_numbers():
    a = parse_expr("  1.5e-1*x1^2 ", 1)
    b = parse_expr("0.15*x1^2", 1)
    assert a == b


def test_jet_cos_at_zero():
    j = eval_jet2(parse_expr("cos(x1)", 1), [0.0])
    assert j.value == 1.0
    assert j.gradient.tolist() == [0.0]
    assert j.hessian.tolist() == [[-1.0]]


def test_jet_bilinear():
    j = eval_jet2(parse_expr("x1*x2", 2), [2.0, 3.0])
    assert j.value == 6.0
    assert j.gradient.tolist() == [3.0, 2.0]
    assert j.hessian.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_skew_gradient_matches_differences():
    e = parse_expr("cos(x1)+0.5*cos(x2)+0.3*cos(x1-x2)", 2)
    x = np.array([0.7, 1.1])
    g = eval_jet2(e, x).gradient
    fd = central_gradient(lambda y: eval_jet2(e, y).value, x, 1e-5)
    assert np.all(np.abs(g - fd) <= 1e-6 * np.abs(g))


@pytest.mark.parametrize("src,x", [("1/x1", [0.0]), ("log(x1)", [-1.0]), ("log(x1)", [0.0]),
                                   ("x1^0.5", [-1.0]), ("x1^-2", [0.0])])
def test_eval_errors(src, x):
    with pytest.raises(EvalError):
        eval_jet2(parse_expr(src, 1), x)


def test_unknown_builtin():
    with pytest.raises(UnknownBuiltin):
        catalog.builtin("unknown")


def test_catalog_contents():
    for name in ["torus2_sep", "torus2_skew", "circle_1", "circle_2", "circle_3", "box_quad"]:
        b = catalog.builtin(name)
        assert b.n == b.manifold.n == b.expr.n
    assert catalog.builtin("torus2_sep").manifold.kind == "torus"
    assert catalog.builtin("box_quad").manifold.kind == "box"
    assert catalog.builtin("circle_1").manifold.kind == "circle"


def test_box_quad_is_negative_quadratic_at_origin():
    j = eval_jet2(catalog.builtin("box_quad").expr, [0.0, 0.0])
    assert j.value == 0.0
    assert j.gradient.tolist() == [0.0, 0.0]
    assert np.allclose(j.hessian, np.diag([-4.0, -2.0]), atol=0)


def test_torus2_sep_gradient_vanishes_on_half_periods():
    e = catalog.builtin("torus2_sep").expr
    for a in (0.0, math.pi):
        for b in (0.0, math.pi):
            assert np.abs(eval_jet2(e, [a, b]).gradient).max() < 1e-15


def test_batched_evaluation_matches_pointwise():
    e = catalog.builtin("torus2_skew").expr
    X = np.random.default_rng(3).uniform(0, 6, (7, 2))
    vals, grads, hess = evaluate(e, X, order=2)
    for k, x in enumerate(X):
        j = eval_jet2(e, x)
        assert vals[k] == j.value
        assert np.array_equal(grads[k], j.gradient)
        assert np.array_equal(hess[k], j.hessian)


def test_linear_substitute_composes():
    e = parse_expr("sin(x1)*x2 + x2^2", 2)
    A = np.array([[1.0, 2.0], [0.5, -1.0]])
    b = np.array([0.1, -0.2])
    s = linear_substitute(e, A, b)
    y = np.array([0.3, 0.4])
    assert eval_jet2(s, y).value == pytest.approx(eval_jet2(e, A @ y + b).value, rel=1e-14)


# --- generated expressions -------------------------------------------------

_num = st.sampled_from(["0.5", "2", "1.25", "3", "0.1", "1e-1", "pi"])


def _leaf(n):
    return st.one_of(_num, st.integers(1, n).map(lambda i: f"x{i}"))


def _grow(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "tanh"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        st.tuples(children, st.integers(1, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        children.map(lambda c: f"-{c}"),
        children.map(lambda c: f"exp(0.3*{c})"),
    )


def expressions(n):
    return st.recursive(_leaf(n), _grow, max_leaves=6)


@settings(max_examples=150, deadline=None)
@given(expressions(3))
def test_print_parse_idempotent(src):
    e = parse_expr(src, 3)
    again = parse_expr(to_source(e), 3)
    assert again == e
    assert to_source(again) == to_source(e)


@settings(max_examples=120, deadline=None)
@given(expressions(2), st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_generated_derivatives_match_differences(src, x):
    e = parse_expr(src, 2)
    x = np.array(x)
    j = eval_jet2(e, x)
    scale = 1.0 + max(abs(j.value), np.abs(j.gradient).max(), np.abs(j.hessian).max())
    fd_g = central_gradient(lambda y: eval_jet2(e, y).value, x, 1e-5)
    fd_h = central_jacobian(lambda y: eval_jet2(e, y).gradient, x, 1e-5)
    assert np.abs(j.gradient - fd_g).max() <= 1e-6 * scale
    assert np.abs(j.hessian - fd_h).max() <= 1e-5 * scale
    assert np.array_equal(j.hessian, j.hessian.T)
