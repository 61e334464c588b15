import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from fredholm_ibp import InvalidArgumentError
from fredholm_ibp.expr import Const, Cos, Exp, Expr, Power, Product, Sin, Sum, Var, add, mul, parse, power, z

SYMS = sp.symbols("z1 z2 z3")


def to_sympy(e: Expr):
    if isinstance(e, Const):
        return sp.Float(e.value, 30)
    if isinstance(e, Var):
        return SYMS[e.index - 1]
    if isinstance(e, Sum):
        return sp.Add(*(to_sympy(t) for t in e.terms))
    if isinstance(e, Product):
        return sp.Mul(*(to_sympy(f) for f in e.factors))
    if isinstance(e, Power):
        return to_sympy(e.base) ** e.exponent
    return {Exp: sp.exp, Sin: sp.sin, Cos: sp.cos}[type(e)](to_sympy(e.arg))


leaves = st.one_of(
    st.floats(-3, 3, allow_nan=False).map(Const),
    st.integers(1, 3).map(Var),
)


def extend(children):
    return st.one_of(
        st.lists(children, min_size=2, max_size=3).map(lambda xs: Sum(tuple(xs))),
        st.lists(children, min_size=2, max_size=3).map(lambda xs: Product(tuple(xs))),
        st.tuples(children, st.integers(0, 4)).map(lambda a: Power(*a)),
        children.map(Sin),
        children.map(Cos),
        children.map(lambda c: Exp(mul(Const(0.3), c))),
    )


exprs = st.recursive(leaves, extend, max_leaves=8)
points = st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3)


@settings(max_examples=150, deadline=None)
@given(exprs, points, st.integers(1, 3))
def test_derivative_matches_sympy(e, pt, k):
    ref = sp.diff(to_sympy(e), SYMS[k - 1])
    want = float(ref.subs(dict(zip(SYMS, pt))))
    got = e.diff(k).evaluate(np.array(pt))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(exprs, points)
def test_evaluate_matches_sympy(e, pt):
    want = float(to_sympy(e).subs(dict(zip(SYMS, pt))))
    assert e.evaluate(np.array(pt)) == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_prefix_round_trip(e):
    back = parse(e.to_prefix())
    assert back == e
    assert back.to_prefix() == e.to_prefix()


def test_vectorized_evaluation():
    e = parse("(+ (* z1 z2) (sin z1))")
    zz = np.array([[0.1, 2.0], [1.0, -1.0], [0.0, 0.0]])
    np.testing.assert_allclose(e.evaluate(zz), zz[:, 0] * zz[:, 1] + np.sin(zz[:, 0]))
    assert Const(2.0).evaluate(zz).tolist() == [2.0, 2.0, 2.0]


def test_scaling_is_exact():
    g = parse("(+ (* 0.1 (^ z1 3)) (cos (* 3 z2)))")
    g2 = mul(Const(2.0), g)
    pt = np.array([0.37, -1.3])
    for k in (1, 2):
        assert g2.diff(k).evaluate(pt) == 2.0 * g.diff(k).evaluate(pt)
        for l in (1, 2):
            assert g2.diff(k).diff(l).evaluate(pt) == 2.0 * g.diff(k).diff(l).evaluate(pt)


def test_smart_constructors():
    assert add(Const(0.0), Var(1)) == Var(1)
    assert mul(Const(1.0), Var(2)) == Var(2)
    assert mul(Const(0.0), Var(2)) == Const(0.0)
    assert mul(Const(2.0), Const(3.0)) == Const(6.0)
    assert power(Var(1), 0) == Const(1.0)
    assert Var(1).diff(2) == Const(0.0)
    with pytest.raises(InvalidArgumentError):
        power(Var(1), -1)
    with pytest.raises(InvalidArgumentError):
        z(0)


def test_zero_power():
    e = parse("(^ z1 0)")
    assert e.evaluate(np.array([3.0])) == 1.0
    assert e.diff(1) == Const(0.0)
    with pytest.raises(InvalidArgumentError):
        Power(Var(1), -2)


def test_operator_sugar():
    e = 2 * z(1) ** 2 - z(2) + 1
    assert e.evaluate(np.array([3.0, 4.0])) == 15.0


def test_minus_sugar():
    assert parse("(- z1 z2 1)").evaluate(np.array([5.0, 2.0])) == 2.0
    assert parse("(- z1)").evaluate(np.array([5.0])) == -5.0


def test_derivative_examples():
    assert parse("(sin z1)").diff(1).evaluate(np.array([0.5])) == pytest.approx(math.cos(0.5))
    assert parse("(exp (* 2 z1))").diff(1).evaluate(np.array([0.0])) == 2.0
    assert parse("(* z1 z2)").diff(1).diff(2) == Const(1.0)


@pytest.mark.parametrize(
    "text",
    ["", "(", "(+ z1", "z1)", "(log z1)", "(^ z1 -1)", "(^ z1 1.5)", "(^ z1 z2)", "z0", "w1", "(sin z1 z2)", "inf", "(+)"],
)
def test_parse_errors(text):
    with pytest.raises(InvalidArgumentError):
        parse(text)
