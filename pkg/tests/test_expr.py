import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from julialike import expr
from julialike.expr import Add, Bindings, Call, Const, Div, Mul, Neg, Num, Pow, Sub, Var, bindings

VARS = ("z", "n", "a")
INDEX = ("n",)


def parse(text):
    return expr.parse_expression(text, VARS, INDEX)


# -- random ASTs ---------------------------------------------------------------

leaves = st.one_of(
    st.integers(0, 50).map(Num),
    st.floats(0, 100, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["pi", "e", "i"]).map(Const),
    st.sampled_from(VARS).map(Var),
)


def _pow(pair):
    base, exponent = pair
    return Pow(base, exponent, expr._integer_exponent(exponent, INDEX))


def _extend(children):
    binops = st.tuples(children, children)
    return st.one_of(
        children.map(Neg),
        binops.map(lambda p: Add(*p)),
        binops.map(lambda p: Sub(*p)),
        binops.map(lambda p: Mul(*p)),
        binops.map(lambda p: Div(*p)),
        binops.map(_pow),
        st.tuples(st.sampled_from(sorted(expr.FUNCTIONS)), children).map(lambda p: Call(*p)),
    )


asts = st.recursive(leaves, _extend, max_leaves=40)


def depth(node):
    if isinstance(node, (Num, Const, Var)):
        return 1
    return 1 + max(depth(c) for c in _children(node))


def _children(node):
    if isinstance(node, Neg):
        return [node.operand]
    if isinstance(node, Pow):
        return [node.base, node.exponent]
    if isinstance(node, Call):
        return [node.arg]
    return [node.left, node.right]


@settings(max_examples=1000)
@given(asts)
def test_round_trip_random_asts(node):
    assume(depth(node) <= 8)
    text = expr.format(node)
    assert parse(text) == node
    assert expr.format(parse(text)) == text


# -- derivatives against finite differences -------------------------------------

# Entire building blocks keep the probes away from singular points.
smooth_leaves = st.one_of(
    st.integers(0, 3).map(Num),
    st.floats(0, 2, allow_nan=False).map(Num),
    st.just(Var("z")),
    st.just(Var("z")),
)


def _smooth(children):
    pairs = st.tuples(children, children)
    return st.one_of(
        children.map(Neg),
        pairs.map(lambda p: Add(*p)),
        pairs.map(lambda p: Sub(*p)),
        pairs.map(lambda p: Mul(*p)),
        st.tuples(children, st.integers(0, 4)).map(lambda p: Pow(p[0], Num(p[1]), True)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sinh", "cosh"]), children).map(lambda p: Call(*p)),
    )


smooth_asts = st.recursive(smooth_leaves, _smooth, max_leaves=12)
probe = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


@settings(max_examples=500)
@given(smooth_asts, probe)
def test_dual_number_matches_finite_difference(node, z):
    env = Bindings(z, {}, {})
    jet = expr.eval_with_derivative(node, env)
    assume(abs(jet.value) < 1e6 and abs(jet.dz) < 1e6)
    h = 1e-6
    fd = (expr.eval(node, Bindings(z + h, {}, {})) - expr.eval(node, Bindings(z - h, {}, {}))) / (2 * h)
    fdi = (expr.eval(node, Bindings(z + 1j * h, {}, {})) - expr.eval(node, Bindings(z - 1j * h, {}, {}))) / (2j * h)
    # Richardson-free central differences carry O(h^2 f''') + O(eps/h) error;
    # the holomorphic check along both axes guards against a sign slip in dz.
    scale = 1 + abs(jet.dz) + abs(jet.value)
    assert abs(jet.dz - fd) <= 1e-6 * scale
    assert abs(jet.dz - fdi) <= 1e-6 * scale


@settings(max_examples=1000)
@given(
    st.floats(-3, 3, allow_nan=False),
    st.floats(-2, 2, allow_nan=False),
    st.integers(1, 10),
)
def test_sin_modulus_identity(x, y, k):
    node = parse("sin(n*z)")
    value = expr.eval(node, bindings(complex(x, y), n=k))
    oracle = math.cosh(k * y) ** 2 - math.cos(k * x) ** 2
    assert abs(abs(value) ** 2 - oracle) <= 1e-9 * math.cosh(k * y) ** 2


@settings(max_examples=200)
@given(probe)
def test_integer_power_matches_repeated_product(z):
    a = expr.eval(parse("z^4"), bindings(z))
    b = expr.eval(parse("z*z*z*z"), bindings(z))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


# -- worked examples ------------------------------------------------------------


def test_parse_shapes():
    assert parse("n*(z-a)") == Mul(Var("n"), Sub(Var("z"), Var("a")))
    assert expr.parse_expression("sin(k*z)", ("z", "k")) == Call("sin", Mul(Var("k"), Var("z")))


def test_format_canonical():
    assert expr.format(Mul(Var("n"), Var("z"))) == "(n*z)"
    assert expr.format(Call("exp", Mul(Var("n"), Var("z")))) == "exp((n*z))"


def test_syntax_error_offset():
    with pytest.raises(expr.ParseError) as info:
        parse("z^")
    assert info.value.offset == 2


def test_offset_counts_utf8_bytes():
    with pytest.raises(expr.ParseError) as info:
        parse("z + é")
    assert info.value.offset == 4


@pytest.mark.parametrize("text", ["w+1", "sin z", "z**2", "(z", "z)", "", "foo(z)"])
def test_rejects_bad_input(text):
    with pytest.raises(expr.ParseError):
        parse(text)


def test_reserved_names():
    with pytest.raises(ValueError):
        expr.parse_expression("z", ("z", "pi"))


def test_precedence_and_associativity():
    assert expr.eval(parse("2^3^2"), bindings(0)) == pytest.approx(512)
    assert expr.eval(parse("-2^2"), bindings(0)) == -4
    assert expr.eval(parse("8/4/2"), bindings(0)) == 1
    assert expr.eval(parse("1-2-3"), bindings(0)) == -4


def test_eval_examples():
    assert expr.eval(parse("z^2+1"), bindings(1 + 1j)) == 1 + 2j
    assert expr.eval(parse("n*z"), bindings(2, n=3)) == 6
    s = expr.eval(expr.parse_expression("sin(k*z)", ("z", "k"), ("k",)), bindings(1j, k=1))
    assert abs(abs(s) - math.sqrt(math.cosh(1) ** 2 - math.cos(0) ** 2)) < 1e-12


def test_derivative_examples():
    jet = expr.eval_with_derivative(parse("z^3"), bindings(2))
    assert (jet.value, jet.dz) == (8, 12)
    jet = expr.eval_with_derivative(parse("n*z"), bindings(1j, n=5))
    assert (jet.value, jet.dz) == (5j, 5)
    node = expr.parse_expression("sin(k*z)", ("z", "k"), ("k",))
    z = 0.7 + 0.2j
    jet = expr.eval_with_derivative(node, bindings(z, k=3))
    assert abs(jet.dz - 3 * cmath.cos(3 * z)) < 1e-12
    h = 1e-6
    fd = (cmath.sin(3 * (z + h)) - cmath.sin(3 * (z - h))) / (2 * h)
    assert abs(jet.dz - fd) <= 1e-6 * abs(jet.dz)


def test_eval_errors():
    with pytest.raises(expr.EvalError):
        expr.eval(parse("1/z"), bindings(0))
    with pytest.raises(expr.EvalError):
        expr.eval(parse("log(z)"), bindings(0))
    with pytest.raises(expr.EvalError):
        expr.eval(parse("z+a"), bindings(1))


def test_array_evaluation_matches_scalar():
    node = parse("exp(n*z)*(z-a)")
    zs = np.array([0.1, 1j, -0.3 + 0.2j])
    arr = expr.eval_with_derivative(node, bindings(zs, n=3, a=0.5))
    for k, z in enumerate(zs):
        one = expr.eval_with_derivative(node, bindings(z, n=3, a=0.5))
        assert arr.value[k] == pytest.approx(one.value)
        assert arr.dz[k] == pytest.approx(one.dz)


def test_to_polynomial():
    c = expr.to_polynomial(parse("(z-1)^2*n"), bindings(0, n=2))
    np.testing.assert_allclose(c, [2, -4, 2])
    assert expr.to_polynomial(parse("exp(z)"), bindings(0)) is None
    assert expr.to_polynomial(parse("z^(-1)"), bindings(0)) is None
    np.testing.assert_allclose(expr.to_polynomial(parse("z^n"), bindings(0, n=3)), [0, 0, 0, 1])
