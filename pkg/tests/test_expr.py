import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapnet.expr import (
    Binary,
    Const,
    ExprError,
    Unary,
    Var,
    evaluate,
    max_variable,
    parse,
    to_text,
)


def test_single_variable():
    assert parse("x2", 2) == Var(2)


def test_pendulum_rhs_tree():
    expected = Binary("sub", Unary("neg", Unary("sin", Var(1))), Var(2))
    assert parse("-sin(x1) - x2", 2) == expected


def test_cubic_rhs_value():
    assert evaluate(parse("x1 - x1^3 + x2", 2), [2.0, 0.0]) == -6.0


def test_constant():
    assert evaluate(Const(3.5), [0.3, -1.0]) == 3.5


def test_equilibrium_values():
    assert evaluate(parse("-2*x1 + x1^3", 3), [0, 0, 0]) == 0.0
    assert evaluate(parse("-x2*x3 + 1", 3), [0, 0, 0]) == 1.0


def test_precedence_vector():
    assert evaluate(parse("2+3*4^2", 1), [0.0]) == 50.0


@pytest.mark.parametrize(
    "source, x, expected",
    [
        ("-x1^2", [3.0], -9.0),  # ^ binds tighter than unary minus
        ("2^3^2", [0.0], 512.0),  # right-associative
        ("(2^3)^2", [0.0], 64.0),
        ("8/2/2", [0.0], 2.0),  # left-associative
        ("10-4-3", [0.0], 3.0),
        ("2*-x1", [1.5], -3.0),
        ("x1^-2", [-2.0], 0.25),  # negative integer power, negative base
        ("abs(x1) + exp(0) + cos(0)", [-4.0], 6.0),
        ("4^0.5", [0.0], 2.0),
        ("1.5e1 + .5", [0.0], 15.5),
    ],
)
def test_evaluation_table(source, x, expected):
    assert evaluate(parse(source, 1), x) == pytest.approx(expected, rel=1e-15)


def test_integer_power_is_repeated_multiplication():
    x = 1.1
    assert evaluate(parse("x1^3", 1), [x]) == x * x * x


def test_fractional_power_of_negative_base_is_nan():
    assert math.isnan(evaluate(parse("x1^0.5", 1), [-1.0]))


def test_division_by_zero_propagates():
    assert evaluate(parse("1/x1", 1), [0.0]) == math.inf


@pytest.mark.parametrize(
    "source, offset",
    [
        ("x1 +", 4),
        ("2x1", 1),  # no implicit multiplication
        ("x1 $ x2", 3),
        ("(x1", 3),
        ("sin x1", 4),
        ("x1)", 2),
    ],
)
def test_syntax_errors_carry_offset(source, offset):
    with pytest.raises(ExprError) as err:
        parse(source, 2)
    assert err.value.offset == offset


def test_offset_is_in_bytes():
    with pytest.raises(ExprError) as err:
        parse("\u00a0x1 $", 1)
    # the no-break space is one character but two bytes
    assert err.value.offset == 5


def test_unknown_identifier():
    with pytest.raises(ExprError, match="unknown identifier 'y'"):
        parse("x1 + y", 2)


def test_variable_out_of_range():
    with pytest.raises(ExprError, match="out of range"):
        parse("x3", 2)
    with pytest.raises(ExprError):
        parse("x0", 2)


def test_batch_evaluation_matches_pointwise():
    e = parse("x1 - x1^3 + sin(x2)*x2", 2)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (50, 2))
    batch = evaluate(e, pts)
    assert batch.shape == (50,)
    for p, b in zip(pts, batch):
        assert evaluate(e, p) == b


def test_constant_expression_broadcasts_over_batch():
    assert evaluate(parse("1", 2), np.zeros((4, 2))).tolist() == [1.0] * 4


# -- random trees ---------------------------------------------------------

DIM = 3

leaves = st.one_of(
    st.builds(Const, st.floats(0, 10, allow_nan=False).map(lambda v: round(v, 3))),
    st.builds(Const, st.integers(0, 4).map(float)),
    st.builds(Var, st.integers(1, DIM)),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "exp", "abs"]), children),
        st.builds(Binary, st.sampled_from(["add", "sub", "mul", "div", "pow"]), children, children),
    )


trees = st.recursive(leaves, _extend, max_leaves=20)


def _depth(e):
    if isinstance(e, (Const, Var)):
        return 0
    if isinstance(e, Unary):
        return 1 + _depth(e.arg)
    return 1 + max(_depth(e.left), _depth(e.right))


def reference_eval(e, x):
    """Independent recursive evaluator with the same left-to-right order."""
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        return np.float64(x[e.index - 1])
    if isinstance(e, Unary):
        a = reference_eval(e.arg, x)
        return {"neg": lambda t: -t, "sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[e.op](a)
    a = reference_eval(e.left, x)
    if e.op == "pow":
        k = _int_exp(e.right)
        if k is not None:
            if k == 0:
                return np.float64(1.0)
            r = a
            for _ in range(abs(k) - 1):
                r = r * a
            return 1.0 / r if k < 0 else r
        return np.exp(reference_eval(e.right, x) * np.log(a))
    b = reference_eval(e.right, x)
    return {"add": a + b, "sub": a - b, "mul": a * b, "div": a / b}[e.op]


def _int_exp(node):
    if isinstance(node, Unary) and node.op == "neg":
        k = _int_exp(node.arg)
        return None if k is None else -k
    if isinstance(node, Const) and float(node.value).is_integer():
        return int(node.value)
    return None


def _same(a, b):
    a, b = float(a), float(b)
    return (math.isnan(a) and math.isnan(b)) or a == b


@settings(max_examples=1000, deadline=None)
@given(trees.filter(lambda e: _depth(e) <= 6), st.lists(st.floats(-3, 3), min_size=DIM, max_size=DIM))
def test_eval_matches_reference_bitwise(e, x):
    with np.errstate(all="ignore"):
        expected = reference_eval(e, np.array(x))
    assert _same(evaluate(e, x), expected)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_print_parse_roundtrip(e):
    text = to_text(e)
    assert parse(text, DIM) == e
    assert parse(to_text(parse(text, DIM)), DIM) == e


def test_max_variable():
    assert max_variable(parse("sin(x3) + x1", 3)) == 3
    assert max_variable(parse("2", 3)) == 0
