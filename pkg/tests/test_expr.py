import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivrobust.expr import ParseError, compile_expr, compile_value_grad, eval_expr, grad_check, kink_active, parse, \
    subdiff, to_text

N, K = 2, 1


def _leaf():
    return st.one_of(
        st.sampled_from(["x1", "x2", "v1"]),
        st.integers(0, 9).map(str),
        st.floats(0.1, 5, allow_nan=False).map(lambda f: f"{f:.3f}"),
    )


def _extend(inner):
    return st.one_of(
        st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        inner.map(lambda a: f"-{a}"),
        st.tuples(inner, st.integers(1, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(inner, inner).map(lambda t: f"max({t[0]}, {t[1]})"),
        st.tuples(inner, inner).map(lambda t: f"min({t[0]}, {t[1]})"),
        inner.map(lambda a: f"abs({a})"),
    )


exprs = st.recursive(_leaf(), _extend, max_leaves=8)
points = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


@given(exprs)
def test_print_parse_round_trip(text):
    e = parse(text, N, K)
    assert parse(to_text(e), N, K) == e


@given(exprs, points)
def test_compiled_matches_tree_eval(text, p):
    e = parse(text, N, K)
    f = compile_expr(e)
    x, v = np.array(p[:2]), np.array(p[2:])
    want = eval_expr(e, x, v)
    got = float(f(x[None, :], v[None, :])[0])
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=60)
@given(exprs, points)
def test_gradient_matches_differences_at_smooth_points(text, p):
    e = parse(text, N, K)
    x, v = np.array(p[:2]), np.array(p[2:])
    if kink_active(e, x, v, 1e-3):
        return
    assert grad_check(e, x, v) <= 1e-4
    val, grad = compile_value_grad(e, N)(x, v)
    res = subdiff(e, x, v)
    assert res.is_exact and val == pytest.approx(res.value)
    np.testing.assert_allclose(grad, res.polytope.vertices[0], rtol=1e-9, atol=1e-9)


def test_subdiff_of_abs_and_max():
    e = parse("abs(x1)", 1)
    r = subdiff(e, [0.0])
    assert not r.is_exact
    assert sorted(r.polytope.vertices.ravel()) == [-1.0, 1.0]
    assert subdiff(e, [2.0]).polytope.vertices.tolist() == [[1.0]]

    e = parse("max(x1, x2, 0)", 2)
    r = subdiff(e, [0.0, 0.0])
    assert sorted(map(tuple, r.polytope.vertices)) == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
    r = subdiff(e, [1.0, 0.0])
    assert r.is_exact and r.polytope.vertices.tolist() == [[1.0, 0.0]]


def test_min_is_negated_max():
    r = subdiff(parse("min(x1, -x1)", 1), [0.0])
    assert sorted(r.polytope.vertices.ravel()) == [-1.0, 1.0]


def test_grad_check_refuses_kinks():
    with pytest.raises(ValueError):
        grad_check(parse("abs(x1)", 1), [0.0])


@pytest.mark.parametrize("text", ["x3", "v1", "x0", "foo(x1)", "x1 +", "max(x1)", "x1^-1", "x1^1.5", "(x1",
                                  "x1 $ 2", "x1 x2"])
def test_parse_errors(text):
    with pytest.raises(ParseError) as info:
        parse(text, 2, 0)
    assert "position" in str(info.value)


def test_eval_checks_dimensions():
    e = parse("x1 + v1", 1, 1)
    assert eval_expr(e, [1.0], [2.0]) == 3.0
    with pytest.raises(ValueError):
        eval_expr(e, [1.0], [])
