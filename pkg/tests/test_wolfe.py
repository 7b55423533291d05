from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ivrobust.classify import HOLDS, REFUTED
from ivrobust.wolfe import DualPoint, converse_duality_check, dual_bounds, dual_classify, dual_objective, \
    in_Omega_D, make_config


@given(st.fractions(0, 1, max_denominator=64), st.fractions(0, 32, max_denominator=16))
def test_dual_objective_exact_on_dyadics(y, lam):
    from ivrobust.model import load_problem
    from conftest import FIXTURES
    prob = load_problem(FIXTURES / "ex_dual.toml")
    got = dual_objective(prob, [float(y)], [float(lam)])
    pen = lam * (1 - y * y) / 4
    want = [(y + pen, y + 2 + pen), (y + pen, y + 1 + pen)]
    for g, (a, b) in zip(got, want):
        assert g.lo == pytest.approx(float(a), rel=1e-15, abs=1e-15)
        assert g.hi == pytest.approx(float(b), rel=1e-15, abs=1e-15)


def test_batched_bounds_match_scalar(load):
    prob = load("ex_dual")
    Y = np.linspace(0, 1, 5)[:, None]
    L = np.linspace(0, 8, 5)[:, None]
    lo, hi = dual_bounds(prob, Y, L)
    for k in range(5):
        d = dual_objective(prob, Y[k], L[k])
        assert [(g.lo, g.hi) for g in d] == list(zip(lo[k], hi[k]))


def test_config_requires_kkt_anchor(load):
    prob = load("ex_dual")
    with pytest.raises(ValueError):
        make_config(prob, [0.25], [1.0])
    cfg = make_config(prob, [0.25], [8.0])
    assert cfg.cap_mode and cfg.capped == (0,)


def test_cap_and_membership(load):
    prob = load("ex_dual")
    on = make_config(prob, [0.25], [8.0], cap_mode=True)
    off = make_config(prob, [0.25], [8.0], cap_mode=False)
    assert in_Omega_D(prob, on, [0.25], [8.0]).member
    assert in_Omega_D(prob, off, [0.125], [16.0]).member
    m = in_Omega_D(prob, on, [0.125], [16.0])
    assert not m.member and "exceeds cap" in m.reason
    with pytest.raises(ValueError):
        in_Omega_D(prob, on, [-1.0], [8.0])
    with pytest.raises(ValueError):
        DualPoint([0.0], [-1.0])


def test_classification_verdicts(load):
    prob = load("ex_dual")
    anchor = DualPoint([0.25], [8.0])
    on = make_config(prob, [0.25], [8.0], cap_mode=True)
    v = dual_classify(prob, on, anchor, [DualPoint([0.125], [16.0]), DualPoint([0.25], [8.0])])
    assert v.verdict == HOLDS and v.samples_feasible == 1
    bad = dual_classify(prob, on, DualPoint([0.125], [16.0]), [])
    assert bad.verdict == REFUTED and "not dual feasible" in bad.reason


def test_converse_check_skips_nonconvex(load):
    prob = load("ex_dual")
    cfg = make_config(prob, [0.25], [8.0], cap_mode=False)
    rep = converse_duality_check(prob, cfg, DualPoint([0.25], [8.0]), prob.grid)
    assert rep.skipped and "generalized convexity fails" in rep.reason
    assert rep.consistent


def test_fraction_values_at_anchor(load):
    prob = load("ex_dual")
    got = dual_objective(prob, [0.25], [8.0])
    assert [Fraction(g.lo) for g in got] == [Fraction(17, 8)] * 2
    assert [Fraction(g.hi) for g in got] == [Fraction(33, 8), Fraction(25, 8)]
