import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from ivrobust.kkt import check_kkt_pair
from ivrobust.penalty import PenaltyOptions, project_polyhedron, solve_penalty


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dykstra_matches_qp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    A = rng.normal(size=(int(rng.integers(1, 5)), n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0, 1, len(A))  # x0 is strictly feasible
    y = rng.normal(scale=3, size=n)
    got = project_polyhedron(y[None, :], A, b)[0]
    ref = minimize(lambda x: 0.5 * np.sum((x - y) ** 2), x0, jac=lambda x: x - y, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda x: b - A @ x, "jac": lambda x: -A}],
                   options={"ftol": 1e-14, "maxiter": 500})
    assert np.all(A @ got <= b + 1e-8)
    np.testing.assert_allclose(got, ref.x, atol=1e-6)


def test_box_projection_is_clipping():
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    b = np.array([1.0, 0.0, 2.0])
    out = project_polyhedron(np.array([[3.0, 5.0], [-1.0, 1.0]]), A, b)
    assert out.tolist() == [[1.0, 2.0], [0.0, 1.0]]


@pytest.mark.parametrize("r", [0.1, 0.05])
def test_closed_form_trajectory(load, r):
    # phi = 4x + 3 and g = 1 - x: the penalized minimizer is 1 - 2r, lambda = 4
    prob = load("ex_suff2")
    run = solve_penalty(prob, PenaltyOptions(r0=r, starts=4))
    assert run.z[0] == pytest.approx(1 - 2 * r, abs=1e-6)
    assert run.lam[0] == pytest.approx(4.0, abs=1e-5)
    assert run.success and run.in_omega_e
    assert run.conditions == {"inclusion": True, "lambda_positive": True, "lambda_zero": True}
    assert check_kkt_pair(prob, run.z, run.lam).verdict


def test_per_constraint_shrink(load):
    # with r0 = 1 the minimizer is pinned at x = 0 where g = 1 = sqrt(theta), so r has to shrink
    prob = load("ex_suff2")
    run = solve_penalty(prob, PenaltyOptions(r0=1.0, starts=4))
    assert len(run.history) >= 2
    assert run.r[0] < 1.0
    assert all(h.gplus[0] >= prob.sqrt_theta for h in run.history[:-1])
    assert run.history[-1].gplus[0] < prob.sqrt_theta


@pytest.mark.parametrize("kw", [{"r0": 0}, {"shrink": 1.0}, {"shrink": 0.0}, {"starts": 0}, {"max_outer": 0}])
def test_options_validate(kw):
    with pytest.raises(ValueError):
        PenaltyOptions(**kw)


def test_deterministic(load):
    prob = load("ex_suff1")
    a = solve_penalty(prob, PenaltyOptions(r0=0.01, starts=2, inner_iters=2000, seed=3))
    b = solve_penalty(prob, PenaltyOptions(r0=0.01, starts=2, inner_iters=2000, seed=3))
    assert a.z.tolist() == b.z.tolist() and a.lam.tolist() == b.lam.tolist()
