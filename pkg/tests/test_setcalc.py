import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from ivrobust.model import GroundSet
from ivrobust.setcalc import PolyCone, Polytope, dist_origin, hull_union, normal_cone, polar, project_simplex


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=8))
def test_project_simplex_is_feasible_and_optimal(y):
    y = np.array(y)
    p = project_simplex(y)
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0)
    # optimality: no other simplex vertex improves along the segment
    for k in range(len(y)):
        e = np.zeros(len(y))
        e[k] = 1
        assert (y - p) @ (e - p) <= 1e-9


def _qp_oracle(terms, cone):
    """SLSQP over the explicit convex weights, independent of the solver under test."""
    sizes = [len(p) for _, p in terms]
    k = len(cone.generators)

    def resid(z):
        out, s = np.zeros(terms[0][1].dim), 0
        for (w, p), m in zip(terms, sizes):
            out += w * (z[s:s + m] @ p.vertices)
            s += m
        return out + z[s:] @ cone.generators

    cons, s = [], 0
    for m in sizes:
        cons.append({"type": "eq", "fun": lambda z, s=s, m=m: z[s:s + m].sum() - 1})
        s += m
    z0 = np.concatenate([np.full(m, 1 / m) for m in sizes] + [np.zeros(k)])
    best = np.inf
    rng = np.random.default_rng(0)
    for trial in range(4):
        start = z0 if trial == 0 else np.concatenate(
            [rng.dirichlet(np.ones(m)) for m in sizes] + [rng.uniform(0, 1, k)])
        r = minimize(lambda z: 0.5 * resid(z) @ resid(z), start, method="SLSQP", constraints=cons,
                     bounds=[(0, None)] * len(z0), options={"ftol": 1e-16, "maxiter": 500})
        best = min(best, float(np.linalg.norm(resid(r.x))))
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_dist_with_cone_matches_qp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    terms = [(float(rng.uniform(0.5, 2)), Polytope(rng.normal(size=(int(rng.integers(1, 4)), n)) + 1.5))
             for _ in range(int(rng.integers(1, 3)))]
    cone = PolyCone(rng.normal(size=(int(rng.integers(0, 3)), n)), n)
    got = dist_origin(terms, cone)
    assert got.converged
    assert got.dist == pytest.approx(_qp_oracle(terms, cone), abs=1e-5)
    # the reported weights reproduce the residual
    for a in got.alphas:
        assert a.min() >= 0 and a.sum() == pytest.approx(1)
    assert np.all(got.mu >= 0)


def test_dist_simple_cases():
    assert dist_origin([(1.0, Polytope([[-1.0], [1.0]]))]).dist == 0.0
    d = dist_origin([(1.0, Polytope([[1.0, 1.0], [1.0, -1.0]]))])
    assert d.dist == pytest.approx(1.0, abs=1e-8)
    # the cone -x direction cancels the offset
    d = dist_origin([(1.0, Polytope([[2.0]]))], PolyCone([[-1.0]]))
    assert d.dist == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        dist_origin([(1.0, Polytope([[1.0]]))], PolyCone.zero(2))
    with pytest.raises(ValueError):
        dist_origin([(-1.0, Polytope([[1.0]]))])


def test_cone_membership():
    c = PolyCone([[1.0, 0.0], [1.0, 1.0]])
    assert c.contains([2.0, 1.0])
    assert not c.contains([0.0, 1.0])
    assert PolyCone.zero(2).contains([0.0, 0.0])
    with pytest.raises(ValueError):
        PolyCone(np.zeros((0, 2)))


def test_normal_cone_of_box_corner():
    S = GroundSet.box([0.0, 0.0], [1.0, 1.0])
    nc = normal_cone(S, [1.0, 0.0])
    assert nc.contains([1.0, -1.0]) and not nc.contains([-1.0, 0.0])
    assert len(normal_cone(S, [0.5, 0.5]).generators) == 0
    with pytest.raises(ValueError):
        normal_cone(S, [2.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_polar_is_dual(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    c = PolyCone(rng.normal(size=(int(rng.integers(1, 4)), n)), n)
    pc = polar(c)
    if len(pc.generators):
        assert np.all(c.generators @ pc.generators.T <= 1e-9)
    # random points of the polar (by definition) are generated by pc
    for y in rng.normal(size=(20, n)):
        if np.all(c.generators @ y <= 0):
            assert pc.contains(y, tol=1e-7)


def test_hull_union():
    h = hull_union([Polytope([[0.0]]), Polytope([[1.0], [2.0]])])
    assert len(h) == 3
    with pytest.raises(ValueError):
        hull_union([Polytope([[0.0]]), Polytope([[0.0, 1.0]])])
    with pytest.raises(ValueError):
        hull_union([])
