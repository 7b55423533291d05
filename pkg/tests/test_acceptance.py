"""The ten acceptance criteria, each at its stated tolerance and time budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from ivrobust import interval as iv
from ivrobust.classify import HOLDS, REFUTED, classify_point
from ivrobust.convexity import CERTIFIED, COUNTEREXAMPLE, certify
from ivrobust.harness import CHECKS, run_harness
from ivrobust.kkt import SLACK, check_kkt_pair
from ivrobust.model import Grid
from ivrobust.penalty import PenaltyOptions, solve_penalty
from ivrobust.saddle import check_saddle, lagrangian, replay_witness
from ivrobust.setcalc import Polytope, dist_origin
from ivrobust.wolfe import DualPoint, dual_classify, dual_objective, in_Omega_D, make_config, sample_dual


def _random_interval(rng):
    if rng.random() < 0.3:
        a, b = sorted(rng.integers(-20, 21, 2).astype(float))
    else:
        a, b = sorted(rng.uniform(-1e3, 1e3, 2))
    return iv.Interval(a, b)


@pytest.mark.criterion(1, "interval core: 10^4 random cases, closure, order chain, exact formulas")
def test_interval_core():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    for _ in range(10_000):
        a, b = _random_interval(rng), _random_interval(rng)
        k = float(rng.choice([rng.uniform(-50, 50), 0.0, float(rng.integers(-5, 6))]))
        s, d, c = iv.add(a, b), iv.sub(a, b), iv.scale(k, a)
        # closure: constructors validate lo <= hi, so reaching here is closure; check anyway
        assert s.lo <= s.hi and d.lo <= d.hi and c.lo <= c.hi
        # exactness against the set definition: endpoints are the extreme endpoint combinations
        assert (s.lo, s.hi) == (a.lo + b.lo, a.hi + b.hi)
        diffs = [x - y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
        assert (d.lo, d.hi) == (min(diffs), max(diffs))
        prods = [k * a.lo, k * a.hi]
        assert (c.lo, c.hi) == (min(prods), max(prods))
        # order chain
        for x, y in ((a, b), (b, a), (a, a)):
            if iv.lt_s_lu(x, y):
                assert iv.lt_lu(x, y)
            if iv.lt_lu(x, y):
                assert iv.leq_lu(x, y)
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2, "ex_almost: almost_eps_pareto holds, eps_pareto refuted (z not in Omega)")
def test_example_31(load):
    prob = load("ex_almost")
    t0 = time.perf_counter()
    grid = Grid.from_step([0.0, 0.0], [2.0, 2.0], 0.05)
    c = classify_point(prob, [1.0, 2.0], grid)
    elapsed = time.perf_counter() - t0
    assert grid.counts == (41, 41)
    assert c["almost_eps_pareto"].verdict == HOLDS
    assert c["eps_pareto"].verdict == REFUTED
    assert not c.in_omega and c.in_omega_e
    assert c["eps_pareto"].reason == "not in required feasible set"
    assert elapsed < 2.0


@pytest.mark.criterion(3, "KKT fixtures: three certified pairs, residuals <= 1e-9, g=15/16 in (0, sqrt(theta)]")
def test_kkt_fixtures(load):
    cert = check_kkt_pair(load("ex_suff2"), [0.0], [4.0])
    assert cert.verdict and cert.inclusion_residual <= 1e-9

    cert = check_kkt_pair(load("ex_suff1"), [0.0, 0.0], [3.0, 1.0])
    assert cert.verdict and cert.inclusion_residual <= 1e-9

    prob = load("ex_dual")
    cert = check_kkt_pair(prob, [0.25], [8.0])
    assert cert.verdict
    (s,) = cert.sign_report
    assert s.g == 15 / 16 and s.branch == SLACK
    assert 0 < s.g <= prob.sqrt_theta


def _penalty_oracle_suff2(r):
    # phi = 4x + 3, g = 1 - x: stationarity 4 = (2/r)(1 - x)
    return np.array([1 - 2 * r]), np.array([4.0])


def _penalty_oracle_suff1(r):
    # phi = 3 x1 + 4 x2 + 6, g1 = 1 - x1, g2 = 1 - 2 x2
    return np.array([1 - 1.5 * r, (1 - r) / 2]), np.array([3.0, 2.0])


@pytest.mark.criterion(4, "penalty solver matches closed-form multipliers; KKT and almost_theta_quasi hold")
@pytest.mark.parametrize("name,r,oracle", [("ex_suff2", 0.05, _penalty_oracle_suff2),
                                           ("ex_suff1", 0.01, _penalty_oracle_suff1)])
def test_penalty(load, name, r, oracle):
    prob = load(name)
    t0 = time.perf_counter()
    run = solve_penalty(prob, PenaltyOptions(r0=r))
    elapsed = time.perf_counter() - t0
    z_star, lam_star = oracle(r)
    assert np.all(run.r == r)
    assert np.max(np.abs(run.lam - lam_star)) <= 1e-6
    assert np.max(np.abs(run.z - z_star)) <= 1e-3
    assert run.success and check_kkt_pair(prob, run.z, run.lam).verdict
    assert classify_point(prob, run.z, prob.grid)["almost_theta_quasi"].holds
    assert elapsed < 30.0


@pytest.mark.criterion(5, "dual objective exact at (1/4, 8) and (1/8, 16)")
def test_dual_objective(load):
    prob = load("ex_dual")

    def by_hand(y, lam):
        # f1 = [y, y + 2], f2 = [y, y + 1], g(y) = max_v (-y^2 - v + 1) = 1 - y^2, m = 2
        pen = Fraction(lam) * (1 - y * y) / 4
        return ((y + pen, y + 2 + pen), (y + pen, y + 1 + pen))

    for y, lam in ((Fraction(1, 4), 8), (Fraction(1, 8), 16)):
        got = dual_objective(prob, [float(y)], [float(lam)])
        want = by_hand(y, lam)
        assert [(g.lo, g.hi) for g in got] == [(float(a), float(b)) for a, b in want]
    assert [(g.lo, g.hi) for g in dual_objective(prob, [0.25], [8.0])] == [(17 / 8, 33 / 8), (17 / 8, 25 / 8)]
    assert [(g.lo, g.hi) for g in dual_objective(prob, [0.125], [16.0])] == [(65 / 16, 97 / 16), (65 / 16, 81 / 16)]


@pytest.mark.criterion(6, "dual counterexample: refuted by (1/8, 16) without the cap, rejected with it")
def test_dual_counterexample(load):
    prob = load("ex_dual")
    anchor = DualPoint([0.25], [8.0])
    witness = DualPoint([0.125], [16.0])

    off = make_config(prob, [0.25], [8.0], cap_mode=False)
    v = dual_classify(prob, off, anchor, [witness])
    assert v.verdict == REFUTED
    assert v.witness.y.tolist() == [0.125] and v.witness.lam.tolist() == [16.0]
    # the sampled Omega_D also contains it and the anchor is refuted there too
    samples = sample_dual(prob, off, prob.grid, 16.0, 9)
    assert any(s.y[0] == 0.125 and s.lam[0] == 16.0 for s in samples)
    assert dual_classify(prob, off, anchor, samples, assume_members=True).verdict == REFUTED

    on = make_config(prob, [0.25], [8.0], cap_mode=True)
    mem = in_Omega_D(prob, on, [0.125], [16.0])
    assert not mem.member
    assert mem.cap_violations == [(0, 16.0, 8.0)]


@pytest.mark.criterion(7, "Lagrangian exact at (0,4,0,4) and (-2,4,0,4); cond (ii) refuted by x=-2")
def test_lagrangian(load):
    prob = load("ex_saddle")
    assert [(a.lo, a.hi) for a in lagrangian(prob, [0.0], [4.0], [0.0], [4.0])] == [(1.0, 2.0), (1.0, 2.0)]
    assert [(a.lo, a.hi) for a in lagrangian(prob, [-2.0], [4.0], [0.0], [4.0])] == [(-1.0, 1.0), (-1.0, 1.0)]
    x_grid = Grid([-2.0], [3.0], [51])
    rep = check_saddle(prob, [0.0], [4.0], x_grid=x_grid)
    assert rep.cond_ii == REFUTED
    assert rep.witness_x.tolist() == [-2.0]
    assert replay_witness(prob, [0.0], [4.0], rep) == {"cond_ii": True}


@pytest.mark.criterion(8, "convexity on ex_nonconvex: generalized fails on the -x^2 row, eps_pseudo_quasi certified")
def test_convexity_example_33(load):
    prob = load("ex_nonconvex")
    samples = Grid.from_step([0.0], [3.0], 0.01).points()
    assert len(samples) == 301
    gen = certify(prob, "generalized", [0.0], samples)
    assert gen.status == COUNTEREXAMPLE
    x = float(gen.failing_x[0])
    assert x > 0
    assert gen.failing_row.startswith("g1(x,v) - g1(z,v)")
    assert gen.violation == pytest.approx(x * x, abs=1e-12)
    eps = certify(prob, "eps_pseudo_quasi", [0.0], samples)
    assert eps.status == CERTIFIED and eps.samples == 301


@pytest.mark.criterion(9, "theorem property suites on 100 random affine instances: zero violations")
def test_property_suites():
    t0 = time.perf_counter()
    rep = run_harness(100, seed=0)
    elapsed = time.perf_counter() - t0
    assert rep.violations == []
    for name in ("theta_implies_eps", "sufficiency_type_I", "sufficiency_type_II", "eps_duality", "saddle_from_kkt"):
        passed, violated, vacuous = rep.counts(name)
        assert violated == 0
        assert passed >= 90, f"{name} checked only {passed} times"
    assert set(CHECKS) <= set(rep.results[0].checks)
    assert elapsed < 600


def _barycentric_grid(k, steps):
    """All weight vectors of length k with entries in {0, 1/steps, ..., 1} summing to 1."""
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        t = np.arange(steps + 1) / steps
        return np.stack([t, 1 - t], axis=1)
    i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
    keep = i + j <= steps
    i, j = i[keep], j[keep]
    return np.stack([i, j, steps - i - j], axis=1) / steps


def _grid_oracle(terms, n, step=1e-3):
    """Exhaustive convex-combination grid over the Minkowski sum.

    The sum of the hulls is the hull of all vertex sums; the nearest point to
    the origin is a combination of at most n + 1 of those, so every (n+1)-subset
    is gridded at ``step`` and the best cell is then refined.
    """
    pts = np.array([sum(w * p.vertices[i] for (w, p), i in zip(terms, idx))
                    for idx in itertools.product(*[range(len(p)) for _, p in terms])])
    pts = np.unique(pts, axis=0)
    k = min(n + 1, len(pts))
    steps = int(round(1 / step))
    W = _barycentric_grid(k, steps)
    best, best_sub, best_w = np.inf, None, None
    for sub in itertools.combinations(range(len(pts)), k):
        P = pts[list(sub)]
        d = np.linalg.norm(W @ P, axis=1)
        i = int(np.argmin(d))
        if d[i] < best:
            best, best_sub, best_w = float(d[i]), P, W[i]
    # refine: a fine local grid around the best weights
    Wf = best_w + (_barycentric_grid(k, 200) - 1.0 / k) * (2 * step)
    Wf = Wf[np.all(Wf >= 0, axis=1)]
    Wf = Wf / Wf.sum(axis=1, keepdims=True)
    return min(best, float(np.min(np.linalg.norm(Wf @ best_sub, axis=1))))


@pytest.mark.criterion(10, "dist_origin agrees with an exhaustive grid oracle within 1e-4 (50 instances)")
def test_dist_origin_grid_oracle():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 3))
        total = int(rng.integers(2, 7))
        cuts = sorted(rng.choice(np.arange(1, total), size=int(rng.integers(0, min(2, total - 1) + 1)),
                                 replace=False).tolist())
        sizes = np.diff([0] + cuts + [total])
        terms = [(float(rng.uniform(0.2, 2.0)), Polytope(rng.uniform(-1, 1, (int(s), n)) + rng.uniform(-1, 1, n)))
                 for s in sizes]
        got = dist_origin(terms).dist
        want = _grid_oracle(terms, n)
        worst = max(worst, abs(got - want))
        assert abs(got - want) <= 1e-4, (got, want)
    assert worst <= 1e-4
