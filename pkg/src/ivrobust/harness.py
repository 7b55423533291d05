"""Seeded property suites for the optimality, duality and saddle-point theorems.

Every instance is a random affine problem on a box, written out as a problem
dict so a failing seed can be dumped to TOML and replayed through the CLI.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .classify import _scalarize_many, classify_point, lemma32_check
from .convexity import certify
from .model import Problem, Tolerances, problem_from_dict, robust_values
from .penalty import PenaltyOptions, solve_penalty
from .saddle import check_saddle, saddle_implies_solution
from .wolfe import DualPoint, converse_duality_check, dual_classify, make_config

GRID_COUNTS = {1: 41, 2: 17, 3: 9}
CHECKS = ("theta_implies_eps", "generalized_implies_eps_pseudo_quasi", "sufficiency_type_I", "sufficiency_type_II",
          "eps_duality", "converse_duality", "saddle_from_kkt")


def _num(c: float) -> str:
    return repr(float(c))


def _affine_text(coef, const, var="x") -> str:
    parts = [f"{_num(a)}*{var}{i + 1}" for i, a in enumerate(coef) if a != 0.0]
    parts.append(_num(const))
    return " + ".join(parts)


def random_affine_dict(rng: np.random.Generator, n: int, m: int, p: int, name: str = "") -> dict:
    """Affine objectives and uncertain affine constraints on a box.

    f^U = f^L + b.(x - lo) + d with b, d >= 0 keeps lower <= upper on S.
    g_j(x, v) = (a + v c).x + e + v d with v in [0, 1].
    """
    r2 = lambda size: np.round(rng.uniform(-2, 2, size), 2)
    lo = np.round(rng.choice([-1.0, 0.0], n), 2)
    hi = lo + 2.0
    objectives = []
    for _ in range(m):
        a, c = r2(n), float(np.round(rng.uniform(-1, 1), 2))
        b = np.round(rng.uniform(0, 1, n), 2)
        d = float(np.round(rng.uniform(0, 1), 2))
        objectives.append({"lower": _affine_text(a, c),
                           "upper": _affine_text(a + b, c + d - float(b @ lo))})
    constraints = []
    for _ in range(p):
        a = r2(n)
        cv = np.round(rng.uniform(-0.5, 0.5, n), 2)
        e = float(np.round(rng.uniform(-2, 1), 2))
        dv = float(np.round(rng.uniform(-0.5, 0.5), 2))
        terms = [f"{_num(a[i])}*x{i + 1}" for i in range(n) if a[i] != 0.0]
        terms += [f"{_num(cv[i])}*v1*x{i + 1}" for i in range(n) if cv[i] != 0.0]
        terms += [_num(e), f"{_num(dv)}*v1"]
        constraints.append({"expr": " + ".join(terms),
                            "uncertainty": {"box_lo": [0.0], "box_hi": [1.0], "grid": [5]}})
    eps = []
    for _ in range(m):
        el = float(np.round(rng.uniform(0, 0.3), 2))
        eps.append([el, float(np.round(el + rng.uniform(0.05, 0.5), 2))])
    k = GRID_COUNTS[n]
    return {
        "problem": {"n": n, "name": name},
        "objective": objectives,
        "constraint": constraints,
        "set": {"lo": lo.tolist(), "hi": hi.tolist()},
        "epsilon": {"pairs": eps},
        "grid": {"lo": lo.tolist(), "hi": hi.tolist(), "counts": [k] * n},
    }


@dataclass
class InstanceResult:
    index: int
    n: int
    m: int
    p: int
    kkt_found: bool
    dual_feasible: int = 0
    checks: dict = field(default_factory=dict)  # name -> True (passed) / False (violated) / None (vacuous)
    detail: dict = field(default_factory=dict)


@dataclass
class HarnessReport:
    seed: int
    results: list = field(default_factory=list)
    seconds: float = 0.0

    def counts(self, name: str) -> tuple[int, int, int]:
        """(passed, violated, vacuous) for one check."""
        vals = [r.checks.get(name) for r in self.results]
        return vals.count(True), vals.count(False), vals.count(None)

    @property
    def violations(self) -> list:
        return [(r.index, k, r.detail.get(k, "")) for r in self.results for k, v in r.checks.items() if v is False]

    @property
    def ok(self) -> bool:
        return not self.violations


HARNESS_PENALTY = PenaltyOptions(r0=0.1, shrink=0.1, max_outer=8, starts=4, inner_iters=300, polish=True)


def _dual_samples(prob: Problem, rng, count: int, lam_max: float, anchor: DualPoint) -> list:
    """Half uniform over S x [0, lam_max]^p, half perturbations of the anchor (mostly feasible)."""
    lo, hi = prob.S.bounds()
    k = count // 2
    Y = lo + (hi - lo) * rng.random((k, prob.n))
    L = lam_max * rng.random((k, prob.p))
    Yn = np.clip(anchor.y + 0.1 * (hi - lo) * rng.standard_normal((count - k, prob.n)), lo, hi)
    Ln = np.maximum(anchor.lam + 0.5 * rng.standard_normal((count - k, prob.p)), 0.0)
    return [DualPoint(y, l) for y, l in zip(np.vstack([Y, Yn]), np.vstack([L, Ln]))]


def check_instance(prob: Problem, index: int, rng: np.random.Generator, tols: Tolerances = Tolerances(),
                   penalty: PenaltyOptions = HARNESS_PENALTY, dual_samples: int = 100) -> InstanceResult:
    grid = prob.grid
    X = grid.points()
    XS = X[prob.S.contains(X, tols.feas)]
    run = solve_penalty(prob, penalty, tols)
    res = InstanceResult(index, prob.n, prob.m, prob.p, bool(run.success))
    chk, det = res.checks, res.detail

    z = run.z
    cls = classify_point(prob, z, grid, tols)
    lem = lemma32_check(prob, z, grid, tols, classification=cls)
    zr = XS[rng.integers(len(XS))]
    lem2 = lemma32_check(prob, zr, grid, tols)
    chk["theta_implies_eps"] = lem.ok and lem2.ok
    if not chk["theta_implies_eps"]:
        det["theta_implies_eps"] = f"at z={z.tolist()}: {lem.implications}; at {zr.tolist()}: {lem2.implications}"

    gen = certify(prob, "generalized", z, XS, tols)
    epq = certify(prob, "eps_pseudo_quasi", z, XS, tols)
    tpq = certify(prob, "theta_pseudo_quasi", z, XS, tols)
    chk["generalized_implies_eps_pseudo_quasi"] = (not gen.certified) or epq.certified
    if not chk["generalized_implies_eps_pseudo_quasi"]:
        det["generalized_implies_eps_pseudo_quasi"] = f"eps_pseudo_quasi fails at x={epq.failing_x.tolist()}"

    aeq = cls["almost_eps_quasi"]
    for key, conv in (("sufficiency_type_I", tpq), ("sufficiency_type_II", epq)):
        if run.success and conv.certified:
            chk[key] = aeq.holds
            if not aeq.holds:
                det[key] = f"z={z.tolist()} lam={run.lam.tolist()} dominated by {aeq.witness}"
        else:
            chk[key] = None

    if run.success and gen.certified:
        cfg = make_config(prob, z, run.lam, cap_mode=True, tols=tols)
        anchor = DualPoint(z, run.lam)
        lam_max = 2.0 * max(1.0, float(np.max(run.lam, initial=0.0)))
        samples = _dual_samples(prob, rng, dual_samples, lam_max, anchor)
        samples += [DualPoint(z, run.lam + e) for e in np.eye(prob.p)]
        dv = dual_classify(prob, cfg, anchor, samples, tols)
        chk["eps_duality"] = dv.holds
        res.dual_feasible = dv.samples_feasible
        if not dv.holds:
            det["eps_duality"] = f"anchor dominated by y={dv.witness.y.tolist()} lam={dv.witness.lam.tolist()}"
        conv = converse_duality_check(prob, cfg, anchor, grid, tols, convexity_samples=XS)
        chk["converse_duality"] = None if conv.skipped or not conv.hypothesis_holds else conv.consistent
        if chk["converse_duality"] is False:
            det["converse_duality"] = f"x={conv.domination_witness.tolist()} dominates y={z.tolist()}"
        sad = check_saddle(prob, z, run.lam, x_grid=XS, tols=tols)
        chk["saddle_from_kkt"] = sad.holds
        if not sad.holds:
            det["saddle_from_kkt"] = f"cond_i={sad.cond_i} lam={sad.witness_lambda}; cond_ii={sad.cond_ii} x={sad.witness_x}"
    else:
        chk["eps_duality"] = chk["converse_duality"] = chk["saddle_from_kkt"] = None
    return res


def run_harness(instances: int = 100, seed: int = 0, tols: Tolerances = Tolerances(),
                penalty: PenaltyOptions = HARNESS_PENALTY,
                progress: Optional[Callable[[InstanceResult], None]] = None) -> HarnessReport:
    rng = np.random.default_rng(seed)
    rep = HarnessReport(seed)
    t0 = time.perf_counter()
    for k in range(instances):
        n, m, p = (int(v) for v in rng.integers(1, 4, 3))
        p = min(p, 2)
        prob = problem_from_dict(random_affine_dict(rng, n, m, p, name=f"random-{seed}-{k}"))
        res = check_instance(prob, k, rng, tols, penalty)
        rep.results.append(res)
        if progress is not None:
            progress(res)
    rep.seconds = time.perf_counter() - t0
    return rep


def constant_constraint_dict(rng: np.random.Generator, n: int, m: int, p: int, name: str = "",
                             uniform: bool = True) -> dict:
    """Constraints independent of x, nonsmooth objectives, e_i^L = e_i^U.

    With ``uniform`` every precision endpoint is the same number. Without it
    the saddle condition in lambda no longer forces g_j(z) <= sqrt(theta), and
    the saddle-to-solution implication can fail (see fixtures/saddle_counterexample.toml).
    """
    d = random_affine_dict(rng, n, m, 0, name)
    for obj in d["objective"]:
        t = np.round(rng.uniform(0, 2, n), 2) + np.array(d["set"]["lo"])
        w = float(np.round(rng.uniform(0.5, 2), 2))
        kink = " + ".join(f"abs(x{i + 1} - {_num(t[i])})" for i in range(n))
        obj["lower"] = f"{obj['lower']} + {_num(w)}*({kink})"
        obj["upper"] = f"{obj['upper']} + {_num(w)}*({kink})"
    d["constraint"] = [{"expr": f"{_num(np.round(rng.uniform(-1.5, 1.5), 2))} + "
                                f"{_num(np.round(rng.uniform(-0.5, 0.5), 2))}*v1",
                        "uncertainty": {"box_lo": [0.0], "box_hi": [1.0], "grid": [3]}} for _ in range(p)]
    pairs = d["epsilon"]["pairs"]
    for pair in pairs:
        pair[0] = pair[1] if not uniform else pairs[0][1]
        pair[1] = pair[0]
    return d


@dataclass
class SaddleSuiteResult:
    index: int
    hypothesis: bool
    saddle: bool
    consistent: bool
    verdict: str
    candidate: list


def run_saddle_solution_suite(instances: int = 30, seed: int = 0, tols: Tolerances = Tolerances(),
                              candidates: int = 5, uniform: bool = True) -> list[SaddleSuiteResult]:
    """Saddle point plus monotone constraints implies almost eps-quasi Pareto."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(instances):
        n = int(rng.integers(1, 3))
        m, p = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        prob = problem_from_dict(constant_constraint_dict(rng, n, m, p, name=f"constant-{seed}-{k}", uniform=uniform))
        X = prob.grid.points()
        XS = X[prob.S.contains(X, tols.feas)]
        order = np.argsort(_scalarize_many(prob, XS), kind="stable")[:candidates]
        g = robust_values(prob, XS[0])
        lam = np.where(g > tols.sign, 1.0, 0.0)
        rep = None
        for i in order:
            rep = saddle_implies_solution(prob, XS[i], lam, prob.grid, tols=tols)
            if rep.saddle.holds:
                break
        out.append(SaddleSuiteResult(k, rep.hypothesis_holds, rep.saddle.holds, rep.consistent,
                                     rep.almost_eps_quasi, XS[i].tolist()))
    return out
