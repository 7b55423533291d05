"""Sample-based certification of the three generalized-convexity notions at z.

For every sample x in S and every choice of subgradient vertices at z, the
definition asks for some omega in the polar of N(z; S) with ||omega|| <= ||x - z||
satisfying linear rows <a, omega> <= c. Each such system is a small convex
feasibility problem: minimize the largest row violation over the ball.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import expr as ex
from .model import Problem, Tolerances, active_set, in_S, objective_bounds
from .setcalc import normal_cone

NOTIONS = ("generalized", "theta_pseudo_quasi", "eps_pseudo_quasi")
CERTIFIED = "certified-on-samples"
COUNTEREXAMPLE = "counterexample"


@dataclass
class RowSystem:
    A: np.ndarray  # (k, n)
    c: np.ndarray  # (k,)
    labels: list
    radius: float


@dataclass
class Feasibility:
    feasible: bool
    omega: np.ndarray
    violation: float
    worst_row: str


@dataclass
class ConvexityVerdict:
    notion: str
    status: str
    samples: int = 0
    systems: int = 0
    witnesses: list = field(default_factory=list)  # (x, omega) for the first selection per sample
    failing_x: Optional[np.ndarray] = None
    failing_selection: Optional[dict] = None
    failing_row: str = ""
    violation: float = 0.0

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def solve_rows(sys: RowSystem, tol_feas: float, hint: Optional[np.ndarray] = None) -> Feasibility:
    """Minimize ``max_k (A omega - c)_k`` over ``||omega|| <= radius``."""
    n = sys.A.shape[1] if sys.A.size else (len(hint) if hint is not None else 0)

    def worst(w):
        if sys.A.shape[0] == 0:
            return 0.0, ""
        r = sys.A @ w - sys.c
        k = int(np.argmax(r))
        return float(r[k]), sys.labels[k]

    cands = [np.zeros(n)]
    if hint is not None and np.linalg.norm(hint) <= sys.radius * (1 + 1e-12):
        cands.append(np.asarray(hint, dtype=float))
    best = None
    for w in cands:
        v, lab = worst(w)
        if best is None or v < best.violation:
            best = Feasibility(v <= tol_feas, w, v, lab)
        if v <= tol_feas:
            return best
    if sys.radius <= 0 or sys.A.shape[0] == 0:
        return best

    r2 = sys.radius ** 2
    x0 = np.append(best.omega, max(best.violation, 0.0))
    cons = [
        {"type": "ineq", "fun": lambda y: y[-1] - (sys.A @ y[:-1] - sys.c),
         "jac": lambda y: np.hstack([-sys.A, np.ones((sys.A.shape[0], 1))])},
        {"type": "ineq", "fun": lambda y: np.array([r2 - y[:-1] @ y[:-1]]),
         "jac": lambda y: np.append(-2 * y[:-1], 0.0)[None, :]},
    ]
    res = minimize(lambda y: y[-1], x0, jac=lambda y: np.append(np.zeros(n), 1.0), method="SLSQP",
                   constraints=cons, options={"ftol": 1e-14, "maxiter": 500})
    w = res.x[:-1]
    nw = np.linalg.norm(w)
    if nw > sys.radius:
        w = w * (sys.radius / nw)
    v, lab = worst(w)
    if v < best.violation:
        best = Feasibility(v <= tol_feas, w, v, lab)
    return best


class _Context:
    """Subgradient data at z shared by all samples."""

    def __init__(self, prob: Problem, z: np.ndarray, tols: Tolerances):
        self.prob = prob
        self.z = z
        self.tols = tols
        self.cone = normal_cone(prob.S, z, tols.active).generators
        self.obj_polys = []  # (label, Polytope)
        for i, (lo, hi) in enumerate(prob.objectives):
            self.obj_polys.append((f"f{i + 1}L", ex.subdiff(lo, z, (), tols.active).polytope))
            self.obj_polys.append((f"f{i + 1}U", ex.subdiff(hi, z, (), tols.active).polytope))
        self.con_polys = []  # (j, v, Polytope)
        for j, con in enumerate(prob.constraints):
            for v in active_set(prob, j, z, tols.active):
                self.con_polys.append((j, v, ex.subdiff(con.expr, z, v, tols.active).polytope))
        lo, hi = objective_bounds(prob, z)
        self.fz_lo, self.fz_hi = lo, hi
        self.gz = [float(prob._con_eval[j](z, v)) for j, v, _ in self.con_polys]

    def selections(self):
        polys = [p for _, p in self.obj_polys] + [p for _, _, p in self.con_polys]
        return itertools.product(*[range(len(p.vertices)) for p in polys])

    def describe(self, sel) -> dict:
        out = {}
        k = 0
        for lab, p in self.obj_polys:
            out[lab] = p.vertices[sel[k]].tolist()
            k += 1
        for j, v, p in self.con_polys:
            out[f"g{j + 1}@v={v.tolist()}"] = p.vertices[sel[k]].tolist()
            k += 1
        return out


def build_rows(ctx: _Context, notion: str, x: np.ndarray, sel) -> RowSystem:
    prob, z, tols = ctx.prob, ctx.z, ctx.tols
    d = float(np.linalg.norm(x - z))
    rows, rhs, labels = [], [], []
    for k, gvec in enumerate(ctx.cone):
        rows.append(gvec)
        rhs.append(0.0)
        labels.append(f"polar cone generator {k + 1}")
    m = prob.m
    obj_sub = [ctx.obj_polys[k][1].vertices[sel[k]] for k in range(2 * m)]
    con_sub = [ctx.con_polys[k][2].vertices[sel[2 * m + k]] for k in range(len(ctx.con_polys))]
    fx_lo, fx_hi = objective_bounds(prob, x)
    gx = [float(prob._con_eval[j](x, v)) for j, v, _ in ctx.con_polys]
    sqrt_theta = prob.sqrt_theta

    if notion == "generalized":
        for i in range(m):
            rows.append(obj_sub[2 * i])
            rhs.append(float(fx_lo[i] - ctx.fz_lo[i]))
            labels.append(f"f{i + 1}L(x) - f{i + 1}L(z) >= <z*, omega>")
            rows.append(obj_sub[2 * i + 1])
            rhs.append(float(fx_hi[i] - ctx.fz_hi[i]))
            labels.append(f"f{i + 1}U(x) - f{i + 1}U(z) >= <z*, omega>")
        for k, (j, v, _) in enumerate(ctx.con_polys):
            rows.append(con_sub[k])
            rhs.append(gx[k] - ctx.gz[k])
            labels.append(f"g{j + 1}(x,v) - g{j + 1}(z,v) >= <x*_v, omega> at v={v.tolist()}")
    else:
        if notion == "theta_pseudo_quasi":
            phi_x = float(fx_lo.sum() + fx_hi.sum())
            phi_z = float(ctx.fz_lo.sum() + ctx.fz_hi.sum())
            if phi_x < phi_z - sqrt_theta * d - tols.feas:
                rows.append(np.sum(obj_sub, axis=0))
                rhs.append(-sqrt_theta * d - tols.delta_strict)
                labels.append("phi(x) < phi(z) - sqrt(theta)|x-z| forces sum <z*, omega> < -sqrt(theta)|x-z|")
        else:
            e_lo, e_hi = prob.precision.lo, prob.precision.hi
            for i in range(m):
                for side, fx, fz, e, sub in (("L", fx_lo[i], ctx.fz_lo[i], e_hi[i], obj_sub[2 * i]),
                                             ("U", fx_hi[i], ctx.fz_hi[i], e_lo[i], obj_sub[2 * i + 1])):
                    shift = e / sqrt_theta * d
                    if fx < fz - shift - tols.feas:
                        rows.append(sub)
                        rhs.append(-shift - tols.delta_strict)
                        labels.append(f"f{i + 1}{side}(x) below its shifted value forces <z*, omega> < -shift")
        for k, (j, v, _) in enumerate(ctx.con_polys):
            if gx[k] <= ctx.gz[k]:
                rows.append(con_sub[k])
                rhs.append(0.0)
                labels.append(f"g{j + 1}(x,v) <= g{j + 1}(z,v) forces <x*_v, omega> <= 0 at v={v.tolist()}")
    n = prob.n
    A = np.array(rows, dtype=float).reshape(-1, n)
    return RowSystem(A, np.array(rhs, dtype=float), labels, d)


def certify(prob: Problem, notion: str, z, samples, tols: Tolerances = Tolerances()) -> ConvexityVerdict:
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}; expected one of {', '.join(NOTIONS)}")
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != prob.n:
        raise ValueError(f"point has length {z.shape[0]}, expected n={prob.n}")
    if not in_S(prob, z, tols.feas):
        raise ValueError("z must lie in S")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    samples = samples[prob.S.contains(samples, tols.feas)]
    ctx = _Context(prob, z, tols)
    out = ConvexityVerdict(notion, CERTIFIED, samples=int(len(samples)))
    sels = list(ctx.selections())
    for x in samples:
        for k, sel in enumerate(sels):
            sys = build_rows(ctx, notion, x, sel)
            res = solve_rows(sys, tols.feas, hint=x - z)
            out.systems += 1
            if not res.feasible:
                out.status = COUNTEREXAMPLE
                out.failing_x = x.copy()
                out.failing_selection = ctx.describe(sel)
                out.failing_row = res.worst_row
                out.violation = res.violation
                return out
            if k == 0:
                out.witnesses.append((x.copy(), res.omega.copy()))
    return out


def replay(prob: Problem, notion: str, z, x, tols: Tolerances = Tolerances()) -> float:
    """Smallest achievable violation over all selections at the sample x."""
    z = np.asarray(z, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    ctx = _Context(prob, z, tols)
    worst = -np.inf
    for sel in ctx.selections():
        res = solve_rows(build_rows(ctx, notion, x, sel), tols.feas, hint=x - z)
        worst = max(worst, res.violation)
    return worst


__all__ = ["NOTIONS", "CERTIFIED", "COUNTEREXAMPLE", "ConvexityVerdict", "RowSystem", "Feasibility",
           "certify", "replay", "solve_rows", "build_rows"]
