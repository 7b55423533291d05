"""Grid falsification of the approximate Pareto concepts and of the almost
theta-solution concepts of the scalarized problem.

A flag "holds-on-grid" means no falsifying point was found among the grid
points lying in Omega; it is not a proof over all of Omega.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import interval as iv
from .model import Grid, Problem, Tolerances, objective_bounds, objective_intervals, omega_mask, theta

HOLDS = "holds-on-grid"
REFUTED = "refuted"

FLAG_NAMES = (
    "eps_pareto",
    "eps_quasi_pareto",
    "almost_eps_pareto",
    "almost_eps_quasi",
    "almost_regular",
    "almost_theta",
    "almost_theta_quasi",
    "almost_theta_regular",
)

__all__ = ["Grid", "Flag", "Classification", "scalarize", "dominates_eps", "dominates_eps_quasi",
           "dominance_mask", "classify_point", "lemma32_check", "HOLDS", "REFUTED", "FLAG_NAMES"]


def scalarize(prob: Problem, x) -> float:
    lo, hi = objective_bounds(prob, np.asarray(x, dtype=float))
    return float(np.sum(lo, axis=-1) + np.sum(hi, axis=-1))


def _scalarize_many(prob: Problem, X: np.ndarray) -> np.ndarray:
    lo, hi = objective_bounds(prob, X)
    return lo.sum(axis=-1) + hi.sum(axis=-1)


def _shifted_targets(prob: Problem, z, factor) -> tuple:
    """Intervals f_i(z) - factor * E_i, built with the interval operations."""
    fz = objective_intervals(prob, z)
    return tuple(iv.sub(f, iv.scale(factor, e)) for f, e in zip(fz, prob.precision.eps))


def _dominates(prob: Problem, x, z, factor: float, tol_strict: float) -> bool:
    fx = objective_intervals(prob, x)
    target = _shifted_targets(prob, z, factor)
    strict = False
    for a, b in zip(fx, target):
        if not iv.leq_lu(a, b):
            return False
        if (b.lo - a.lo > tol_strict) or (b.hi - a.hi > tol_strict):
            strict = True
    return strict


def dominates_eps(prob: Problem, x, z, tol_strict: float = 0.0) -> bool:
    """``f_i(x) <=_LU f_i(z) - E_i`` for all i, strictly for at least one."""
    return _dominates(prob, x, z, 1.0, tol_strict)


def dominates_eps_quasi(prob: Problem, x, z, tol_strict: float = 0.0) -> bool:
    """As ``dominates_eps`` with each shift scaled by ``||x - z|| / sqrt(theta)``."""
    diff = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    d = float(np.linalg.norm(diff[None, :], axis=-1)[0])
    return _dominates(prob, x, z, d / prob.sqrt_theta, tol_strict)


def dominance_mask(prob: Problem, X, z, quasi: bool, tol_strict: float = 0.0) -> np.ndarray:
    """Vectorized ``dominates_eps`` / ``dominates_eps_quasi`` over the rows of X.

    Uses the same floating-point operations as the scalar versions, so the two
    agree bit for bit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    lo_x, hi_x = objective_bounds(prob, X)
    lo_z, hi_z = objective_bounds(prob, z)
    e_lo, e_hi = prob.precision.lo, prob.precision.hi
    if quasi:
        s = (np.linalg.norm(X - z, axis=-1) / prob.sqrt_theta)[:, None]
    else:
        s = np.ones((X.shape[0], 1))
    t_lo = lo_z - s * e_hi
    t_hi = hi_z - s * e_lo
    weak = np.all((lo_x <= t_lo) & (hi_x <= t_hi), axis=-1)
    strict = np.any((t_lo - lo_x > tol_strict) | (t_hi - hi_x > tol_strict), axis=-1)
    return weak & strict


@dataclass
class Flag:
    verdict: str
    witness: Optional[np.ndarray] = None
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS


@dataclass
class Classification:
    z: np.ndarray
    grid: Grid
    flags: dict = field(default_factory=dict)
    in_omega: bool = False
    in_omega_e: bool = False
    grid_points_in_omega: int = 0

    def __getitem__(self, name: str) -> Flag:
        return self.flags[name]


def _first(mask: np.ndarray, X: np.ndarray) -> Flag:
    hits = np.flatnonzero(mask)
    if hits.size:
        return Flag(REFUTED, X[hits[0]].copy(), "dominating point found")
    return Flag(HOLDS)


def classify_point(prob: Problem, z, grid: Grid, tols: Tolerances = Tolerances()) -> Classification:
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != prob.n or not np.all(np.isfinite(z)):
        raise ValueError(f"candidate must be a finite vector of length {prob.n}")
    if grid.dim != prob.n:
        raise ValueError(f"grid dimension {grid.dim} != n={prob.n}")
    X = grid.points()
    X = X[omega_mask(prob, X, tols.feas)]
    in_omega = bool(omega_mask(prob, z, tols.feas))
    in_omega_e = bool(omega_mask(prob, z, tols.feas, slack=prob.sqrt_theta))
    out = Classification(z, grid, {}, in_omega, in_omega_e, int(X.shape[0]))

    dom = dominance_mask(prob, X, z, quasi=False, tol_strict=tols.strict) if len(X) else np.zeros(0, bool)
    domq = dominance_mask(prob, X, z, quasi=True, tol_strict=tols.strict) if len(X) else np.zeros(0, bool)
    outside = Flag(REFUTED, None, "not in required feasible set")

    for name, mask, need in (("eps_pareto", dom, in_omega), ("eps_quasi_pareto", domq, in_omega),
                             ("almost_eps_pareto", dom, in_omega_e), ("almost_eps_quasi", domq, in_omega_e)):
        out.flags[name] = _first(mask, X) if need else outside

    if in_omega_e:
        phi_z = scalarize(prob, z)
        phi = _scalarize_many(prob, X) if len(X) else np.zeros(0)
        d = np.linalg.norm(X - z, axis=-1) if len(X) else np.zeros(0)
        out.flags["almost_theta"] = _first(phi_z > phi + theta(prob.precision), X)
        out.flags["almost_theta_quasi"] = _first(phi_z > phi + prob.sqrt_theta * d, X)
    else:
        out.flags["almost_theta"] = outside
        out.flags["almost_theta_quasi"] = outside

    for name, a, b in (("almost_regular", "almost_eps_pareto", "almost_eps_quasi"),
                       ("almost_theta_regular", "almost_theta", "almost_theta_quasi")):
        fa, fb = out.flags[a], out.flags[b]
        if fa.holds and fb.holds:
            out.flags[name] = Flag(HOLDS)
        else:
            bad = fa if not fa.holds else fb
            out.flags[name] = Flag(REFUTED, bad.witness, f"{a if bad is fa else b} refuted")
    return out


@dataclass
class ImplicationReport:
    implications: dict  # name -> (antecedent holds, consequent holds, ok)

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok in self.implications.values())


THETA_EPS_PAIRS = {
    "i": ("almost_theta", "almost_eps_pareto"),
    "ii": ("almost_theta_quasi", "almost_eps_quasi"),
    "iii": ("almost_theta_regular", "almost_regular"),
}


def lemma32_check(prob: Problem, z, grid: Grid, tols: Tolerances = Tolerances(),
                  classification: Optional[Classification] = None) -> ImplicationReport:
    """Check the three theta-to-eps implications on a computed classification.

    A violation means the implementation is wrong; the implications are exact.
    """
    c = classification if classification is not None else classify_point(prob, z, grid, tols)
    res = {}
    for key, (ante, cons) in THETA_EPS_PAIRS.items():
        a, b = c[ante].holds, c[cons].holds
        res[key] = (a, b, (not a) or b)
    return ImplicationReport(res)
