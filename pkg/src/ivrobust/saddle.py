"""The eps-interval-valued vector Lagrangian and quasi eps-Pareto saddle points.

F_i^L(x, lam, y, mu) = f_i^L(x) + (1/2m) sum_j lam_j g_j(x)
                       + (e_i^L/sqrt(theta)) (||x - y|| - ||lam - mu||_1)

and F_i^U likewise with e_i^U. When ||lam - mu||_1 exceeds ||x - y|| the two
endpoints can cross, so the saddle scans compare raw endpoint arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classify import HOLDS, REFUTED, classify_point
from .interval import Interval, vec_gt_bounds
from .model import Grid, Problem, Tolerances, objective_bounds, omega_mask, robust_values


def lagrangian_bounds(prob: Problem, X, Lam, y, mu) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays ``(F^L, F^U)`` for batches of x and lam: shapes ``(..., m)``."""
    X = np.asarray(X, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(Lam < 0) or np.any(mu < 0):
        raise ValueError("multipliers must be nonnegative")
    lo, hi = objective_bounds(prob, X)
    if prob.p:
        pen = np.sum(Lam * robust_values(prob, X), axis=-1) / (2 * prob.m)
    else:
        pen = np.zeros(X.shape[:-1])
    dx = np.linalg.norm(X - y, axis=-1)
    dl = np.sum(np.abs(Lam - mu), axis=-1) if prob.p else np.zeros(np.shape(dx))
    shift = ((dx - dl) / prob.sqrt_theta)[..., None]
    F_lo = lo + pen[..., None] + prob.precision.lo * shift
    F_hi = hi + pen[..., None] + prob.precision.hi * shift
    return F_lo, F_hi


def lagrangian(prob: Problem, x, lam, y, mu) -> tuple:
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if x.shape[0] != prob.n or lam.shape[0] != prob.p:
        raise ValueError(f"expected x of length {prob.n} and lambda of length {prob.p}")
    lo, hi = lagrangian_bounds(prob, x, lam, y, mu)
    out = []
    for i, (a, b) in enumerate(zip(lo, hi)):
        if a > b:
            raise ValueError(f"component {i + 1} has crossed bounds [{a}, {b}]; use lagrangian_bounds")
        out.append(Interval(a, b))
    return tuple(out)


def _gt_mask(a_lo, a_hi, b_lo, b_hi) -> np.ndarray:
    """Batched vector LU dominance ``A >_LU B`` on endpoint arrays."""
    weak = np.all((a_lo >= b_lo) & (a_hi >= b_hi), axis=-1)
    strict = np.any((a_lo != b_lo) | (a_hi != b_hi), axis=-1)
    return weak & strict


@dataclass
class SaddleReport:
    cond_i: str
    cond_ii: str
    witness_lambda: Optional[np.ndarray] = None
    witness_x: Optional[np.ndarray] = None
    lam_grid_size: int = 0
    x_grid_size: int = 0
    lam_bounds: tuple = ()
    x_bounds: tuple = ()

    @property
    def holds(self) -> bool:
        return self.cond_i == HOLDS and self.cond_ii == HOLDS


def default_lambda_grid(lambar, steps: int = 17, constructed: bool = True) -> np.ndarray:
    """Per-axis grid on [0, 4 max(lambar_j, 1)] plus lambar + e_k for each k."""
    lambar = np.asarray(lambar, dtype=float).ravel()
    p = lambar.shape[0]
    if p == 0:
        return np.zeros((1, 0))
    axes = [np.linspace(0.0, 4.0 * max(l, 1.0), steps) for l in lambar]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(p, -1).T
    if constructed:
        pts = np.vstack([pts, lambar + np.eye(p)])
    return pts


def check_saddle(prob: Problem, xbar, lambar, lam_grid=None, x_grid=None,
                 tols: Tolerances = Tolerances()) -> SaddleReport:
    xbar = np.asarray(xbar, dtype=float).ravel()
    lambar = np.asarray(lambar, dtype=float).ravel()
    if xbar.shape[0] != prob.n or lambar.shape[0] != prob.p:
        raise ValueError(f"expected x of length {prob.n} and lambda of length {prob.p}")
    if np.any(lambar < 0):
        raise ValueError("multipliers must be nonnegative")
    L = default_lambda_grid(lambar) if lam_grid is None else np.asarray(lam_grid, dtype=float).reshape(-1, prob.p)
    if x_grid is None:
        if prob.grid is None:
            raise ValueError("no x grid given and the problem declares none")
        X = prob.grid.points()
        X = X[prob.S.contains(X, tols.feas)]
    elif isinstance(x_grid, Grid):
        X = x_grid.points()
        X = X[prob.S.contains(X, tols.feas)]
    else:
        X = np.asarray(x_grid, dtype=float).reshape(-1, prob.n)

    ref_lo, ref_hi = lagrangian_bounds(prob, xbar, lambar, xbar, lambar)
    rep = SaddleReport(HOLDS, HOLDS, lam_grid_size=len(L), x_grid_size=len(X),
                       lam_bounds=(L.min(axis=0).tolist(), L.max(axis=0).tolist()) if prob.p else ((), ()),
                       x_bounds=(X.min(axis=0).tolist(), X.max(axis=0).tolist()))

    a_lo, a_hi = lagrangian_bounds(prob, np.broadcast_to(xbar, (len(L), prob.n)), L, xbar, lambar)
    hits = np.flatnonzero(_gt_mask(a_lo, a_hi, ref_lo, ref_hi))
    if hits.size:
        rep.cond_i = REFUTED
        rep.witness_lambda = L[hits[0]].copy()

    b_lo, b_hi = lagrangian_bounds(prob, X, np.broadcast_to(lambar, (len(X), prob.p)), xbar, lambar)
    hits = np.flatnonzero(_gt_mask(ref_lo, ref_hi, b_lo, b_hi))
    if hits.size:
        rep.cond_ii = REFUTED
        rep.witness_x = X[hits[0]].copy()
    return rep


def replay_witness(prob: Problem, xbar, lambar, rep: SaddleReport) -> dict:
    """Re-evaluate each witness with the scalar comparison; True means it still refutes."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    lambar = np.asarray(lambar, dtype=float).ravel()
    ref = lagrangian_bounds(prob, xbar, lambar, xbar, lambar)
    out = {}
    if rep.witness_lambda is not None:
        a = lagrangian_bounds(prob, xbar, rep.witness_lambda, xbar, lambar)
        out["cond_i"] = vec_gt_bounds(a[0], a[1], ref[0], ref[1])
    if rep.witness_x is not None:
        b = lagrangian_bounds(prob, rep.witness_x, lambar, xbar, lambar)
        out["cond_ii"] = vec_gt_bounds(ref[0], ref[1], b[0], b[1])
    return out


@dataclass
class SaddleSolutionReport:
    hypothesis_holds: bool
    saddle: SaddleReport
    claim_checked: bool = False
    almost_eps_quasi: str = ""
    in_omega_e: bool = False
    hypothesis_witness: Optional[np.ndarray] = None
    reason: str = ""

    @property
    def consistent(self) -> bool:
        """False only when both hypotheses hold and the classifier disagrees."""
        return not self.claim_checked or self.almost_eps_quasi == HOLDS


def saddle_implies_solution(prob: Problem, xbar, lambar, grid: Grid, lam_grid=None,
                            tols: Tolerances = Tolerances()) -> SaddleSolutionReport:
    """Check: saddle point and g_j(x) <= g_j(xbar) on S imply almost eps-quasi Pareto.

    Hypotheses are checked on the grid; the conclusion is checked by the classifier.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    X = grid.points()
    XS = X[prob.S.contains(X, tols.feas)]
    witness = None
    if prob.p and len(XS):
        gx = robust_values(prob, XS)
        gz = robust_values(prob, xbar)
        bad = np.flatnonzero(np.any(gx > gz + tols.feas, axis=-1))
        if bad.size:
            witness = XS[bad[0]].copy()
    sad = check_saddle(prob, xbar, lambar, lam_grid, XS, tols)
    rep = SaddleSolutionReport(witness is None, sad, hypothesis_witness=witness,
                               in_omega_e=bool(omega_mask(prob, xbar, tols.feas, slack=prob.sqrt_theta)))
    if witness is not None:
        rep.reason = "hypothesis violated"
        return rep
    if not sad.holds:
        rep.reason = "not a saddle point on the grids"
        return rep
    c = classify_point(prob, xbar, grid, tols)
    rep.claim_checked = True
    rep.almost_eps_quasi = c["almost_eps_quasi"].verdict
    if not rep.consistent:
        rep.reason = c["almost_eps_quasi"].reason
    return rep
