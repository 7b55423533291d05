"""Wolfe-type dual of the robust counterpart, built around a KKT anchor.

Dual objective components are L_i(y, lam) = f_i(y) + (1/2m) sum_j lam_j g_j(y),
added to both endpoints. Dual feasibility is the approximate stationarity
inclusion at y, optionally with the cap lam_j <= lam_jE on the constraints
that are positive but within sqrt(theta) at the anchor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classify import HOLDS, REFUTED, dominance_mask
from .convexity import certify
from .interval import Interval
from .kkt import check_kkt_pair, inclusion
from .model import Grid, Problem, Tolerances, in_S, objective_bounds, omega_mask, robust_values


@dataclass(frozen=True, eq=False)
class DualPoint:
    y: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        lam = np.asarray(self.lam, dtype=float).ravel()
        if np.any(lam < 0):
            raise ValueError("dual multipliers must be nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True, eq=False)
class DualConfig:
    anchor: DualPoint
    cap_mode: bool = True
    capped: tuple = ()  # indices j with 0 < g_j(z_E) <= sqrt(theta)


def make_config(prob: Problem, z, lam, cap_mode: bool = True, tols: Tolerances = Tolerances()) -> DualConfig:
    """Build the dual configuration; the anchor must be a KKT pair."""
    cert = check_kkt_pair(prob, z, lam, tols)
    if not cert.verdict:
        raise ValueError(f"anchor is not a KKT pair: {cert.reason}")
    capped = tuple(s.j for s in cert.sign_report if s.branch == "0<g<=sqrt(theta)")
    return DualConfig(DualPoint(z, lam), cap_mode, capped)


def dual_bounds(prob: Problem, Y, Lam) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays of L(y, lam) for batches: shapes ``(..., m)``."""
    Y = np.asarray(Y, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    lo, hi = objective_bounds(prob, Y)
    if prob.p:
        pen = np.sum(Lam * robust_values(prob, Y), axis=-1) / (2 * prob.m)
        lo = lo + pen[..., None]
        hi = hi + pen[..., None]
    return lo, hi


def dual_objective(prob: Problem, y, lam) -> tuple:
    y = np.asarray(y, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if y.shape[0] != prob.n or lam.shape[0] != prob.p:
        raise ValueError(f"expected y of length {prob.n} and lambda of length {prob.p}")
    lo, hi = dual_bounds(prob, y, lam)
    return tuple(Interval(a, b) for a, b in zip(lo, hi))


@dataclass
class DualMembership:
    member: bool
    inclusion_residual: float
    allowance: float
    cap_violations: list = field(default_factory=list)  # (j, lam_j, cap)
    reason: str = ""


def in_Omega_D(prob: Problem, cfg: DualConfig, y, lam, tols: Tolerances = Tolerances()) -> DualMembership:
    y = np.asarray(y, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if not in_S(prob, y, tols.feas):
        raise ValueError("y is not in S")
    inc = inclusion(prob, y, lam, tols)
    caps = []
    if cfg.cap_mode:
        for j in cfg.capped:
            if lam[j] > cfg.anchor.lam[j] + tols.feas:
                caps.append((j, float(lam[j]), float(cfg.anchor.lam[j])))
    reasons = []
    if not inc.ok:
        reasons.append(f"inclusion residual {inc.dist:.6g} exceeds sqrt(theta)")
    for j, lj, cap in caps:
        reasons.append(f"lambda_{j + 1}={lj:.6g} exceeds cap {cap:.6g}")
    return DualMembership(inc.ok and not caps, inc.dist, inc.allowance, caps, "; ".join(reasons))


def sample_dual(prob: Problem, cfg: DualConfig, grid: Grid, lam_max: float, lam_steps: int,
                tols: Tolerances = Tolerances()) -> list[DualPoint]:
    """Grid points of S crossed with a per-axis multiplier grid, filtered through Omega_D."""
    if lam_steps < 1:
        raise ValueError("lam_steps must be positive")
    Y = grid.points()
    Y = Y[prob.S.contains(Y, tols.feas)]
    axes = [np.linspace(0.0, lam_max, lam_steps)] * prob.p
    lams = np.array(np.meshgrid(*axes, indexing="ij")).reshape(prob.p, -1).T if prob.p else np.zeros((1, 0))
    out = []
    for y in Y:
        for lam in lams:
            if in_Omega_D(prob, cfg, y, lam, tols).member:
                out.append(DualPoint(y, lam))
    return out


@dataclass
class DualVerdict:
    verdict: str
    witness: Optional[DualPoint] = None
    samples_checked: int = 0
    samples_feasible: int = 0
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS


def _dual_dominates(prob: Problem, cand: DualPoint, other: DualPoint, tol_strict: float = 0.0) -> bool:
    """``L_i(y, lam) - (E_i/sqrt(theta))||y - ybar|| >=_LU L_i(ybar, lambar)`` with one strict."""
    a_lo, a_hi = dual_bounds(prob, other.y, other.lam)
    b_lo, b_hi = dual_bounds(prob, cand.y, cand.lam)
    s = float(np.linalg.norm(other.y - cand.y)) / prob.sqrt_theta
    a_lo = a_lo - s * prob.precision.hi
    a_hi = a_hi - s * prob.precision.lo
    if not (np.all(a_lo >= b_lo) and np.all(a_hi >= b_hi)):
        return False
    return bool(np.any(a_lo - b_lo > tol_strict) or np.any(a_hi - b_hi > tol_strict))


def dual_classify(prob: Problem, cfg: DualConfig, candidate: DualPoint, samples: Sequence[DualPoint],
                  tols: Tolerances = Tolerances(), assume_members: bool = False) -> DualVerdict:
    """eps-quasi Pareto check for the maximization dual over the sampled points.

    Samples outside Omega_D are skipped unless ``assume_members`` says they were
    filtered already.
    """
    mem = in_Omega_D(prob, cfg, candidate.y, candidate.lam, tols)
    if not mem.member:
        return DualVerdict(REFUTED, None, 0, 0, f"candidate is not dual feasible: {mem.reason}")
    feasible = 0
    for k, s in enumerate(samples):
        if not assume_members:
            if not in_S(prob, s.y, tols.feas) or not in_Omega_D(prob, cfg, s.y, s.lam, tols).member:
                continue
        feasible += 1
        if _dual_dominates(prob, candidate, s, tols.strict):
            return DualVerdict(REFUTED, s, k + 1, feasible, "dominating dual point found")
    return DualVerdict(HOLDS, None, len(samples), feasible)


@dataclass
class ConverseReport:
    skipped: bool
    reason: str = ""
    hypothesis_holds: bool = False
    hypothesis_witness: Optional[np.ndarray] = None
    domination_found: bool = False
    domination_witness: Optional[np.ndarray] = None
    grid_points_in_omega: int = 0

    @property
    def consistent(self) -> bool:
        """False only when the theorem's conclusion is contradicted."""
        return self.skipped or not self.hypothesis_holds or not self.domination_found


def converse_duality_check(prob: Problem, cfg: DualConfig, dual_point: DualPoint, grid: Grid,
                           tols: Tolerances = Tolerances(), convexity_samples=None) -> ConverseReport:
    y = dual_point.y
    mem = in_Omega_D(prob, cfg, y, dual_point.lam, tols)
    if not mem.member:
        return ConverseReport(True, f"dual point is not in Omega_D: {mem.reason}")
    pts = grid.points()
    samples = pts if convexity_samples is None else convexity_samples
    conv = certify(prob, "generalized", y, samples, tols)
    if not conv.certified:
        return ConverseReport(True, f"generalized convexity fails at y (sample x={conv.failing_x.tolist()})")
    X = pts[omega_mask(prob, pts, tols.feas)]
    rep = ConverseReport(False, grid_points_in_omega=int(len(X)))
    if prob.p and len(X):
        gy = robust_values(prob, y)
        gx = robust_values(prob, X)
        bad = np.flatnonzero(np.any(gx > gy + tols.feas, axis=-1))
        if bad.size:
            rep.hypothesis_holds = False
            rep.hypothesis_witness = X[bad[0]].copy()
            rep.reason = "hypothesis violated"
        else:
            rep.hypothesis_holds = True
    else:
        rep.hypothesis_holds = True
    if len(X):
        hits = np.flatnonzero(dominance_mask(prob, X, y, quasi=True, tol_strict=tols.strict))
        if hits.size:
            rep.domination_found = True
            rep.domination_witness = X[hits[0]].copy()
    return rep

