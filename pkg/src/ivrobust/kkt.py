"""Certificates for approximate KKT pairs of the robust counterpart.

The stationarity part asks whether the origin lies within sqrt(theta) of

    sum_i (dF_i^L(z) + dF_i^U(z)) + sum_j lam_j co{d_x g_j(z, v) : v active} + N(z; S)

where every subdifferential is the polytope surrogate from ``expr``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .model import Problem, Tolerances, in_S, omega_mask, robust_value, active_set
from .setcalc import DistResult, dist_origin, hull_union, normal_cone

NONPOSITIVE = "g<=0"
SLACK = "0<g<=sqrt(theta)"
VIOLATED = "g>sqrt(theta)"


@dataclass
class SignStatus:
    j: int
    g: float
    lam: float
    branch: str
    ok: bool


@dataclass
class Inclusion:
    dist: float
    allowance: float
    ok: bool
    exact_surrogate: bool
    decomposition: DistResult


@dataclass
class KktCertificate:
    verdict: bool
    inclusion_residual: float
    allowance: float
    sign_report: list = field(default_factory=list)
    decomposition: Optional[DistResult] = None
    exact_surrogate: bool = True
    reason: str = ""
    tolerances: Tolerances = field(default_factory=Tolerances)


def _check_lengths(prob: Problem, z, lam):
    z = np.asarray(z, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if z.shape[0] != prob.n:
        raise ValueError(f"point has length {z.shape[0]}, expected n={prob.n}")
    if lam.shape[0] != prob.p:
        raise ValueError(f"multiplier vector has length {lam.shape[0]}, expected p={prob.p}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite and nonnegative")
    return z, lam


def inclusion(prob: Problem, y, lam, tols: Tolerances = Tolerances()) -> Inclusion:
    """Distance from the origin to the stationarity set at ``y``, against sqrt(theta)."""
    y, lam = _check_lengths(prob, y, lam)
    terms = []
    exact = True
    for lo, hi in prob.objectives:
        for e in (lo, hi):
            r = ex.subdiff(e, y, (), tols.active)
            exact &= r.is_exact
            terms.append((1.0, r.polytope))
    for j, con in enumerate(prob.constraints):
        polys = []
        act = active_set(prob, j, y, tols.active)
        if len(act) > 1:
            exact = False
        for v in act:
            r = ex.subdiff(con.expr, y, v, tols.active)
            exact &= r.is_exact
            polys.append(r.polytope)
        terms.append((float(lam[j]), hull_union(polys)))
    cone = normal_cone(prob.S, y, tols.active)
    res = dist_origin(terms, cone)
    allowance = prob.sqrt_theta
    return Inclusion(res.dist, allowance, res.dist <= allowance + tols.incl, exact and res.converged, res)


def sign_conditions(prob: Problem, z, lam, tols: Tolerances = Tolerances()) -> list[SignStatus]:
    """Multiplier sign rules: lam_j = 0 when g_j(z) <= 0, lam_j > 0 when 0 < g_j(z) <= sqrt(theta).

    ``lam_j > 0`` is read as ``lam_j >= tol_pos`` and ``lam_j = 0`` as ``lam_j < tol_pos``.
    """
    out = []
    for j in range(prob.p):
        g = robust_value(prob, j, z)
        lj = float(lam[j])
        if g <= tols.sign:
            out.append(SignStatus(j, g, lj, NONPOSITIVE, lj < tols.pos))
        elif g <= prob.sqrt_theta + tols.feas:
            out.append(SignStatus(j, g, lj, SLACK, lj >= tols.pos))
        else:
            out.append(SignStatus(j, g, lj, VIOLATED, False))
    return out


def check_kkt_pair(prob: Problem, z, lam, tols: Tolerances = Tolerances()) -> KktCertificate:
    z, lam = _check_lengths(prob, z, lam)
    allowance = prob.sqrt_theta
    if not in_S(prob, z, tols.feas):
        return KktCertificate(False, float("nan"), allowance, reason="point is not in S", tolerances=tols)
    signs = sign_conditions(prob, z, lam, tols)
    if not bool(omega_mask(prob, z, tols.feas, slack=allowance)):
        return KktCertificate(False, float("nan"), allowance, signs, reason="point is not in Omega_E",
                              tolerances=tols)
    inc = inclusion(prob, z, lam, tols)
    reasons = []
    if not inc.ok:
        reasons.append(f"inclusion residual {inc.dist:.6g} exceeds sqrt(theta)={allowance:.6g}")
    for s in signs:
        if not s.ok:
            want = "lambda = 0" if s.branch == NONPOSITIVE else "lambda > 0"
            reasons.append(f"constraint {s.j + 1}: g={s.g:.6g} requires {want}, got {s.lam:.6g}")
    return KktCertificate(inc.ok and all(s.ok for s in signs), inc.dist, allowance, signs,
                          inc.decomposition, inc.exact_surrogate, "; ".join(reasons), tols)
