"""Quadratic-penalty construction of an almost regular theta-solution with
multipliers.

For penalty weights r_j the inner problem is

    min_{x in S}  phi(x) + sum_j (1/r_j) * max(0, g_j(x))^2

and the multipliers are read off as lam_j = (2/r_j) * max(0, g_j(z)). The outer
loop shrinks the weights of constraints whose positive part is still at least
sqrt(theta). The result is checked afterwards, never assumed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import expr as ex
from .kkt import KktCertificate, check_kkt_pair
from .model import Problem, Tolerances, omega_mask
from .classify import _scalarize_many

DYKSTRA_TOL = 1e-10
DYKSTRA_SWEEPS = 1000
DEFAULT_HALF_WIDTH = 10.0


@dataclass(frozen=True)
class PenaltyOptions:
    r0: float = 1.0
    shrink: float = 0.1
    max_outer: int = 8
    starts: int = 16
    inner_iters: int = 50_000
    seed: int = 0
    polish: bool = True
    box: Optional[tuple] = None  # (lo, hi) used for starts

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_outer < 1 or self.starts < 1 or self.inner_iters < 1:
            raise ValueError("max_outer, starts and inner_iters must be positive")


@dataclass
class OuterStep:
    r: np.ndarray
    z: np.ndarray
    gplus: np.ndarray
    value: float
    stationarity: float


@dataclass
class PenaltyRun:
    z: np.ndarray
    lam: np.ndarray
    r: np.ndarray
    history: list = field(default_factory=list)
    success: bool = False
    in_omega_e: bool = False
    kkt: Optional[KktCertificate] = None
    bounded_below: bool = True
    message: str = ""

    @property
    def conditions(self) -> dict:
        """Verdicts of the inclusion and of the two multiplier sign rules."""
        if self.kkt is None:
            return {"inclusion": False, "lambda_positive": False, "lambda_zero": False}
        signs = self.kkt.sign_report
        return {
            "inclusion": self.kkt.inclusion_residual <= self.kkt.allowance + self.kkt.tolerances.incl,
            "lambda_positive": all(s.ok for s in signs if s.branch != "g<=0"),
            "lambda_zero": all(s.ok for s in signs if s.branch == "g<=0"),
        }


def project_polyhedron(X: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = DYKSTRA_TOL,
                       max_sweeps: int = DYKSTRA_SWEEPS, box="auto") -> np.ndarray:
    """Dykstra's cyclic projection of each row of X onto ``{x : A x <= b}``.

    Boxes (every row a signed multiple of a unit vector) are clipped directly;
    pass ``box`` from ``_as_box`` to skip the detection.
    """
    X = np.array(X, dtype=float, copy=True)
    if A.shape[0] == 0:
        return X
    if isinstance(box, str):
        box = _as_box(A, b)
    if box is not None:
        return np.clip(X, box[0], box[1])
    norms = np.einsum("ij,ij->i", A, A)
    incr = np.zeros((A.shape[0],) + X.shape)
    for _ in range(max_sweeps):
        prev = X.copy()
        for k in range(A.shape[0]):
            Y = X + incr[k]
            viol = np.maximum(Y @ A[k] - b[k], 0.0) / norms[k]
            Xn = Y - viol[..., None] * A[k]
            incr[k] = Y - Xn
            X = Xn
        if np.max(np.abs(X - prev)) <= tol:
            break
    return X


def _as_box(A: np.ndarray, b: np.ndarray):
    if np.any(np.count_nonzero(A, axis=1) != 1):
        return None
    n = A.shape[1]
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for a, c in zip(A, b):
        i = int(np.flatnonzero(a)[0])
        if a[i] > 0:
            hi[i] = min(hi[i], c / a[i])
        else:
            lo[i] = max(lo[i], c / a[i])
    if np.any(lo > hi):
        return None
    return lo, hi


def search_box(prob: Problem, box=None) -> tuple[np.ndarray, np.ndarray]:
    if box is not None:
        return np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    if prob.grid is not None:
        return np.array(prob.grid.lo), np.array(prob.grid.hi)
    lo, hi = prob.S.bounds()
    lo2 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi - 2 * DEFAULT_HALF_WIDTH, -DEFAULT_HALF_WIDTH))
    hi2 = np.where(np.isfinite(hi), hi, lo2 + 2 * DEFAULT_HALF_WIDTH)
    return lo2, hi2


def _sample_box(lo, hi, per_axis):
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def bounded_below_check(prob: Problem, lo, hi, per_axis: int = 21) -> bool:
    """Heuristic: phi over S on the doubled box should not undercut the box minimum."""
    per_axis = max(3, min(per_axis, int(round(20000 ** (1.0 / prob.n)))))
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    inner = _sample_box(lo, hi, per_axis)
    outer = _sample_box(mid - 2 * half, mid + 2 * half, 2 * per_axis - 1)
    inner = inner[prob.S.contains(inner)]
    outer = outer[prob.S.contains(outer)]
    if len(inner) == 0 or len(outer) == 0:
        return True
    m_in = float(_scalarize_many(prob, inner).min())
    m_out = float(_scalarize_many(prob, outer).min())
    return m_out >= m_in - 1e-6 * (1.0 + abs(m_in))


class _Penalized:
    """Batched value and subgradient of the penalized objective."""

    def __init__(self, prob: Problem):
        self.prob = prob
        self.V = [c.uncertainty.points for c in prob.constraints]
        phi = ex.Sum(tuple(e for pair in prob.objectives for e in pair))
        self.phi = ex.compile_value_grad(phi, prob.n)

    def __call__(self, X: np.ndarray, r: np.ndarray):
        """X has shape (s, n); returns values (s,), subgradients (s, n), positive parts (s, p)."""
        prob = self.prob
        val, grad = self.phi(X)
        gplus = np.zeros(X.shape[:-1] + (prob.p,))
        rows = np.arange(X.shape[0])
        for j, vg in enumerate(prob._con_grad):
            vals, grads = vg(X[:, None, :], self.V[j])
            idx = np.argmax(vals, axis=-1)
            gmax = vals[rows, idx]
            gsel = grads[rows, idx]
            gp = np.maximum(gmax, 0.0)
            gplus[..., j] = gp
            val = val + gp * gp / r[j]
            grad = grad + (2.0 * gp / r[j])[..., None] * gsel
        return val, grad, gplus


def _inner_solve(prob: Problem, pen: _Penalized, r, starts, iters, step):
    A, b = prob.S.A, prob.S.b
    box = _as_box(A, b) if A.shape[0] else None
    X = project_polyhedron(starts, A, b, box=box)
    val, grad, _ = pen(X, r)
    best_x, best_v = X.copy(), val.copy()
    for k in range(1, iters + 1):
        gn = np.linalg.norm(grad, axis=-1, keepdims=True)
        gn[gn == 0] = 1.0
        X = X - (step / np.sqrt(k)) * grad / gn
        if A.shape[0]:
            X = project_polyhedron(X, A, b, box=box)
        val, grad, _ = pen(X, r)
        better = val < best_v
        if np.any(better):
            best_x[better] = X[better]
            best_v[better] = val[better]
    i = int(np.argmin(best_v))
    return best_x[i], float(best_v[i])


def _polish(prob: Problem, pen: _Penalized, r, x0):
    A, b = prob.S.A, prob.S.b

    def fun(x):
        v, g, _ = pen(x[None, :], r)
        return float(v[0]), g[0]

    cons = [{"type": "ineq", "fun": lambda x: b - A @ x, "jac": lambda x: -A}] if A.shape[0] else []
    res = minimize(fun, x0, jac=True, method="SLSQP", constraints=cons,
                   options={"ftol": 1e-16, "maxiter": 1000})
    x = res.x
    if A.shape[0]:
        box = _as_box(A, b)
        if box is not None or np.any(A @ x - b > DYKSTRA_TOL):
            x = project_polyhedron(x[None, :], A, b, box=box)[0]
    return x


def solve_penalty(prob: Problem, opts: PenaltyOptions = PenaltyOptions(),
                  tols: Tolerances = Tolerances()) -> PenaltyRun:
    lo, hi = search_box(prob, opts.box)
    bounded = bounded_below_check(prob, lo, hi)
    if not bounded:
        warnings.warn("phi appears unbounded below on S over the search box; results may be meaningless",
                      stacklevel=2)
    rng = np.random.default_rng(opts.seed)
    starts = lo + (hi - lo) * rng.random((opts.starts, prob.n))
    step = 0.1 * float(np.max(hi - lo)) if np.max(hi - lo) > 0 else 0.1
    pen = _Penalized(prob)
    sqrt_theta = prob.sqrt_theta

    r = np.full(prob.p, float(opts.r0))
    history = []
    z = None
    success = False
    for _ in range(opts.max_outer):
        z, _ = _inner_solve(prob, pen, r, starts, opts.inner_iters, step)
        if opts.polish:
            zp = _polish(prob, pen, r, z)
            if pen(zp[None, :], r)[0][0] <= pen(z[None, :], r)[0][0]:
                z = zp
        value, grad, gplus = pen(z[None, :], r)
        gplus = gplus[0]
        history.append(OuterStep(r.copy(), z.copy(), gplus.copy(), float(value[0]), float(np.linalg.norm(grad[0]))))
        bad = gplus >= sqrt_theta
        if not np.any(bad):
            success = True
            break
        r = np.where(bad, r * opts.shrink, r)
        # warm start the next round from the current best as well
        starts = np.vstack([z[None, :], starts[1:]])

    gplus = history[-1].gplus
    r = history[-1].r
    lam = 2.0 * gplus / r if prob.p else np.zeros(0)
    in_e = bool(omega_mask(prob, z, tols.feas, slack=sqrt_theta))
    cert = check_kkt_pair(prob, z, lam, tols) if in_e else None
    msg = "" if success else f"positive parts still >= sqrt(theta) after {opts.max_outer} rounds"
    return PenaltyRun(z, lam, r, history, success and in_e and bool(cert and cert.verdict), in_e, cert,
                      bounded, msg or (cert.reason if cert is not None and not cert.verdict else ""))
