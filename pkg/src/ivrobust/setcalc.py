"""Polytopes, polyhedral cones and the distance from the origin to
``sum_t w_t P_t + cone``.

Minkowski sums are never expanded; ``dist_origin`` optimizes directly over one
convex-weight vector per polytope and nonnegative cone coefficients.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_POLAR_DIM = 4
CERTIFIED_DIM = 4


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a finite vertex list (duplicates allowed)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.size == 0 or v.shape[0] == 0:
            raise ValueError("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]


@dataclass(frozen=True, eq=False)
class PolyCone:
    """Nonnegative combinations of ``generators``; no generators means ``{0}``."""

    generators: np.ndarray
    dim: int = field(default=-1)

    def __post_init__(self):
        g = np.asarray(self.generators, dtype=float)
        dim = self.dim
        if g.size == 0:
            if dim < 0:
                raise ValueError("an empty cone needs an explicit dimension")
            g = np.zeros((0, dim))
        else:
            g = np.atleast_2d(g)
            if dim >= 0 and g.shape[1] != dim:
                raise ValueError(f"generator dimension {g.shape[1]} != {dim}")
            dim = g.shape[1]
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def zero(cls, n: int) -> "PolyCone":
        return cls(np.zeros((0, n)), n)

    def contains(self, y, tol: float = 1e-9) -> bool:
        """Membership via nonnegative least squares on the generators."""
        y = np.asarray(y, dtype=float)
        if len(self.generators) == 0:
            return bool(np.linalg.norm(y) <= tol)
        from scipy.optimize import nnls
        _, resid = nnls(self.generators.T, y)
        return bool(resid <= tol)


def normal_cone(S, z: Sequence[float], tol_active: float = 1e-9) -> PolyCone:
    """Normal cone of the polyhedron ``{x : A x <= b}`` at ``z``.

    Generated by the outward normals of the active halfspaces; for a convex
    polyhedron this is also the limiting normal cone.
    """
    A = np.asarray(S.A, dtype=float).reshape(-1, len(z))
    b = np.asarray(S.b, dtype=float)
    z = np.asarray(z, dtype=float)
    slack = A @ z - b
    if np.any(slack > tol_active):
        k = int(np.argmax(slack))
        raise ValueError(f"point is outside the ground set (halfspace {k} violated by {slack[k]:.3g})")
    active = slack >= -tol_active
    return PolyCone(A[active], len(z))


def _null_space(M: np.ndarray, n: int, rtol: float = 1e-12) -> np.ndarray:
    if M.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > rtol * max(1.0, s.max() if s.size else 0.0)))
    return vt[rank:].T


def polar(c: PolyCone, tol: float = 1e-10) -> PolyCone:
    """Generators of ``{y : <y, g> <= 0 for every generator g}``.

    Extreme rays are enumerated facet-wise: each ray of the pointed part is
    cut out by ``rank - 1`` independent tight generators. Lineality
    directions are returned in both signs.
    """
    n = c.dim
    if n > MAX_POLAR_DIM:
        raise ValueError(f"polar supports dimension <= {MAX_POLAR_DIM}, got {n}")
    G = c.generators
    G = G[np.linalg.norm(G, axis=1) > tol] if len(G) else G
    lineality = _null_space(G, n)
    gens = [s * lineality[:, k] for k in range(lineality.shape[1]) for s in (1.0, -1.0)]
    rank = n - lineality.shape[1]
    if rank > 0:
        seen = []
        for rows in itertools.combinations(range(len(G)), rank - 1):
            M = np.vstack([G[list(rows)].reshape(-1, n), lineality.T.reshape(-1, n)])
            ns = _null_space(M, n)
            if ns.shape[1] != 1:
                continue
            d = ns[:, 0]
            for cand in (d, -d):
                if np.all(G @ cand <= tol):
                    cand = cand / np.linalg.norm(cand)
                    if not any(np.allclose(cand, s, atol=1e-9) for s in seen):
                        seen.append(cand)
        gens.extend(seen)
    if not gens:
        return PolyCone.zero(n)
    return PolyCone(np.array(gens) + 0.0, n)


def hull_union(ps: Sequence[Polytope]) -> Polytope:
    if not ps:
        raise ValueError("hull_union needs at least one polytope")
    dims = {p.dim for p in ps}
    if len(dims) != 1:
        raise ValueError(f"polytopes have mixed dimensions {sorted(dims)}")
    return Polytope(np.vstack([p.vertices for p in ps]))


@dataclass
class DistResult:
    dist: float
    alphas: list  # convex weights per term
    mu: np.ndarray  # cone coefficients
    residual: np.ndarray
    converged: bool
    iterations: int
    gradient_mapping: float

    def within(self, radius: float, tol: float = 0.0) -> bool:
        return self.dist <= radius + tol


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    if y.size == 1:
        return np.ones(1)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(y - css[rho] / (rho + 1.0), 0.0)


def dist_origin(terms: Sequence[tuple], cone: PolyCone | None = None, radius: float | None = None,
                tol: float = 1e-10, max_iter: int = 100_000) -> DistResult:
    """Distance from 0 to ``sum_t w_t * P_t + cone``.

    Accelerated projected gradient on ``0.5 * ||residual||^2`` over the
    product of simplices and the nonnegative orthant, with function-value
    restarts. Stops when the gradient-mapping norm drops to ``tol``; if
    ``max_iter`` is hit the best point is returned with ``converged=False``.
    ``radius`` is accepted for symmetry with callers and not used here.
    """
    if not terms and cone is None:
        raise ValueError("dist_origin needs at least one term or a cone")
    n = terms[0][1].dim if terms else cone.dim
    if cone is None:
        cone = PolyCone.zero(n)
    if cone.dim != n or any(p.dim != n for _, p in terms):
        raise ValueError("dimension mismatch between terms and cone")
    if any(w < 0 for w, _ in terms):
        raise ValueError("term weights must be nonnegative")
    if n > CERTIFIED_DIM:
        warnings.warn(f"dist_origin is certified for n <= {CERTIFIED_DIM}; got n={n}", stacklevel=2)

    blocks = []
    cols = []
    start = 0
    for w, p in terms:
        k = len(p)
        blocks.append(slice(start, start + k))
        cols.append(w * p.vertices.T)
        start += k
    mu_sl = slice(start, start + len(cone.generators))
    cols.append(cone.generators.T)
    M = np.hstack(cols) if cols else np.zeros((n, 0))

    def proj(x):
        out = np.empty_like(x)
        for sl in blocks:
            out[sl] = project_simplex(x[sl])
        out[mu_sl] = np.maximum(x[mu_sl], 0.0)
        return out

    x = np.zeros(M.shape[1])
    for sl in blocks:
        x[sl] = 1.0 / (sl.stop - sl.start)

    L = float(np.linalg.norm(M, 2) ** 2) if M.size else 0.0
    if L == 0.0:
        return DistResult(0.0, [x[sl].copy() for sl in blocks], x[mu_sl].copy(), np.zeros(n), True, 0, 0.0)

    def f_grad(x):
        r = M @ x
        return 0.5 * float(r @ r), M.T @ r, r

    y = x.copy()
    t = 1.0
    fx, gx, _ = f_grad(x)
    best_x, best_f = x.copy(), fx
    gm = np.inf
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        _, gy, _ = f_grad(y)
        x_new = proj(y - gy / L)
        f_new, g_new, _ = f_grad(x_new)
        if f_new > fx:
            # restart from the last iterate with a plain projected step
            t = 1.0
            x_new = proj(x - gx / L)
            f_new, g_new, _ = f_grad(x_new)
            y = x_new.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            t = t_next
        x, fx, gx = x_new, f_new, g_new
        if fx < best_f:
            best_x, best_f = x.copy(), fx
        gm = L * float(np.linalg.norm(x - proj(x - gx / L)))
        if gm <= tol or fx == 0.0:
            converged = True
            break

    x = best_x
    r = M @ x
    return DistResult(float(np.linalg.norm(r)), [x[sl].copy() for sl in blocks], x[mu_sl].copy(),
                      r, converged, it, gm)
