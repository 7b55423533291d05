"""Problem data: interval objectives, uncertain constraints over finite sample
sets, a polyhedral ground set and the precision vector.

Uncertainty sets are finite. A box declared in a problem file is replaced by
its per-axis uniform grid, so robust values and active sets are exact maxima
over the samples rather than over the continuous set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import expr as ex
from .interval import Interval

TOL_FEAS = 1e-9
TOL_ACTIVE = 1e-9


@dataclass(frozen=True)
class Tolerances:
    feas: float = TOL_FEAS
    active: float = TOL_ACTIVE
    incl: float = 1e-9
    sign: float = 1e-9
    pos: float = 1e-12
    strict: float = 0.0
    delta_strict: float = 1e-9

    def __post_init__(self):
        for name in ("feas", "active", "incl", "sign", "pos", "delta_strict"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")
        if self.strict < 0:
            raise ValueError("tolerance strict must be nonnegative")


class ProblemFileError(ValueError):
    pass


@dataclass(frozen=True)
class Precision:
    eps: tuple  # of Interval

    def __post_init__(self):
        eps = tuple(e if isinstance(e, Interval) else Interval(*e) for e in self.eps)
        if not eps:
            raise ValueError("precision vector must be nonempty")
        for i, e in enumerate(eps):
            if e.lo < 0:
                raise ValueError(f"epsilon {i + 1} has negative lower bound {e.lo}")
        if not sum(e.lo + e.hi for e in eps) > 0:
            raise ValueError("precision vector must have a positive total")
        object.__setattr__(self, "eps", eps)

    def __len__(self):
        return len(self.eps)

    @property
    def lo(self) -> np.ndarray:
        return np.array([e.lo for e in self.eps])

    @property
    def hi(self) -> np.ndarray:
        return np.array([e.hi for e in self.eps])


def theta(p: Precision) -> float:
    return float(sum(e.lo + e.hi for e in p.eps))


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    points: np.ndarray  # (k, q)
    box_lo: Optional[tuple] = None
    box_hi: Optional[tuple] = None
    grid: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(1, 0)
        if pts.shape[0] == 0:
            raise ValueError("uncertainty set must be nonempty")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_box(cls, lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]) -> "UncertaintySet":
        if not (len(lo) == len(hi) == len(counts)):
            raise ValueError("box_lo, box_hi and grid must have equal length")
        axes = []
        for a, b, c in zip(lo, hi, counts):
            if a > b:
                raise ValueError(f"box_lo {a} exceeds box_hi {b}")
            if int(c) < 1 or (int(c) == 1 and a != b):
                raise ValueError(f"grid count {c} is too small for [{a}, {b}]")
            axes.append(np.linspace(a, b, int(c)))
        pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(lo))
        return cls(pts, tuple(map(float, lo)), tuple(map(float, hi)), tuple(int(c) for c in counts))

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class GroundSet:
    """Polyhedron ``{x : A x <= b}``; no rows means all of R^n."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        if A.size == 0:
            A = A.reshape(0, A.shape[-1] if A.ndim == 2 else 0)
        A = np.atleast_2d(A)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"set has {A.shape[0]} rows in A but {b.shape[0]} entries in b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "GroundSet":
        n = len(lo)
        if len(hi) != n:
            raise ValueError(f"box bounds differ in length: {n} vs {len(hi)}")
        rows, rhs = [], []
        for i in range(n):
            if lo[i] is not None and np.isfinite(lo[i]):
                e = np.zeros(n)
                e[i] = -1.0
                rows.append(e)
                rhs.append(-float(lo[i]) + 0.0)
            if hi[i] is not None and np.isfinite(hi[i]):
                e = np.zeros(n)
                e[i] = 1.0
                rows.append(e)
                rhs.append(float(hi[i]))
        return cls(np.array(rows).reshape(-1, n), np.array(rhs))

    @classmethod
    def whole_space(cls, n: int) -> "GroundSet":
        return cls(np.zeros((0, n)), np.zeros(0))

    def contains(self, X, tol: float = TOL_FEAS) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.A.shape[0] == 0:
            return np.ones(X.shape[:-1], dtype=bool)
        return np.all(X @ self.A.T <= self.b + tol, axis=-1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate bounds implied by single-variable rows (inf when absent)."""
        n = self.A.shape[1]
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        for a, b in zip(self.A, self.b):
            nz = np.flatnonzero(a)
            if len(nz) == 1:
                i = nz[0]
                if a[i] > 0:
                    hi[i] = min(hi[i], b / a[i])
                else:
                    lo[i] = max(lo[i], b / a[i])
        return lo, hi


@dataclass(frozen=True)
class Grid:
    """Axis-aligned search grid: ``counts[i]`` uniform points on ``[lo[i], hi[i]]``."""

    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        lo = tuple(float(a) for a in self.lo)
        hi = tuple(float(a) for a in self.hi)
        counts = tuple(int(c) for c in self.counts)
        if not (len(lo) == len(hi) == len(counts)) or not lo:
            raise ValueError("grid lo, hi and counts must be nonempty and of equal length")
        for a, b, c in zip(lo, hi, counts):
            if not a < b:
                raise ValueError(f"grid needs lo < hi, got [{a}, {b}]")
            if c < 2:
                raise ValueError(f"grid needs at least 2 points per axis, got {c}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_step(cls, lo, hi, step) -> "Grid":
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        step = np.broadcast_to(np.atleast_1d(step), lo.shape)
        counts = [int(round((b - a) / s)) + 1 for a, b, s in zip(lo, hi, step)]
        return cls(tuple(lo), tuple(hi), tuple(counts))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def describe(self) -> str:
        return ";".join(f"[{a!r},{b!r}]x{c}" for a, b, c in zip(self.lo, self.hi, self.counts))


@dataclass(frozen=True, eq=False)
class Constraint:
    expr: ex.Expr
    uncertainty: UncertaintySet
    text: str = ""


@dataclass(frozen=True, eq=False)
class Problem:
    n: int
    objectives: tuple  # of (lower Expr, upper Expr)
    constraints: tuple  # of Constraint
    S: GroundSet
    precision: Precision
    grid: Optional[Grid] = None
    name: str = ""
    objective_texts: tuple = field(default=())

    def __post_init__(self):
        if len(self.precision) != len(self.objectives):
            raise ValueError(f"{len(self.objectives)} objectives but {len(self.precision)} epsilon intervals")
        if not self.objectives:
            raise ValueError("problem needs at least one objective")
        if self.S.A.shape[1] != self.n:
            raise ValueError(f"ground set has dimension {self.S.A.shape[1]}, problem has n={self.n}")
        for lo, hi in self.objectives:
            for e in (lo, hi):
                if ex.max_var_index(e, ex.Var) > self.n:
                    raise ValueError("objective uses an undeclared variable")
                if ex.max_var_index(e, ex.Param) > 0:
                    raise ValueError("objectives must not depend on uncertainty parameters")
        for c in self.constraints:
            if ex.max_var_index(c.expr, ex.Param) > c.uncertainty.dim:
                raise ValueError("constraint uses more parameters than its uncertainty set provides")

    @property
    def m(self) -> int:
        return len(self.objectives)

    @property
    def p(self) -> int:
        return len(self.constraints)

    @cached_property
    def _obj_eval(self):
        return [(ex.compile_expr(lo), ex.compile_expr(hi)) for lo, hi in self.objectives]

    @cached_property
    def _obj_grad(self):
        return [(ex.compile_value_grad(lo, self.n), ex.compile_value_grad(hi, self.n))
                for lo, hi in self.objectives]

    @cached_property
    def _con_eval(self):
        return [ex.compile_expr(c.expr) for c in self.constraints]

    @cached_property
    def _con_grad(self):
        return [ex.compile_value_grad(c.expr, self.n) for c in self.constraints]

    @property
    def sqrt_theta(self) -> float:
        return math.sqrt(theta(self.precision))


# --- evaluation ------------------------------------------------------------

def _as_points(prob: Problem, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != prob.n:
        raise ValueError(f"point dimension {X.shape[-1]} != n={prob.n}")
    return X


def objective_bounds(prob: Problem, X) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper objective values, each of shape ``X.shape[:-1] + (m,)``."""
    X = _as_points(prob, X)
    lo = np.stack([f(X) for f, _ in prob._obj_eval], axis=-1)
    hi = np.stack([g(X) for _, g in prob._obj_eval], axis=-1)
    return lo, hi


def objective_intervals(prob: Problem, x) -> tuple:
    lo, hi = objective_bounds(prob, np.asarray(x, dtype=float).reshape(1, -1))
    out = []
    for i in range(prob.m):
        if lo[0, i] > hi[0, i]:
            raise ValueError(f"objective {i + 1} has lower value {lo[0, i]} above upper value {hi[0, i]} at x={list(x)}")
        out.append(Interval(lo[0, i], hi[0, i]))
    return tuple(out)


def constraint_samples(prob: Problem, j: int, X) -> np.ndarray:
    """Values ``g_j(x, v)`` for every sample ``v``: shape ``X.shape[:-1] + (k_j,)``."""
    if not 0 <= j < prob.p:
        raise IndexError(f"constraint index {j} out of range (p={prob.p})")
    X = _as_points(prob, X)
    V = prob.constraints[j].uncertainty.points
    return prob._con_eval[j](X[..., None, :], V)


def robust_values(prob: Problem, X) -> np.ndarray:
    """Worst-case constraint values, shape ``X.shape[:-1] + (p,)``."""
    X = _as_points(prob, X)
    if prob.p == 0:
        return np.zeros(X.shape[:-1] + (0,))
    return np.stack([constraint_samples(prob, j, X).max(axis=-1) for j in range(prob.p)], axis=-1)


def robust_value(prob: Problem, j: int, x) -> float:
    return float(constraint_samples(prob, j, np.asarray(x, dtype=float)).max())


def active_set(prob: Problem, j: int, x, tol_active: float = TOL_ACTIVE) -> np.ndarray:
    """Samples whose constraint value is within ``tol_active`` of the maximum."""
    vals = constraint_samples(prob, j, np.asarray(x, dtype=float))
    keep = vals >= vals.max() - tol_active
    return prob.constraints[j].uncertainty.points[keep]


def in_S(prob: Problem, x, tol_feas: float = TOL_FEAS) -> bool:
    return bool(prob.S.contains(np.asarray(x, dtype=float), tol_feas))


def omega_mask(prob: Problem, X, tol_feas: float = TOL_FEAS, slack: float = 0.0) -> np.ndarray:
    X = _as_points(prob, X)
    mask = prob.S.contains(X, tol_feas)
    if prob.p:
        mask &= np.all(robust_values(prob, X) <= slack + tol_feas, axis=-1)
    return mask


def in_Omega(prob: Problem, x, tol_feas: float = TOL_FEAS) -> bool:
    return bool(omega_mask(prob, x, tol_feas))


def in_Omega_E(prob: Problem, x, tol_feas: float = TOL_FEAS) -> bool:
    return bool(omega_mask(prob, x, tol_feas, slack=prob.sqrt_theta))


def objective_violations(prob: Problem, X) -> list[tuple[int, np.ndarray]]:
    """Points of ``X`` where some lower objective exceeds its upper one."""
    lo, hi = objective_bounds(prob, X)
    bad = np.argwhere(lo > hi)
    return [(int(i), np.asarray(X)[k]) for k, i in bad]


# --- problem files ---------------------------------------------------------

def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ProblemFileError(f"missing key {key!r} in {where}")
    return table[key]


def _parse_expr(text, n, q, where):
    if not isinstance(text, str):
        raise ProblemFileError(f"{where}: expression must be a string")
    try:
        return ex.parse(text, n, q)
    except ValueError as err:
        raise ProblemFileError(f"{where}: {err}") from None


def problem_from_dict(data: dict) -> Problem:
    head = _require(data, "problem", "file")
    n = _require(head, "n", "[problem]")
    if not isinstance(n, int) or n < 1:
        raise ProblemFileError("[problem] n must be a positive integer")
    name = str(head.get("name", ""))

    objectives, texts = [], []
    for k, obj in enumerate(data.get("objective", []), start=1):
        lo = _parse_expr(_require(obj, "lower", f"objective {k}"), n, 0, f"objective {k} lower")
        hi = _parse_expr(_require(obj, "upper", f"objective {k}"), n, 0, f"objective {k} upper")
        objectives.append((lo, hi))
        texts.append((obj["lower"], obj["upper"]))
    if not objectives:
        raise ProblemFileError("at least one [[objective]] is required")

    constraints = []
    for k, con in enumerate(data.get("constraint", []), start=1):
        where = f"constraint {k}"
        unc = con.get("uncertainty")
        try:
            if unc is None:
                uset = UncertaintySet(np.zeros((1, 0)))
            elif "points" in unc:
                pts = np.asarray(unc["points"], dtype=float)
                uset = UncertaintySet(pts.reshape(len(pts), -1))
            else:
                uset = UncertaintySet.from_box(_require(unc, "box_lo", where), _require(unc, "box_hi", where),
                                               _require(unc, "grid", where))
        except (ValueError, TypeError) as err:
            raise ProblemFileError(f"{where}: {err}") from None
        e = _parse_expr(_require(con, "expr", where), n, uset.dim, where)
        constraints.append(Constraint(e, uset, con["expr"]))

    sset = data.get("set", {})
    try:
        if "A" in sset or "b" in sset:
            S = GroundSet(np.asarray(_require(sset, "A", "[set]"), dtype=float).reshape(-1, n),
                          _require(sset, "b", "[set]"))
        elif "lo" in sset or "hi" in sset:
            lo = sset.get("lo", [-np.inf] * n)
            hi = sset.get("hi", [np.inf] * n)
            S = GroundSet.box(lo, hi)
        else:
            S = GroundSet.whole_space(n)
    except ValueError as err:
        raise ProblemFileError(f"[set]: {err}") from None

    eps = _require(_require(data, "epsilon", "file"), "pairs", "[epsilon]")
    try:
        precision = Precision(tuple(Interval(float(a), float(b)) for a, b in eps))
    except (ValueError, TypeError) as err:
        raise ProblemFileError(f"[epsilon]: {err}") from None

    grid = None
    if "grid" in data:
        g = data["grid"]
        try:
            grid = Grid(_require(g, "lo", "[grid]"), _require(g, "hi", "[grid]"), _require(g, "counts", "[grid]"))
        except ValueError as err:
            raise ProblemFileError(f"[grid]: {err}") from None
        if grid.dim != n:
            raise ProblemFileError(f"[grid] has dimension {grid.dim}, problem has n={n}")
    try:
        return Problem(n, tuple(objectives), tuple(constraints), S, precision, grid, name, tuple(texts))
    except ValueError as err:
        raise ProblemFileError(str(err)) from None


def parse_problem(text: str) -> Problem:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ProblemFileError(f"malformed problem file: {err}") from None
    return problem_from_dict(data)


def load_problem(path) -> Problem:
    return parse_problem(Path(path).read_text())
