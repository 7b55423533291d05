"""Closed bounded intervals and the LU order relations.

Order relations compare endpoints exactly; any tolerance belongs to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError(f"interval endpoints must not be NaN: [{self.lo}, {self.hi}]")
        if lo > hi:
            raise ValueError(f"lower endpoint exceeds upper endpoint: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, a: float) -> "Interval":
        return cls(a, a)

    def __add__(self, other: "Interval") -> "Interval":
        return add(self, other)

    def __sub__(self, other: "Interval") -> "Interval":
        return sub(self, other)

    def __rmul__(self, k: float) -> "Interval":
        return scale(k, self)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


IntervalVector = tuple  # tuple[Interval, ...], length >= 1


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def scale(k: float, a: Interval) -> Interval:
    if k >= 0:
        return Interval(k * a.lo, k * a.hi)
    return Interval(k * a.hi, k * a.lo)


def leq_lu(a: Interval, b: Interval) -> bool:
    return a.lo <= b.lo and a.hi <= b.hi


def lt_lu(a: Interval, b: Interval) -> bool:
    return leq_lu(a, b) and (a.lo != b.lo or a.hi != b.hi)


def lt_s_lu(a: Interval, b: Interval) -> bool:
    return a.lo < b.lo and a.hi < b.hi


def vec_gt_bounds(a_lo: Sequence[float], a_hi: Sequence[float],
                  b_lo: Sequence[float], b_hi: Sequence[float]) -> bool:
    """Vector LU dominance ``A >_LU B`` evaluated on raw endpoint arrays.

    Every component must satisfy ``A_i >=_LU B_i`` and at least one
    ``A_k >_LU B_k``. The endpoints are not required to form proper
    intervals, which lets callers compare quantities such as the
    epsilon-Lagrangian whose bounds may cross.
    """
    if not (len(a_lo) == len(a_hi) == len(b_lo) == len(b_hi)):
        raise ValueError("interval vectors must have equal length")
    if len(a_lo) == 0:
        raise ValueError("interval vectors must be nonempty")
    strict = False
    for al, ah, bl, bh in zip(a_lo, a_hi, b_lo, b_hi):
        if not (al >= bl and ah >= bh):
            return False
        if al != bl or ah != bh:
            strict = True
    return strict


def vec_gt_lu(a: Sequence[Interval], b: Sequence[Interval]) -> bool:
    if len(a) != len(b):
        raise ValueError(f"interval vectors differ in length: {len(a)} vs {len(b)}")
    return vec_gt_bounds([x.lo for x in a], [x.hi for x in a],
                         [x.lo for x in b], [x.hi for x in b])


def vec_not_gt_lu(a: Sequence[Interval], b: Sequence[Interval]) -> bool:
    return not vec_gt_lu(a, b)
