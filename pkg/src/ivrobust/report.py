"""Plain-text and key=value rendering of certificate reports.

Numbers are printed with 12 significant digits and negative zero is folded to
zero, so identical inputs give byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interval import Interval

DIGITS = 12


def fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v == 0.0:
            v = 0.0
        return f"{v:.{DIGITS}g}"
    if isinstance(value, Interval):
        return f"[{fmt(value.lo)},{fmt(value.hi)}]"
    if isinstance(value, str):
        return value
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], Interval):
            return ";".join(fmt(v) for v in value)
        return ",".join(fmt(v) for v in value)
    return str(value)


@dataclass
class Report:
    title: str
    items: list = field(default_factory=list)

    def add(self, key: str, value) -> "Report":
        self.items.append((key, fmt(value)))
        return self

    def render(self, style: str = "text") -> str:
        if style == "kv":
            return "".join(f"{k}={v}\n" for k, v in self.items)
        width = max((len(k) for k, _ in self.items), default=0)
        lines = [self.title, "-" * len(self.title)]
        lines += [f"{k.ljust(width)}  {v}" for k, v in self.items]
        return "\n".join(lines) + "\n"
