"""Residual/tolerance records returned by every verification routine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def as_dict(self):
        return {
            "name": self.name,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


@dataclass
class Report:
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, name, residual, tolerance, detail=""):
        chk = Check(name, float(residual), float(tolerance), detail)
        self.checks.append(chk)
        return chk

    def extend(self, other: "Report", prefix=""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.residual, c.tolerance, c.detail))
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def max_residual(self, prefix=""):
        vals = [c.residual for c in self.checks if c.name.startswith(prefix)]
        return max(vals, default=0.0)

    def summary(self):
        lines = []
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            extra = f"  ({c.detail})" if c.detail else ""
            lines.append(f"{flag} {c.name}: {c.residual:.3e} <= {c.tolerance:.1e}{extra}")
        return "\n".join(lines)


def rel_residual(diff, *refs):
    """Norm of ``diff`` divided by ``max(1, ||ref||...)``."""
    scale = max([1.0] + [float(np.linalg.norm(r)) for r in refs])
    return float(np.linalg.norm(diff)) / scale
