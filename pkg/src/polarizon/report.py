"""Check records and deterministic JSON reports."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any


def _num(x: Any) -> Any:
    if isinstance(x, complex):
        return {"re": _num(x.real), "im": _num(x.imag)}
    if hasattr(x, "dtype") and getattr(x, "ndim", 1) == 0:
        return _num(x.item())
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return float(f"{x:.12e}")
    return x


@dataclass
class Check:
    id: str
    ref: str
    value: Any
    target: Any
    residual: float
    tolerance: float
    grid: dict = field(default_factory=dict)
    kind: str = "quadrature"
    notes: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        g = {k: _num(self.grid.get(k)) for k in ("Nz", "Nomega", "omega_max", "dz")}
        d = {"id": self.id, "ref": self.ref, "value": _num(self.value),
             "target": _num(self.target), "residual": _num(float(self.residual)),
             "tolerance": _num(float(self.tolerance)), "pass": self.passed, "grid": g,
             "kind": self.kind}
        if self.notes:
            d["notes"] = self.notes
        return d


@dataclass
class CheckReport:
    suite: str
    checks: list[Check] = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, other: "CheckReport") -> None:
        self.checks.extend(other.checks)
        self.tables.update(other.tables)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "tables": {k: [[_num(v) for v in row] for row in rows]
                           for k, rows in sorted(self.tables.items())}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def relative(value: complex, target: complex, floor: float = 0.0) -> float:
    """|value - target| / |target|, absolute when |target| <= floor."""
    scale = abs(target)
    if scale <= floor:
        return abs(value - target)
    return abs(value - target) / scale
