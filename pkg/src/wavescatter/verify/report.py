"""Check records and suite reports with JSON and CSV output."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from ..errors import ContractError

PLUMBING = "plumbing"

# comparison modes: value <= tol, |value - target| <= tol, |value/target - 1| <= tol
MODES = ("le", "abs", "rel")


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    ratio: float
    tolerance: float
    passed: bool
    anchor: str
    mode: str

    def row(self) -> list[str]:
        return [self.name, _fmt(self.lhs), _fmt(self.rhs), _fmt(self.ratio), _fmt(self.tolerance),
                "pass" if self.passed else "fail", self.anchor, self.mode]


def _fmt(x: float) -> str:
    return repr(float(x))


def _finite(x) -> float:
    x = float(x)
    return x if math.isfinite(x) else (math.inf if x > 0 else -math.inf) if not math.isnan(x) else math.nan


@dataclass
class Report:
    """Checks of one suite, plus plot-ready data tables and free-form metadata."""

    suite: str
    checks: list[Check] = field(default_factory=list)
    data: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    skipped: str | None = None

    def check(self, name: str, value: float, target: float, tolerance: float, anchor: str,
              mode: str = "rel") -> Check:
        """Record a comparison. `anchor` names the mathematical property or 'plumbing'."""
        if not anchor:
            raise ContractError(f"check {name!r} registered without an anchor")
        if mode not in MODES:
            raise ContractError(f"unknown comparison mode {mode!r}")
        value, target = _finite(value), _finite(target)
        if mode == "le":
            ratio = value
            ok = value <= tolerance
        elif mode == "abs":
            ratio = abs(value - target)
            ok = ratio <= tolerance
        else:
            ratio = abs(value / target - 1.0) if target != 0 else math.inf
            ok = ratio <= tolerance
        c = Check(name, value, target, ratio, tolerance, bool(ok and math.isfinite(ratio)), anchor, mode)
        self.checks.append(c)
        return c

    def table(self, name: str, header: list[str], rows) -> None:
        self.data[name] = (list(header), [list(r) for r in rows])

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "skipped": self.skipped,
            "checks": [c.__dict__ for c in self.checks],
            "info": self.info,
        }

    def write(self, out_dir: str | Path, environment: dict | None = None) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        j = out / f"{self.suite}.json"
        payload = self.to_json()
        payload["environment"] = environment or environment_snapshot()
        j.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default), encoding="utf-8")
        paths.append(j)
        c = out / f"{self.suite}.csv"
        with open(c, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "lhs", "rhs", "ratio", "tolerance", "status", "anchor", "mode"])
            for chk in self.checks:
                w.writerow(chk.row())
        paths.append(c)
        for name, (header, rows) in self.data.items():
            p = out / f"{self.suite}.{name}.csv"
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for r in rows:
                    w.writerow([_cell(v) for v in r])
            paths.append(p)
        return paths


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def environment_snapshot(seed: int | None = None, threads: int | None = None) -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "seed": seed,
        "threads": threads,
    }
