"""Verification reports and their JSON / CSV serializations."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import __version__


def _clean(obj):
    """Make numpy scalars, fractions and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "numerator") and hasattr(obj, "denominator") and not isinstance(obj, int):
        return f"{obj.numerator}/{obj.denominator}"
    return obj


@dataclass
class VerificationReport:
    """Outcome of one check: ``passed`` iff ``worst_violation <= tolerance``.

    ``worst_violation`` is signed and scale-normalized; negative values mean
    the inequality holds with room to spare.
    """

    check: str
    total_points: int
    worst_violation: float
    tolerance: float
    witness: dict = field(default_factory=dict)
    direction: tuple | None = None
    c: float | None = None
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)
    subchecks: list = field(default_factory=list)
    dump: dict | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        ok = self.worst_violation <= self.tolerance
        return bool(ok and all(s.passed for s in self.subchecks))

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "check": self.check,
            "c": self.c,
            "passed": self.passed,
            "total_points": self.total_points,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "witness": self.witness,
        }
        if self.direction is not None:
            out["direction"] = list(self.direction)
        if self.details:
            out["details"] = self.details
        if self.subchecks:
            out["subchecks"] = [s.to_dict(timing) for s in self.subchecks]
        if timing:
            out["wall_time"] = self.wall_time
        return _clean(out)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        c = "" if self.c is None else f" c={self.c:g}"
        return (
            f"{status} {self.check}{c}: points={self.total_points} "
            f"worst={self.worst_violation:.3e} tol={self.tolerance:.1e}"
        )


def merge(reports: list[VerificationReport], check: str | None = None) -> VerificationReport:
    """Combine chunk reports: counts add, the worst violation (and its witness) wins."""
    if not reports:
        raise ValueError("nothing to merge")
    worst = max(reports, key=lambda r: r.worst_violation)
    return VerificationReport(
        check=check or worst.check,
        total_points=sum(r.total_points for r in reports),
        worst_violation=worst.worst_violation,
        tolerance=worst.tolerance,
        witness=worst.witness,
        direction=worst.direction,
        c=worst.c,
        wall_time=sum(r.wall_time for r in reports),
        details=worst.details,
        subchecks=[s for r in reports for s in r.subchecks],
    )


@contextmanager
def timed(report_holder: dict):
    start = time.perf_counter()
    yield
    report_holder["wall_time"] = time.perf_counter() - start


def config_hash(config: dict) -> str:
    blob = json.dumps(_clean(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def to_json(reports: list[VerificationReport], config: dict | None = None, timing: bool = False) -> str:
    payload = {
        "tool": "bellman-verify",
        "version": __version__,
        "config_hash": config_hash(config or {}),
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict(timing) for r in reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def csv_text(columns: list[str], rows, config: dict | None = None) -> str:
    """CSV with a leading ``#`` comment carrying the tool version and config hash."""
    buf = io.StringIO()
    buf.write(f"# bellman-verify {__version__} schema=1 config={config_hash(config or {})}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(a)) if isinstance(a, (float, np.floating)) else a for a in row])
    return buf.getvalue()


def dump_csv(report: VerificationReport, config: dict | None = None) -> str:
    """Per-point dump: x, y, w, v, region, value."""
    if not report.dump:
        return csv_text(["x", "y", "w", "v", "region", "value"], [], config)
    d = report.dump
    rows = zip(d["x"], d["y"], d["w"], d["v"], d["region"], d["value"])
    return csv_text(["x", "y", "w", "v", "region", "value"], rows, config)
