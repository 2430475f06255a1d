"""Experiment reports: pass/fail criteria, trend verdicts, order fits and serialization."""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _plain(x):
    """Convert numpy scalars/arrays (recursively) to JSON-native Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


@dataclass
class Criterion:
    name: str
    value: float
    tolerance: float
    relation: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.value:.6g} {self.relation} {self.tolerance:.6g}" + (
            f"  ({self.detail})" if self.detail else ""
        )


@dataclass
class Series:
    """Named column of values against an axis (t, R, T, eps, N, ...)."""

    name: str
    axis: str
    x: list
    y: list

    @classmethod
    def from_timeseries(cls, ts, axis: str = "t"):
        return cls(ts.name, axis, list(map(float, ts.times)), list(map(float, ts.values)))


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    scalars: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    trends: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    error: str | None = None
    wall_clock: float = 0.0

    def check(self, name: str, value: float, tolerance: float, relation: str = "<=", detail: str = "") -> Criterion:
        value = float(value)
        if relation == "<=":
            ok = value <= tolerance
        elif relation == ">=":
            ok = value >= tolerance
        elif relation == "==":
            ok = value == tolerance
        else:
            raise ValueError(f"unknown relation {relation!r}")
        crit = Criterion(name, value, float(tolerance), relation, bool(ok and math.isfinite(value)), detail)
        self.criteria.append(crit)
        return crit

    def check_flag(self, name: str, flag: bool, detail: str = "") -> Criterion:
        crit = Criterion(name, float(bool(flag)), 1.0, "==", bool(flag), detail)
        self.criteria.append(crit)
        return crit

    def add_series(self, name: str, axis: str, x, y):
        self.series.append(Series(name, axis, [float(v) for v in x], [float(v) for v in y]))

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.criteria)

    def summary_lines(self) -> list[str]:
        return [c.line() for c in self.criteria]

    def to_dict(self) -> dict:
        """Everything except wall-clock time, so reruns serialize identically."""
        return _plain(
            {
                "experiment": self.experiment,
                "passed": self.passed,
                "error": self.error,
                "config": self.config,
                "scalars": self.scalars,
                "trends": self.trends,
                "criteria": [c.__dict__ for c in self.criteria],
                "series": [s.__dict__ for s in self.series],
                "notes": self.notes,
            }
        )


def trend(values, direction: str = "decreasing", strict: bool = True) -> dict:
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    if direction == "decreasing":
        ok = np.all(d < 0) if strict else np.all(d <= 0)
    elif direction == "increasing":
        ok = np.all(d > 0) if strict else np.all(d >= 0)
    else:
        raise ValueError(direction)
    return {"direction": direction, "strict": strict, "monotone": bool(ok), "values": v.tolist()}


def fit_order(steps, errors, floor: float = 1e-13) -> dict:
    """Least-squares slope of log(error) against log(step).

    Flags ``floor`` when every error is at or below ``floor`` (roundoff, no
    meaningful order) and ``non_monotone`` when errors do not shrink with the step.
    """
    h = np.asarray(steps, dtype=float)
    e = np.abs(np.asarray(errors, dtype=float))
    order = np.argsort(h)[::-1]
    h, e = h[order], e[order]
    out = {"steps": h.tolist(), "errors": e.tolist(), "order": float("nan"), "r2": float("nan"), "flags": []}
    if np.all(e <= floor):
        out["flags"].append("floor")
        return out
    if not np.all(np.diff(e) < 0):
        out["flags"].append("non_monotone")
    good = e > 0
    if np.count_nonzero(good) >= 2:
        x, y = np.log(h[good]), np.log(e[good])
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        ss = np.sum((y - y.mean()) ** 2)
        out["order"] = float(slope)
        out["r2"] = float(1 - np.sum(resid**2) / ss) if ss > 0 else 1.0
    return out


def write_atomic(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def series_csv(s: Series) -> str:
    lines = [f"{s.axis},{s.name}"]
    lines += [f"{x:.16e},{y:.16e}" for x, y in zip(s.x, s.y)]
    return "\n".join(lines) + "\n"


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_report(report: ExperimentReport, directory, formats=("json", "csv")) -> list[Path]:
    directory = Path(directory)
    written = []
    if "json" in formats:
        p = directory / "report.json"
        write_atomic(p, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(p)
        t = directory / "timing.json"
        write_atomic(t, json.dumps({"experiment": report.experiment, "wall_clock_s": report.wall_clock}) + "\n")
        written.append(t)
    if "csv" in formats:
        for s in report.series:
            p = directory / f"{_safe_name(s.name)}.csv"
            write_atomic(p, series_csv(s))
            written.append(p)
    return written


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
