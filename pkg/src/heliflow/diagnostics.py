"""Per-step diagnostics table and growth-envelope fitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


class DiagnosticsError(ValueError):
    pass


def format_value(v: float) -> str:
    return repr(float(v))


@dataclass
class DiagnosticsSeries:
    """Rows of (time, metrics) under a schema fixed at construction."""

    columns: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    rows: list[tuple[float, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        if "time" in self.columns or len(set(self.columns)) != len(self.columns):
            raise DiagnosticsError("columns must be unique and must not include 'time'")

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, time: float, metrics: dict[str, float]) -> None:
        if set(metrics) != set(self.columns):
            extra = sorted(set(metrics) - set(self.columns))
            missing = sorted(set(self.columns) - set(metrics))
            raise DiagnosticsError(f"schema mismatch: extra {extra}, missing {missing}")
        if self.times and not time > self.times[-1]:
            raise DiagnosticsError(f"time {time} does not increase past {self.times[-1]}")
        self.times.append(float(time))
        self.rows.append(tuple(float(metrics[c]) for c in self.columns))

    def column(self, name: str) -> np.ndarray:
        if name == "time":
            return np.array(self.times)
        return np.array([r[self.columns.index(name)] for r in self.rows])

    def last(self) -> dict[str, float]:
        return dict(zip(self.columns, self.rows[-1]))

    def first_nonfinite(self):
        """(row index, time, column) of the first NaN/Inf entry, or None."""
        for i, (t, row) in enumerate(zip(self.times, self.rows)):
            for c, v in zip(self.columns, row):
                if not math.isfinite(v):
                    return i, t, c
        return None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("time",) + self.columns)
            for t, row in zip(self.times, self.rows):
                w.writerow([format_value(t)] + [format_value(v) for v in row])

    @classmethod
    def read_csv(cls, path) -> DiagnosticsSeries:
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if not header or header[0] != "time":
                raise DiagnosticsError(f"{path}: first column must be 'time'")
            series = cls(tuple(header[1:]))
            for line in r:
                series.append(float(line[0]), dict(zip(series.columns, map(float, line[1:]))))
        return series


# metrics bounded by the growth envelopes
GROWTH_COLUMNS = (
    "wz_L1", "wz_L2", "wz_Linf", "w_L2", "w_Linf", "xy_w_Linf",
    "u_L2", "u_Linf", "one_xy_u_L2", "besov_wz",
)


@dataclass
class EnvelopeReport:
    c0: float
    c_triple: float
    linear_margin: float
    margins: dict[str, float]

    @property
    def passed(self) -> bool:
        vals = [self.linear_margin, *self.margins.values()]
        return all(math.isfinite(v) and v >= 0 for v in vals)

    def lines(self) -> list[str]:
        out = [f"C0 = {self.c0:.6g}", f"C (triple exponential) = {self.c_triple:.6g}",
               f"margin one_xy_u_L2 vs C0 e^(C0 t): {self.linear_margin:.6g}"]
        out += [f"log margin {k} vs C e^(exp(e^(C0 t))): {v:.6g}" for k, v in self.margins.items()]
        return out


def _triple_log(c: float, c0: float, t: np.ndarray) -> np.ndarray:
    """log of c * exp(exp(exp(c0 t)))."""
    return math.log(c) + np.exp(np.exp(c0 * t))


def fit_c0(t: np.ndarray, m: np.ndarray) -> float:
    """Smallest C0 > 0 with m(t) <= C0 exp(C0 t) at every sample."""
    if np.all(m <= 0):
        return 0.0

    def worst(c):
        return np.max(np.log(m[m > 0]) - (math.log(c) + c * t[m > 0]))

    hi = max(float(m.max()), 1e-12)
    while worst(hi) > 0:
        hi *= 2
    lo = hi
    while worst(lo) <= 0 and lo > 1e-300:
        lo /= 2
    if worst(lo) <= 0:
        return lo
    return float(brentq(worst, lo, hi, xtol=1e-14 * hi, rtol=1e-12)) * (1 + 1e-12)


def envelope_report(series: DiagnosticsSeries, columns=GROWTH_COLUMNS) -> EnvelopeReport:
    if len(series) < 10:
        raise DiagnosticsError(f"envelope fit needs at least 10 rows, got {len(series)}")
    bad = series.first_nonfinite()
    if bad is not None:
        i, t, c = bad
        raise DiagnosticsError(f"non-finite value in row {i} (time {t}), column {c}")
    t = series.column("time") - series.times[0]
    m = series.column("one_xy_u_L2")
    c0 = fit_c0(t, m)
    env = c0 * np.exp(c0 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        linear_margin = float(np.min(np.where(env > 0, (env - m) / env, 0.0)))
    present = [c for c in columns if c in series.columns]
    start = max((series.column(c)[0] for c in present), default=0.0)
    c_triple = max(c0, start / math.exp(math.e), 1e-300)
    margins = {}
    for c in present:
        v = series.column(c)
        pos = v > 0
        if not pos.any():
            margins[c] = math.inf
            continue
        margins[c] = float(np.min(_triple_log(c_triple, c0, t[pos]) - np.log(v[pos])))
    return EnvelopeReport(c0, c_triple, linear_margin, margins)
