"""Minimum environmental flow schedules and the downstream flood threshold."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hydroseries import (
    DAYS_IN_WATER_YEAR,
    DailySeries,
    SeriesError,
    annual_totals,
    cycle_months,
    water_year_bounds,
    water_year_day,
)

# MoEF&CC seasonal fractions by calendar month
MOEFCC_FRACTIONS = {
    6: 0.30, 7: 0.30, 8: 0.30, 9: 0.30,
    10: 0.25, 4: 0.25, 5: 0.25,
    11: 0.20, 12: 0.20, 1: 0.20, 2: 0.20, 3: 0.20,
}
WEIBULL_TARGET_EXCEEDANCE = 0.90


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MefSchedule:
    """Daily MEF thresholds on the 365-day water-year cycle (index 0 = June 1)."""

    values: np.ndarray
    method: str
    source_hash: str = ""

    def __post_init__(self):
        v = _readonly(self.values)
        if v.shape != (DAYS_IN_WATER_YEAR,):
            raise ValueError(f"MEF schedule needs {DAYS_IN_WATER_YEAR} values, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("MEF thresholds must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def annual_requirement(self) -> float:
        return float(np.sum(self.values))

    def scaled(self, factor: float) -> "MefSchedule":
        return MefSchedule(self.values * factor, f"{self.method}*{factor:g}", self.source_hash)

    def for_series(self, series: DailySeries) -> np.ndarray:
        return self.values[series.cycle_index()]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["water_year_day", "mef_mm3"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path, method: str = "csv") -> "MefSchedule":
        with Path(path).open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows and not rows[0][0].strip().isdigit():
            rows = rows[1:]
        vals = np.zeros(DAYS_IN_WATER_YEAR)
        seen = set()
        for r in rows:
            i = int(r[0])
            vals[i] = float(r[1])
            seen.add(i)
        if seen != set(range(DAYS_IN_WATER_YEAR)):
            raise ValueError(f"{path}: schedule must list days 0..364 exactly once")
        return cls(vals, method)


@dataclass(frozen=True)
class FloodThreshold:
    """Downstream high-flow threshold; constant unless ``schedule`` is given."""

    ft: float
    schedule: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not np.isfinite(self.ft) or self.ft <= 0:
            raise ValueError("flood threshold must be positive")
        if self.schedule is not None:
            s = _readonly(self.schedule)
            if s.shape != (DAYS_IN_WATER_YEAR,) or np.any(s <= 0):
                raise ValueError("flood schedule needs 365 positive values")
            object.__setattr__(self, "schedule", s)

    def cycle(self) -> np.ndarray:
        if self.schedule is not None:
            return self.schedule
        return np.full(DAYS_IN_WATER_YEAR, float(self.ft))


def _source_hash(series: DailySeries, *extra) -> str:
    h = hashlib.sha256(series.digest().encode())
    for e in extra:
        h.update(repr(e).encode())
    return h.hexdigest()[:16]


def percent_of_maf(historical: DailySeries, fraction: float) -> MefSchedule:
    """Threshold of ``fraction`` × the historical mean daily flow of each calendar month.

    Only complete water years are used. Distributing the requirement along
    the mean hydrograph keeps its annual sum at ``fraction`` × MAF.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    years = historical.complete_water_years()
    if len(years) < 2:
        raise SeriesError("percent-of-MAF thresholds need at least 2 complete water years")
    window = historical.water_year_window(years[0], years[-1])
    months = window.months()
    monthly_mean = {}
    for m in range(1, 13):
        sel = window.values[months == m]
        monthly_mean[m] = float(sel.sum() / sel.size)
    vals = np.array([fraction * monthly_mean[m] for m in cycle_months()])
    return MefSchedule(vals, f"percent_maf:{fraction:g}", _source_hash(historical, fraction))


def weibull_select(totals: dict[int, float], target: float = WEIBULL_TARGET_EXCEEDANCE) -> int:
    """Water year whose Weibull exceedance probability k/(n+1) is nearest ``target``.

    Ties go to the lower-flow year.
    """
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    n = len(ranked)
    best = None
    for k, (wy, total) in enumerate(ranked, start=1):
        gap = abs(k / (n + 1) - target)
        # later ranks have lower flow, so `<=` prefers them on ties
        if best is None or gap <= best[0] + 1e-15:
            best = (gap, wy)
    return best[1]


def moefcc(historical: DailySeries) -> MefSchedule:
    """MoEF&CC seasonal-percentage thresholds applied to the 90%-exceedance year."""
    totals = annual_totals(historical)
    if len(totals) < 5:
        raise SeriesError("MoEF&CC thresholds need at least 5 complete water years")
    wy = weibull_select(totals)
    lo, hi = water_year_bounds(wy)
    year = historical.window(lo, hi)
    vals = np.zeros(DAYS_IN_WATER_YEAR)
    for d, q in zip(year.dates(), year.values):
        if d.month == 2 and d.day == 29:
            continue
        vals[water_year_day(d)] = MOEFCC_FRACTIONS[d.month] * q
    return MefSchedule(vals, f"moefcc:{wy}", _source_hash(historical, "moefcc"))


def flood_threshold(release_history: DailySeries) -> FloodThreshold:
    """Maximum daily downstream release over the record."""
    if len(release_history) == 0:
        raise SeriesError("empty release history")
    return FloodThreshold(float(np.max(release_history.values)))


def schedule_for_dates(cycle: np.ndarray, start: dt.date, n_days: int) -> np.ndarray:
    idx = np.array(
        [water_year_day(start + dt.timedelta(days=i)) for i in range(n_days)], dtype=np.int64
    )
    return np.asarray(cycle)[idx]
