"""Calendar-aware daily series, water-year bookkeeping and CSV ingestion.

All volumes are in Mm³ and all rates in Mm³/day. Water years run June 1 to
May 31 and are labelled by the calendar year in which they start.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

WATER_YEAR_START_MONTH = 6
# calendar months in water-year order: Jun .. May
WATER_YEAR_MONTHS = (6, 7, 8, 9, 10, 11, 12, 1, 2, 3, 4, 5)
DAYS_IN_WATER_YEAR = 365

_NONLEAP_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
# offset of each calendar month's first day from June 1 in a 365-day water year
_MONTH_OFFSET = {}
_acc = 0
for _m in WATER_YEAR_MONTHS:
    _MONTH_OFFSET[_m] = _acc
    _acc += _NONLEAP_DAYS[_m - 1]
del _acc, _m

DEFAULT_COLUMNS = {"date": "date", "flow": "flow_mm3"}


class SeriesError(ValueError):
    """Raised for malformed or inconsistent hydrological input."""


def water_year_of(d: dt.date) -> int:
    """Water year label of ``d``; June 1 of year Y through May 31 of Y+1 map to Y."""
    return d.year if d.month >= WATER_YEAR_START_MONTH else d.year - 1


def water_year_day(d: dt.date) -> int:
    """Index 0..364 of ``d`` within its water year on the 365-day cycle.

    February 29 shares February 28's index.
    """
    day = 28 if (d.month == 2 and d.day == 29) else d.day
    return _MONTH_OFFSET[d.month] + day - 1


def water_year_bounds(year: int) -> tuple[dt.date, dt.date]:
    return dt.date(year, 6, 1), dt.date(year + 1, 5, 31)


def days_in_water_year(year: int) -> int:
    start, end = water_year_bounds(year)
    return (end - start).days + 1


def cycle_month(wy_day: int) -> int:
    """Calendar month (1..12) of a 365-cycle water-year day index."""
    for m in reversed(WATER_YEAR_MONTHS):
        if wy_day >= _MONTH_OFFSET[m]:
            return m
    raise AssertionError("unreachable")


def cycle_months() -> np.ndarray:
    """Calendar month of each of the 365 water-year day indices."""
    return np.array([cycle_month(i) for i in range(DAYS_IN_WATER_YEAR)], dtype=np.int64)


@dataclass(frozen=True)
class DailySeries:
    """Consecutive daily volumes starting at ``start``.

    ``values`` is stored as a read-only float64 array.
    """

    start: dt.date
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise SeriesError("series must be one-dimensional with at least one value")
        if not np.all(np.isfinite(v)):
            raise SeriesError("series contains non-finite values")
        if np.any(v < 0):
            raise SeriesError(f"negative flow at index {int(np.argmax(v < 0))}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=len(self) - 1)

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self))]

    def water_years(self) -> np.ndarray:
        return np.array([water_year_of(d) for d in self.dates()], dtype=np.int64)

    def months(self) -> np.ndarray:
        return np.array([d.month for d in self.dates()], dtype=np.int64)

    def cycle_index(self) -> np.ndarray:
        """365-cycle water-year day index of every value."""
        return np.array([water_year_day(d) for d in self.dates()], dtype=np.int64)

    def complete_water_years(self) -> list[int]:
        first = water_year_of(self.start)
        if self.start != dt.date(first, 6, 1):
            first += 1
        last = water_year_of(self.end)
        if self.end != dt.date(last + 1, 5, 31):
            last -= 1
        return list(range(first, last + 1))

    def window(self, start: dt.date, end: dt.date) -> "DailySeries":
        """Sub-series covering ``start``..``end`` inclusive."""
        if start < self.start or end > self.end or end < start:
            raise SeriesError(f"window {start}..{end} outside series {self.start}..{self.end}")
        i0 = (start - self.start).days
        i1 = (end - self.start).days + 1
        return DailySeries(start, self.values[i0:i1])

    def water_year_window(self, first: int, last: int) -> "DailySeries":
        return self.window(water_year_bounds(first)[0], water_year_bounds(last)[1])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.start.isoformat().encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class InflowEnsemble:
    """``NR`` aligned daily realizations stored as an (NR, T) array."""

    start: dt.date
    flows: np.ndarray
    years: int
    indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        f = np.array(self.flows, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise SeriesError("ensemble needs shape (NR >= 1, T >= 1)")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise SeriesError("ensemble flows must be finite and nonnegative")
        f.setflags(write=False)
        object.__setattr__(self, "flows", f)
        idx = tuple(int(i) for i in self.indices) or tuple(range(f.shape[0]))
        if len(idx) != f.shape[0]:
            raise SeriesError("indices must label every realization")
        object.__setattr__(self, "indices", idx)

    @property
    def n_realizations(self) -> int:
        return self.flows.shape[0]

    @property
    def steps(self) -> int:
        return self.flows.shape[1]

    def __len__(self) -> int:
        return self.n_realizations

    def realization(self, j: int) -> DailySeries:
        return DailySeries(self.start, self.flows[j])

    def template(self) -> DailySeries:
        """Zero series with the ensemble's calendar, used for date bookkeeping."""
        return DailySeries(self.start, np.zeros(self.steps))

    def subset(self, rows: Iterable[int]) -> "InflowEnsemble":
        rows = list(rows)
        return InflowEnsemble(
            self.start, self.flows[rows], self.years, tuple(self.indices[r] for r in rows)
        )

    @classmethod
    def from_series(cls, series: DailySeries) -> "InflowEnsemble":
        return cls(series.start, series.values[None, :], max(1, round(water_year_span(series.start, len(series)))))


def water_year_span(start: dt.date, n_days: int) -> float:
    """Number of water years covered by ``n_days`` from ``start``.

    Complete water years count 1 each; partial ones count their covered
    fraction, so the result is an exact integer for whole-year windows.
    """
    end = start + dt.timedelta(days=n_days - 1)
    total = 0.0
    for wy in range(water_year_of(start), water_year_of(end) + 1):
        lo, hi = water_year_bounds(wy)
        covered = (min(hi, end) - max(lo, start)).days + 1
        total += covered / days_in_water_year(wy)
    return total


def load_daily_csv(path: str | Path, column_map: Mapping[str, str] | None = None) -> DailySeries:
    """Read a ``date,flow`` CSV into a :class:`DailySeries`.

    The header row is optional. ``column_map`` maps the logical names
    ``date`` and ``flow`` to header labels (default ``date``/``flow_mm3``);
    without a header, date is column 0 and flow column 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"inflow file not found: {path}")
    cols = dict(DEFAULT_COLUMNS)
    cols.update(column_map or {})

    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise SeriesError(f"{path}: no data rows")

    di, fi = 0, 1
    first_line, first = rows[0]
    try:
        dt.date.fromisoformat(first[0].strip())
    except ValueError:
        header = [c.strip() for c in first]
        try:
            di, fi = header.index(cols["date"]), header.index(cols["flow"])
        except ValueError:
            raise SeriesError(
                f"{path}: header {header} lacks columns {cols['date']!r}/{cols['flow']!r}"
            ) from None
        rows = rows[1:]
    if not rows:
        raise SeriesError(f"{path}: no data rows")

    start = None
    prev = None
    values = []
    for line, r in rows:
        try:
            d = dt.date.fromisoformat(r[di].strip())
            q = float(r[fi])
        except (ValueError, IndexError):
            raise SeriesError(f"malformed row at line {line}: {','.join(r)!r}") from None
        if not math.isfinite(q):
            raise SeriesError(f"non-finite flow at line {line}")
        if q < 0:
            raise SeriesError(f"negative flow at line {line}")
        if prev is None:
            start = d
        elif (d - prev).days != 1:
            raise SeriesError(f"date gap at line {line}: {prev} -> {d}")
        prev = d
        values.append(q)
    return DailySeries(start, np.array(values))


def write_daily_csv(series: DailySeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "flow_mm3"])
        for d, q in zip(series.dates(), series.values):
            w.writerow([d.isoformat(), repr(float(q))])


def annual_totals(series: DailySeries) -> dict[int, float]:
    """Total volume of each complete water year in the series."""
    years = series.complete_water_years()
    if not years:
        raise SeriesError("series contains no complete water year")
    out = {}
    for wy in years:
        lo, hi = water_year_bounds(wy)
        i0 = (lo - series.start).days
        i1 = (hi - series.start).days + 1
        out[wy] = math.fsum(series.values[i0:i1])
    return out


def monthly_totals(series: DailySeries) -> tuple[list[int], np.ndarray]:
    """Monthly totals of complete water years as an (n_years, 12) array.

    Columns follow water-year order (June first).
    """
    years = series.complete_water_years()
    if not years:
        raise SeriesError("series contains no complete water year")
    dates = series.dates()
    wys = np.array([water_year_of(d) for d in dates])
    col = np.array([WATER_YEAR_MONTHS.index(d.month) for d in dates])
    table = np.zeros((len(years), 12))
    row_of = {wy: i for i, wy in enumerate(years)}
    for k in range(len(dates)):
        i = row_of.get(int(wys[k]))
        if i is not None:
            table[i, col[k]] += series.values[k]
    return years, table


@dataclass(frozen=True)
class MonthStats:
    mean: float
    sd: float
    lag1: float


def monthly_stats(series: DailySeries) -> dict[int, MonthStats]:
    """Per calendar month: mean and sd of monthly totals, and the lag-1
    correlation between each month's total and the preceding month's total.
    """
    years, table = monthly_totals(series)
    if len(years) < 2:
        raise SeriesError("monthly statistics need at least 2 complete water years")
    flat = table.ravel()
    out = {}
    for c, month in enumerate(WATER_YEAR_MONTHS):
        cur = table[:, c]
        # preceding month; for June that is May of the previous water year
        pos = np.arange(len(years)) * 12 + c
        ok = pos >= 1
        prev_vals, cur_vals = flat[pos[ok] - 1], flat[pos[ok]]
        if prev_vals.size >= 2 and np.std(prev_vals) > 0 and np.std(cur_vals) > 0:
            lag1 = float(np.corrcoef(prev_vals, cur_vals)[0, 1])
        else:
            lag1 = float("nan")
        out[month] = MonthStats(float(cur.mean()), float(cur.std(ddof=1)), lag1)
    return out
