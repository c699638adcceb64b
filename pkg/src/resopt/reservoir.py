"""Daily reservoir mass balance under a release-priority formulation.

Each day the inflow is credited first, then releases are allocated in the
formulation's priority order, each capped by the water still available:

* ``MEF_FIRST``:    environmental flow -> demand -> hydropower
* ``DEMAND_FIRST``: demand -> hydropower -> environmental flow

Water above live capacity leaves as spill (``ewr``). The hydropower target
comes from a Gaussian radial-basis rule of normalized storage.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .hydroseries import DAYS_IN_WATER_YEAR, DailySeries, water_year_span
from .thresholds import FloodThreshold, MefSchedule


class Formulation(enum.Enum):
    MEF_FIRST = "mef-first"
    DEMAND_FIRST = "demand-first"

    @classmethod
    def parse(cls, value: "str | Formulation") -> "Formulation":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower().replace("_", "-")
        aliases = {"pf-mef": "mef-first", "pf-nmef": "demand-first"}
        return cls(aliases.get(v, v))


@dataclass(frozen=True)
class PolicyParams:
    """RBF centers and radii; release share is the mean of the K Gaussians."""

    centers: tuple[float, ...]
    radii: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in np.atleast_1d(self.centers))
        r = tuple(float(x) for x in np.atleast_1d(self.radii))
        if len(c) < 1 or len(c) != len(r):
            raise ValueError("centers and radii must be nonempty and of equal length")
        if any(not (-1.0 <= x <= 1.0) for x in c):
            raise ValueError(f"centers must lie in [-1, 1]: {c}")
        if any(not (0.0 < x <= 1.0) for x in r):
            raise ValueError(f"radii must lie in (0, 1]: {r}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    @property
    def k(self) -> int:
        return len(self.centers)

    @classmethod
    def from_genome(cls, genome: Sequence[float]) -> "PolicyParams":
        g = np.asarray(genome, dtype=float)
        if g.size % 2:
            raise ValueError("genome length must be even (centers then radii)")
        k = g.size // 2
        return cls(tuple(g[:k]), tuple(g[k:]))

    def genome(self) -> np.ndarray:
        return np.array(self.centers + self.radii)


@dataclass(frozen=True)
class ReservoirConfig:
    """Physical and institutional constants of the reservoir.

    Defaults are the Nagarjuna Sagar values where known; ``elevation_storage``
    is a (storage Mm³, head m) table that must be supplied for real studies.
    """

    mef: MefSchedule
    flood: FloodThreshold
    demand: np.ndarray  # 365-cycle, Mm³/day
    elevation_storage: tuple[tuple[float, float], ...] = ((0.0, 60.0), (5733.0, 120.0))
    live_capacity: float = 5733.0
    hp_release_cap: float = 101.9
    hp_power_cap: float = 0.96  # GW
    efficiency: float = 0.90
    specific_weight: float = 9810.0
    max_inflow: float = 0.0
    canal_power_cap: float = 0.0  # GW; 0 disables canal generation
    canal_head: float = 0.0

    def __post_init__(self):
        if self.live_capacity <= 0:
            raise ValueError("live capacity must be positive")
        if self.hp_release_cap <= 0:
            raise ValueError("hydropower release cap must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.hp_power_cap <= 0 or self.specific_weight <= 0 or self.max_inflow < 0:
            raise ValueError("power cap, specific weight and max inflow must be valid")
        tbl = tuple((float(s), float(h)) for s, h in self.elevation_storage)
        if len(tbl) < 2:
            raise ValueError("elevation-storage table needs at least 2 points")
        st, hd = np.array(tbl).T
        if np.any(np.diff(st) <= 0) or np.any(np.diff(hd) <= 0):
            raise ValueError("elevation-storage table must be strictly increasing")
        object.__setattr__(self, "elevation_storage", tbl)
        dd = np.array(self.demand, dtype=np.float64)
        if dd.shape != (DAYS_IN_WATER_YEAR,) or np.any(dd < 0) or not np.all(np.isfinite(dd)):
            raise ValueError("demand must be 365 finite nonnegative values")
        dd.setflags(write=False)
        object.__setattr__(self, "demand", dd)

    @property
    def ns_denominator(self) -> float:
        return self.live_capacity + self.max_inflow

    def with_max_inflow(self, flows: np.ndarray) -> "ReservoirConfig":
        return replace(self, max_inflow=float(np.max(flows)))

    def with_mef(self, mef: MefSchedule) -> "ReservoirConfig":
        return replace(self, mef=mef)

    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        st, hd = np.array(self.elevation_storage).T
        return np.ascontiguousarray(st), np.ascontiguousarray(hd)


def normalized_storage(s: float, cfg: ReservoirConfig) -> float:
    return s / cfg.ns_denominator


def rbf_release(ns: float, p: PolicyParams, cfg: ReservoirConfig) -> float:
    """Hydropower release target in Mm³/day, within [0, Q_HP]."""
    acc = 0.0
    for c, r in zip(p.centers, p.radii):
        acc += math.exp(-((ns - c) ** 2) / (r * r))
    return min(cfg.hp_release_cap, cfg.hp_release_cap * acc / p.k)


def head(s: float, cfg: ReservoirConfig) -> float:
    st, hd = cfg.tables()
    return float(np.interp(s, st, hd))


@dataclass(frozen=True)
class DayFlux:
    storage: float
    efr: float
    dr: float
    hpr: float
    ewr: float

    @property
    def release(self) -> float:
        return self.efr + self.hpr + self.ewr


def step(s_prev: float, q: float, day: int, form: Formulation, p: PolicyParams,
         cfg: ReservoirConfig, hp_target: float | None = None) -> DayFlux:
    """Advance one day. ``day`` is the 365-cycle water-year index.

    ``hp_target`` overrides the RBF release target when given.
    """
    want = rbf_release(normalized_storage(s_prev, cfg), p, cfg) if hp_target is None else hp_target
    mef = cfg.mef.values[day]
    dd = cfg.demand[day]
    avail = s_prev + q
    if form is Formulation.MEF_FIRST:
        efr = min(mef, avail); avail -= efr
        dr = min(dd, avail); avail -= dr
        hpr = min(want, avail); avail -= hpr
    else:
        dr = min(dd, avail); avail -= dr
        hpr = min(want, avail); avail -= hpr
        efr = min(mef, avail); avail -= efr
    ewr = 0.0
    if avail > cfg.live_capacity:
        ewr = avail - cfg.live_capacity
        avail = cfg.live_capacity
    return DayFlux(avail, efr, dr, hpr, ewr)


TRACE_COLUMNS = ("date", "s", "q", "efr", "dr", "hpr", "ewr", "r", "head")


@dataclass(frozen=True)
class SimTrace:
    """Per-day storage and fluxes of one realization (end-of-day storage)."""

    start: object  # datetime.date
    s0: float
    inflow: np.ndarray
    storage: np.ndarray
    efr: np.ndarray
    dr: np.ndarray
    hpr: np.ndarray
    ewr: np.ndarray
    head: np.ndarray
    cycle: np.ndarray = field(repr=False)

    @property
    def release(self) -> np.ndarray:
        return self.efr + self.hpr + self.ewr

    def __len__(self) -> int:
        return self.inflow.size

    @property
    def years(self) -> float:
        return water_year_span(self.start, len(self))

    def mass_balance_error(self) -> float:
        total_out = self.efr.sum() + self.dr.sum() + self.hpr.sum() + self.ewr.sum()
        return float(self.storage[-1] - self.s0 - self.inflow.sum() + total_out)

    def to_csv(self, path: str | Path) -> None:
        series = DailySeries(self.start, self.inflow)
        rel = self.release
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for i, d in enumerate(series.dates()):
                w.writerow([d.isoformat()] + [
                    repr(float(x[i])) for x in
                    (self.storage, self.inflow, self.efr, self.dr, self.hpr, self.ewr, rel, self.head)
                ])

    @classmethod
    def from_observed(cls, start, inflow, storage, efr, dr, hpr, ewr, head, s0=None) -> "SimTrace":
        """Wrap externally supplied flux series, e.g. historical operations."""
        arrs = [np.asarray(a, dtype=float) for a in (inflow, storage, efr, dr, hpr, ewr, head)]
        n = arrs[0].size
        if any(a.shape != (n,) for a in arrs):
            raise ValueError("observed flux series have inconsistent lengths")
        cyc = DailySeries(start, np.zeros(n)).cycle_index()
        s0 = float(arrs[1][0] if s0 is None else s0)
        return cls(start, s0, *arrs, cycle=cyc)


def _policy_arrays(p: PolicyParams) -> tuple[np.ndarray, np.ndarray]:
    return np.array(p.centers, dtype=np.float64), np.array(p.radii, dtype=np.float64)


def simulate_many(flows: np.ndarray, start, s0: float, form: Formulation, p: PolicyParams,
                  cfg: ReservoirConfig, threads: int = 1) -> list[SimTrace]:
    """Traces for each row of ``flows`` (NR, T) sharing calendar ``start``."""
    flows = np.ascontiguousarray(flows, dtype=np.float64)
    if not 0 <= s0 <= cfg.live_capacity:
        raise ValueError(f"initial storage {s0} outside [0, {cfg.live_capacity}]")
    cyc = DailySeries(start, np.zeros(flows.shape[1])).cycle_index()
    st, hd = cfg.tables()
    c, r = _policy_arrays(p)
    out = kernels.simulate_batch(
        flows, cyc, cfg.mef.values, cfg.demand, float(s0), cfg.live_capacity,
        cfg.hp_release_cap, cfg.ns_denominator, c, r, form is Formulation.MEF_FIRST,
        st, hd, threads,
    )
    return [
        SimTrace(start, float(s0), flows[j].copy(), *(a[j] for a in out), cycle=cyc)
        for j in range(flows.shape[0])
    ]


def simulate(inflow: DailySeries, s0: float, form: Formulation, p: PolicyParams,
             cfg: ReservoirConfig) -> SimTrace:
    return simulate_many(inflow.values[None, :], inflow.start, s0, form, p, cfg)[0]
