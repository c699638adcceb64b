"""Synthetic stand-in for the Nagarjuna Sagar inputs.

The observed inflow, demand and release records are not public. This
fixture reproduces their scale: a monsoonal regime carrying 70% of the
annual flow in June-September and only 10% in November-May, strong
year-to-year variability, mean annual flow of 33,900 Mm³, and an
annual demand of 8,435 Mm³ (7,435 irrigation + 1,000 domestic).
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from .hydroseries import (
    DAYS_IN_WATER_YEAR,
    WATER_YEAR_MONTHS,
    DailySeries,
    cycle_months,
    water_year_bounds,
)

MAF_TARGET = 33_900.0
# share of annual flow per month, June..May
FLOW_SHARE = (0.02, 0.13, 0.30, 0.25, 0.20, 0.04, 0.02, 0.01, 0.008, 0.007, 0.007, 0.008)
IRRIGATION_ANNUAL = 7_435.0
DOMESTIC_ANNUAL = 1_000.0
# rabi-heavy: most canal withdrawals fall in the dry season
IRRIGATION_SHARE = (0.02, 0.06, 0.10, 0.10, 0.10, 0.10, 0.12, 0.12, 0.10, 0.08, 0.06, 0.04)

NS_LIVE_CAPACITY = 5733.0
NS_HP_RELEASE_CAP = 101.9
NS_HP_POWER_CAP = 0.96
# storage (Mm³) -> net head (m); the real curve is unpublished
NS_LIKE_HEAD_CURVE = ((0.0, 40.0), (2000.0, 75.0), (5733.0, 95.0))

FIRST_WATER_YEAR = 1968
LAST_WATER_YEAR = 2002  # 35 water years, June 1968 .. May 2003

_ANNUAL_LOG_SD = 0.45
_MONTH_LOG_SD = 0.30
_MONTH_RHO = 0.5


def ns_like_inflow(seed: int = 1968, first: int = FIRST_WATER_YEAR,
                   last: int = LAST_WATER_YEAR) -> DailySeries:
    """Daily inflow record with lognormal annual and monthly variability.

    The record is rescaled so its mean annual flow equals ``MAF_TARGET``.
    """
    rng = np.random.default_rng(seed)
    values = []
    eps_prev = 0.0
    for wy in range(first, last + 1):
        # lognormal annual factor with unit mean
        annual = MAF_TARGET * np.exp(_ANNUAL_LOG_SD * rng.standard_normal() - 0.5 * _ANNUAL_LOG_SD**2)
        lo, hi = water_year_bounds(wy)
        d = lo
        for c, m in enumerate(WATER_YEAR_MONTHS):
            eps_prev = _MONTH_RHO * eps_prev + np.sqrt(1 - _MONTH_RHO**2) * rng.standard_normal()
            total = annual * FLOW_SHARE[c] * np.exp(_MONTH_LOG_SD * eps_prev - 0.5 * _MONTH_LOG_SD**2)
            days = []
            while d.month == m and d <= hi:
                days.append(d)
                d += dt.timedelta(days=1)
            # smooth within-month shape with day-to-day noise
            shape = rng.gamma(4.0, 1.0, size=len(days))
            shape = np.convolve(shape, np.ones(3) / 3.0, mode="same") + 0.05
            values.extend(total * shape / shape.sum())
    values = np.array(values)
    # pin the record's mean annual flow to the target exactly
    values *= MAF_TARGET * (last - first + 1) / values.sum()
    return DailySeries(water_year_bounds(first)[0], values)


def ns_like_demand() -> np.ndarray:
    """365-cycle daily demand (Mm³/day) summing to 8,435 Mm³ per year."""
    months = cycle_months()
    days_per = {m: int(np.sum(months == m)) for m in range(1, 13)}
    out = np.zeros(DAYS_IN_WATER_YEAR)
    for c, m in enumerate(WATER_YEAR_MONTHS):
        irr = IRRIGATION_ANNUAL * IRRIGATION_SHARE[c] / days_per[m]
        out[months == m] = irr + DOMESTIC_ANNUAL / DAYS_IN_WATER_YEAR
    return out


def ns_like_releases(inflow: DailySeries, demand: np.ndarray | None = None,
                     capacity: float = NS_LIVE_CAPACITY,
                     turbine_cap: float = NS_HP_RELEASE_CAP) -> DailySeries:
    """Downstream releases of a standard operating rule on ``inflow``.

    Serves demand, passes up to ``turbine_cap`` through the turbines while
    storage is above 40%, and spills above capacity.
    """
    dd = ns_like_demand() if demand is None else demand
    cyc = inflow.cycle_index()
    s = 0.5 * capacity
    out = np.zeros(len(inflow))
    for t, q in enumerate(inflow.values):
        a = s + q
        dr = min(dd[cyc[t]], a)
        a -= dr
        hp = min(turbine_cap, max(a - 0.4 * capacity, 0.0))
        a -= hp
        spill = max(a - capacity, 0.0)
        s = a - spill
        out[t] = hp + spill
    return DailySeries(inflow.start, out)
