"""The four operating objectives and their ensemble aggregation.

* hydropower production, GWh/yr (maximize)
* average demand deficit, Mm³/yr (minimize)
* MEF reliability, % of days the basis release meets the threshold (maximize)
* flood reliability, % of days downstream release stays below the threshold (maximize)

Per-realization values are averaged over the sampled realizations.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels
from .hydroseries import InflowEnsemble, water_year_span
from .reservoir import Formulation, PolicyParams, ReservoirConfig, SimTrace, _policy_arrays
from .synthgen import sample_subset

OBJECTIVE_NAMES = ("hp_gwh", "deficit_mm3", "mef_rel_pct", "flood_rel_pct")
# +1 maximize, -1 minimize
SENSES = (1, -1, 1, 1)


class MefBasis(enum.Enum):
    EFR_ONLY = "efr"
    TOTAL_DOWNSTREAM = "total"


@dataclass(frozen=True)
class ObjectiveVector:
    hydropower: float
    deficit: float
    mef_reliability: float
    flood_reliability: float

    def __post_init__(self):
        vals = self.as_tuple()
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite objective: {vals}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.hydropower, self.deficit, self.mef_reliability, self.flood_reliability)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple())

    def minimized(self) -> np.ndarray:
        """All-minimize form: maximized objectives negated."""
        return -np.array(SENSES, dtype=float) * self.as_array()

    @classmethod
    def from_minimized(cls, f) -> "ObjectiveVector":
        return cls(*(-np.array(SENSES, dtype=float) * np.asarray(f, dtype=float)))

    @classmethod
    def mean(cls, vectors: Iterable["ObjectiveVector"]) -> "ObjectiveVector":
        rows = np.array([v.as_tuple() for v in vectors])
        return cls(*_ordered_mean(rows))


def _ordered_mean(rows: np.ndarray) -> np.ndarray:
    # sequential left-to-right sum so the result is independent of how rows were produced
    acc = np.zeros(rows.shape[1])
    for row in rows:
        acc = acc + row
    return acc / rows.shape[0]


def daily_energy(hpr: float, head: float, cfg: ReservoirConfig) -> float:
    """Energy in GWh from one day of release ``hpr`` (Mm³/day) at ``head`` (m)."""
    q = hpr * 1.0e6 / 86400.0
    p = min(cfg.efficiency * cfg.specific_weight * q * head * 1.0e-9, cfg.hp_power_cap)
    return 24.0 * p


def _canal_energy(dr: np.ndarray, cfg: ReservoirConfig) -> np.ndarray:
    if cfg.canal_power_cap <= 0:
        return np.zeros_like(dr)
    q = dr * 1.0e6 / 86400.0
    p = np.minimum(cfg.efficiency * cfg.specific_weight * q * cfg.canal_head * 1.0e-9,
                   cfg.canal_power_cap)
    return 24.0 * p


def objectives_of_trace(trace: SimTrace, cfg: ReservoirConfig,
                        mef_basis: MefBasis = MefBasis.EFR_ONLY) -> ObjectiveVector:
    m = trace.years
    T = len(trace)
    q = trace.hpr * 1.0e6 / 86400.0
    power = np.minimum(cfg.efficiency * cfg.specific_weight * q * trace.head * 1.0e-9,
                       cfg.hp_power_cap)
    energy = 24.0 * power + _canal_energy(trace.dr, cfg)
    dd = cfg.demand[trace.cycle]
    deficit = np.maximum(dd - trace.dr, 0.0)
    mef = cfg.mef.values[trace.cycle]
    rel = trace.release
    basis = rel if mef_basis is MefBasis.TOTAL_DOWNSTREAM else trace.efr
    ft = cfg.flood.cycle()[trace.cycle]
    return ObjectiveVector(
        hydropower=float(energy.sum() / m),
        deficit=float(deficit.sum() / m),
        mef_reliability=float(100.0 * np.count_nonzero(basis >= mef) / T),
        flood_reliability=float(100.0 * np.count_nonzero(rel < ft) / T),
    )


def evaluate_historical(trace: SimTrace, cfg: ReservoirConfig,
                        mef_basis: MefBasis = MefBasis.EFR_ONLY) -> ObjectiveVector:
    """Objectives of an observed operation record (single realization)."""
    n = len(trace)
    for name in ("storage", "efr", "dr", "hpr", "ewr", "head", "cycle"):
        if getattr(trace, name).shape != (n,):
            raise ValueError(f"observed series {name!r} length differs from inflow ({n})")
    return objectives_of_trace(trace, cfg, mef_basis)


@dataclass(frozen=True)
class EvalConfig:
    ensemble: InflowEnsemble
    sample_size: int = 100
    sample_seed: int = 0
    mef_basis: MefBasis = MefBasis.EFR_ONLY
    s0_fraction: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if not 1 <= self.sample_size <= self.ensemble.n_realizations:
            raise ValueError(
                f"sample_size {self.sample_size} outside [1, {self.ensemble.n_realizations}]"
            )


def realization_objectives(flows: np.ndarray, start, p: PolicyParams, form: Formulation,
                           cfg: ReservoirConfig, mef_basis: MefBasis = MefBasis.EFR_ONLY,
                           s0: float | None = None, threads: int = 1) -> np.ndarray:
    """(NR, 4) objective rows, one per realization, via the fused kernel."""
    flows = np.ascontiguousarray(flows, dtype=np.float64)
    T = flows.shape[1]
    template = InflowEnsemble(start, np.zeros((1, T)), 1).template()
    cyc = template.cycle_index()
    st, hd = cfg.tables()
    c, r = _policy_arrays(p)
    s0 = 0.5 * cfg.live_capacity if s0 is None else float(s0)
    sums = kernels.objective_sums(
        flows, cyc, cfg.mef.values, cfg.demand, cfg.flood.cycle(), s0, cfg.live_capacity,
        cfg.hp_release_cap, cfg.ns_denominator, c, r, form is Formulation.MEF_FIRST, st, hd,
        cfg.efficiency, cfg.specific_weight, cfg.hp_power_cap, cfg.canal_power_cap,
        cfg.canal_head, mef_basis is MefBasis.TOTAL_DOWNSTREAM, threads,
    )
    m = water_year_span(start, T)
    return np.column_stack([
        sums[:, 0] / m, sums[:, 1] / m, 100.0 * sums[:, 2] / T, 100.0 * sums[:, 3] / T
    ])


def evaluate(p: PolicyParams, form: Formulation, cfg: ReservoirConfig, ec: EvalConfig,
             sample_seed: int | None = None) -> ObjectiveVector:
    """Mean objectives over a seeded random subsample of the ensemble."""
    seed = ec.sample_seed if sample_seed is None else sample_seed
    sub = sample_subset(ec.ensemble, ec.sample_size, seed)
    rows = realization_objectives(sub.flows, sub.start, p, form, cfg, ec.mef_basis,
                                  ec.s0_fraction * cfg.live_capacity, ec.threads)
    return ObjectiveVector(*_ordered_mean(rows))


def write_objectives_csv(path: str | Path, vectors: Iterable[ObjectiveVector],
                         labels: Iterable[str] | None = None) -> None:
    """CSV of objective rows preceded by a ``# sense`` header line."""
    vectors = list(vectors)
    labels = list(labels) if labels is not None else None
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        senses = ["max" if s > 0 else "min" for s in SENSES]
        w.writerow(["# sense"] + ([""] if labels else []) + senses)
        w.writerow((["label"] if labels else []) + list(OBJECTIVE_NAMES))
        for i, v in enumerate(vectors):
            w.writerow(([labels[i]] if labels else []) + [repr(x) for x in v.as_tuple()])
