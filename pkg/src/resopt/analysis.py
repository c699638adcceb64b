"""Post-optimization analysis: Pareto sorting, hypervolume, re-evaluation,
monthly reliability, compromise selection and threshold sensitivity sweeps.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .hydroseries import DailySeries, InflowEnsemble, WATER_YEAR_MONTHS
from .objectives import (
    OBJECTIVE_NAMES,
    SENSES,
    EvalConfig,
    MefBasis,
    ObjectiveVector,
    _ordered_mean,
    realization_objectives,
)
from .reservoir import Formulation, PolicyParams, ReservoirConfig, simulate_many

logger = logging.getLogger(__name__)

HV_SEED = 20_240_601  # fixed Monte Carlo stream for repeatable reports
HV_SAMPLES = 1_000_000
HV_MARGIN = 0.1


@dataclass(frozen=True)
class Strategy:
    label: str
    formulation: Formulation
    params: PolicyParams
    objectives: ObjectiveVector
    seed: int = -1


class StrategySet:
    """Ordered collection of strategies with unique labels."""

    def __init__(self, strategies: Iterable[Strategy] = ()):
        self.strategies = list(strategies)
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise ValueError(f"duplicate strategy labels: {dup}")

    def __len__(self) -> int:
        return len(self.strategies)

    def __iter__(self):
        return iter(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    def __add__(self, other: "StrategySet") -> "StrategySet":
        return StrategySet(self.strategies + other.strategies)

    def labels(self) -> list[str]:
        return [s.label for s in self.strategies]

    def objective_matrix(self) -> np.ndarray:
        """Objectives in natural units, one row per strategy."""
        if not self.strategies:
            return np.empty((0, len(OBJECTIVE_NAMES)))
        return np.array([s.objectives.as_tuple() for s in self.strategies])

    def minimized(self) -> np.ndarray:
        return self.objective_matrix() * -np.array(SENSES, dtype=float)

    def by_formulation(self, form: Formulation) -> "StrategySet":
        return StrategySet(s for s in self.strategies if s.formulation is form)


# --- dominance ---------------------------------------------------------------

def pareto_filter(points) -> np.ndarray:
    """Boolean mask of rows not strictly dominated by any other row (minimization).

    Identical rows do not dominate each other, so duplicates are all kept.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(pts <= pts[i], axis=1)
        lt = np.any(pts < pts[i], axis=1)
        if np.any(le & lt):
            keep[i] = False
    return keep


def pareto_sort(s: StrategySet) -> StrategySet:
    """Strict nondominated subset across all four objectives, in input order."""
    if not len(s):
        return StrategySet()
    mask = pareto_filter(s.minimized())
    return StrategySet(x for x, k in zip(s, mask) if k)


# --- hypervolume -------------------------------------------------------------

def _usable(points, reference) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(reference, dtype=float)
    if pts.size == 0:
        return np.empty((0, ref.size))
    inside = np.all(pts < ref, axis=1)
    if not np.all(inside):
        warnings.warn(f"{int(np.sum(~inside))} point(s) do not dominate the reference and were excluded",
                      RuntimeWarning, stacklevel=3)
    return pts[inside]


def _hv2(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    total = 0.0
    best_y = ref[1]
    for x, y in pts[order]:
        if y < best_y:
            total += (ref[0] - x) * (best_y - y)
            best_y = y
    return total


def _hv_slice(pts: np.ndarray, ref: np.ndarray) -> float:
    """Exact hypervolume by slicing along the last objective (any dimension)."""
    if len(pts) == 0:
        return 0.0
    d = pts.shape[1]
    if d == 1:
        return float(ref[0] - pts[:, 0].min())
    if d == 2:
        return _hv2(pts, ref)
    order = np.argsort(pts[:, -1], kind="stable")
    pts = pts[order]
    total = 0.0
    for i in range(len(pts)):
        upper = pts[i + 1, -1] if i + 1 < len(pts) else ref[-1]
        depth = upper - pts[i, -1]
        if depth > 0:
            front = pts[:i + 1, :-1]
            total += depth * _hv_slice(front[pareto_filter(front)], ref[:-1])
    return total


def hypervolume_exact(points, reference) -> float:
    """Exact dominated volume (minimization); exponential in dimension, for small sets."""
    pts = _usable(points, reference)
    return _hv_slice(pts[pareto_filter(pts)] if len(pts) else pts, np.asarray(reference, dtype=float))


def hypervolume_mc(points, reference, samples: int = HV_SAMPLES, seed: int = HV_SEED,
                   threads: int = 1) -> tuple[float, float]:
    """Monte Carlo hypervolume estimate and its standard error."""
    pts = _usable(points, reference)
    if len(pts) == 0:
        return 0.0, 0.0
    ref = np.asarray(reference, dtype=float)
    lo = pts.min(axis=0)
    box = float(np.prod(ref - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 250_000
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        u = rng.uniform(lo, ref, size=(n, ref.size))
        hits += int(kernels.dominated_count(np.ascontiguousarray(pts), u, threads))
    frac = hits / samples
    return box * frac, box * np.sqrt(frac * (1.0 - frac) / samples)


def hypervolume(points, reference, samples: int = HV_SAMPLES, seed: int = HV_SEED,
                threads: int = 1) -> float:
    """Exact for up to three objectives, seeded Monte Carlo beyond."""
    ref = np.asarray(reference, dtype=float)
    if ref.size <= 3:
        return hypervolume_exact(points, ref)
    return hypervolume_mc(points, ref, samples, seed, threads)[0]


def reference_point(points, margin: float = HV_MARGIN) -> np.ndarray:
    """Worst observed value per minimized objective, pushed out by ``margin``."""
    from .moea import hv_reference
    return hv_reference(points, margin)


# --- re-evaluation -----------------------------------------------------------

def _refresh(s: Strategy, rows: np.ndarray) -> Strategy:
    return replace(s, objectives=ObjectiveVector(*_ordered_mean(rows)))


def reevaluate(s: StrategySet, cfg: ReservoirConfig, ensemble: InflowEnsemble,
               mef_basis: MefBasis = MefBasis.EFR_ONLY, s0_fraction: float = 0.5,
               threads: int = 1) -> StrategySet:
    """Replace every strategy's objectives by its mean over the whole ensemble."""
    s0 = s0_fraction * cfg.live_capacity
    return StrategySet(
        _refresh(x, realization_objectives(ensemble.flows, ensemble.start, x.params,
                                           x.formulation, cfg, mef_basis, s0, threads))
        for x in s
    )


def reevaluate_generated(s: StrategySet, cfg: ReservoirConfig, model, gen_cfg,
                         mef_basis: MefBasis = MefBasis.EFR_ONLY, s0_fraction: float = 0.5,
                         threads: int = 1, chunk: int = 2_000) -> StrategySet:
    """:func:`reevaluate` on a generated ensemble built chunk by chunk.

    Suits very large ensembles: each realization is regenerated from its own
    stream, and row sums accumulate in index order, so the result equals the
    in-memory evaluation of the full ensemble.
    """
    from .synthgen import generate

    s0 = s0_fraction * cfg.live_capacity
    n = gen_cfg.realizations
    acc = [np.zeros(len(OBJECTIVE_NAMES)) for _ in s]
    for lo in range(0, n, chunk):
        e = generate(model, gen_cfg, range(lo, min(lo + chunk, n)))
        for i, x in enumerate(s):
            rows = realization_objectives(e.flows, e.start, x.params, x.formulation, cfg,
                                          mef_basis, s0, threads)
            for row in rows:
                acc[i] = acc[i] + row
    return StrategySet(replace(x, objectives=ObjectiveVector(*(a / n))) for x, a in zip(s, acc))


# --- monthly reliability -----------------------------------------------------

def monthly_mef_reliability(p: PolicyParams, form: Formulation, cfg: ReservoirConfig,
                            ensemble: InflowEnsemble, mef_basis: MefBasis = MefBasis.EFR_ONLY,
                            s0_fraction: float = 0.5, threads: int = 1,
                            chunk: int = 500) -> dict[int, float]:
    """Percent of days meeting the MEF threshold per calendar month, pooled over realizations."""
    months = ensemble.template().months()
    met = np.zeros(13)
    days = np.zeros(13)
    s0 = s0_fraction * cfg.live_capacity
    for lo in range(0, ensemble.n_realizations, chunk):
        for tr in simulate_many(ensemble.flows[lo:lo + chunk], ensemble.start, s0, form, p, cfg, threads):
            basis = tr.release if mef_basis is MefBasis.TOTAL_DOWNSTREAM else tr.efr
            ok = basis >= cfg.mef.values[tr.cycle]
            met += np.bincount(months, weights=ok, minlength=13)
            days += np.bincount(months, minlength=13)
    return {m: float(100.0 * met[m] / days[m]) for m in WATER_YEAR_MONTHS if days[m] > 0}


# --- selection ---------------------------------------------------------------

def _column(name: str) -> int:
    try:
        return OBJECTIVE_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown objective {name!r}; expected one of {OBJECTIVE_NAMES}") from None


class SelectionError(ValueError):
    pass


def select_strategy(s: StrategySet, bounds: Mapping[str, tuple[float | None, float | None]] | None = None,
                    priorities: Sequence[str] = ("deficit_mm3",)) -> Strategy:
    """Filter by per-objective ``(low, high)`` bounds, then pick lexicographically.

    Priorities name objectives in order; each is optimized in its own sense
    (maximized objectives prefer larger values). Remaining ties keep input order.
    """
    if not len(s):
        raise SelectionError("empty strategy set")
    bounds = dict(bounds or {})
    obj = s.objective_matrix()
    violation = np.zeros(len(s))
    for name, (lo, hi) in bounds.items():
        col = obj[:, _column(name)]
        scale = max(float(np.ptp(col)), 1e-12)
        if lo is not None:
            violation += np.maximum(lo - col, 0.0) / scale
        if hi is not None:
            violation += np.maximum(col - hi, 0.0) / scale
    feasible = np.flatnonzero(violation == 0)
    if feasible.size == 0:
        near = np.argsort(violation, kind="stable")[:3]
        misses = "; ".join(
            f"{s[i].label} ({', '.join(f'{n}={v:.4g}' for n, v in zip(OBJECTIVE_NAMES, obj[i]))})"
            for i in near)
        raise SelectionError(f"no strategy meets the bounds; nearest misses: {misses}")
    keys = []
    for name in reversed(priorities):
        col = _column(name)
        keys.append(-SENSES[col] * obj[feasible, col])
    # lexsort is stable and treats its last key as primary
    order = np.lexsort(keys) if keys else np.arange(feasible.size)
    return s[int(feasible[order[0]])]


# --- summaries and sweeps -----------------------------------------------------

def lower_median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return float("nan")
    return float(v[(v.size - 1) // 2])


def quartiles(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return (float("nan"),) * 3
    q1, q3 = np.percentile(v, [25, 75], method="lower")
    return float(q1), lower_median(v), float(q3)


@dataclass
class SweepRow:
    fraction: float
    formulation: Formulation
    annual_requirement: float
    strategies: StrategySet
    seed_medians: dict  # seed -> lower median of mef reliability within that seed's archive

    def summary(self) -> dict:
        row = {"fraction": self.fraction, "formulation": self.formulation.value,
               "annual_mef_mm3": self.annual_requirement, "n_strategies": len(self.strategies)}
        obj = self.strategies.objective_matrix()
        for j, name in enumerate(OBJECTIVE_NAMES):
            col = obj[:, j]
            q1, med, q3 = quartiles(col)
            row.update({f"{name}_min": float(col.min()) if col.size else float("nan"),
                        f"{name}_q1": q1, f"{name}_median": med, f"{name}_q3": q3,
                        f"{name}_max": float(col.max()) if col.size else float("nan")})
        meds = list(self.seed_medians.values())
        row["mef_rel_seed_spread"] = float(max(meds) - min(meds)) if meds else float("nan")
        return row


def strategies_from_result(result, form: Formulation, prefix: str) -> StrategySet:
    from .policy_search import archive_policies
    return StrategySet(
        Strategy(f"{prefix}_{i + 1:03d}", form, p, v, seed)
        for i, (p, v, seed) in enumerate(archive_policies(result))
    )


def sensitivity_sweep(fractions: Sequence[float], historical: DailySeries, cfg: ReservoirConfig,
                      ec: EvalConfig, rc, epsilons, formulations: Sequence[Formulation] = tuple(Formulation),
                      k: int = 1, hv_samples: int = 10_000) -> list[SweepRow]:
    """Re-optimize each formulation under percent-of-MAF thresholds at each fraction."""
    from .policy_search import optimize
    from .thresholds import percent_of_maf

    rows = []
    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError(f"fraction {f} outside (0, 1]")
        mef = percent_of_maf(historical, f)
        cfg_f = cfg.with_mef(mef)
        for form in formulations:
            result = optimize(form, cfg_f, ec, rc, epsilons, k, hv_samples=hv_samples)
            sorted_set = pareto_sort(strategies_from_result(result, form, f"{form.value}_{f:g}"))
            col = _column("mef_rel_pct")
            seed_medians = {
                r.seed: lower_median(-r.archive.objectives()[:, col]) for r in result.runs
            }
            rows.append(SweepRow(f, form, mef.annual_requirement, sorted_set, seed_medians))
            logger.info("sweep fraction %g %s: %d strategies", f, form.value, len(sorted_set))
    return rows


# --- report writers -----------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_strategies_csv(path: str | Path, s: StrategySet,
                         flags: Mapping[str, Sequence[bool]] | None = None) -> None:
    """One row per strategy: label, formulation, seed, flag columns, genes, objectives.

    A ``# sense`` line precedes the header so the file is parallel-axes ready.
    """
    flags = dict(flags or {})
    k = max((x.params.k for x in s), default=1)
    genes = [f"c{i + 1}" for i in range(k)] + [f"r{i + 1}" for i in range(k)]
    lead = ["label", "formulation", "seed", *flags, *genes]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["# sense", *([""] * (len(lead) - 1)), *("max" if x > 0 else "min" for x in SENSES)])
        w.writerow([*lead, *OBJECTIVE_NAMES])
        for i, x in enumerate(s):
            pad = [""] * (k - x.params.k)
            g = [*x.params.centers, *pad, *x.params.radii, *pad]
            w.writerow([x.label, x.formulation.value, x.seed, *(int(bool(v[i])) for v in flags.values()),
                        *map(_fmt, g), *map(_fmt, x.objectives.as_tuple())])


def read_strategies_csv(path: str | Path) -> StrategySet:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    cidx = [i for i, h in enumerate(header) if h.startswith("c") and h[1:].isdigit()]
    ridx = [i for i, h in enumerate(header) if h.startswith("r") and h[1:].isdigit()]
    oidx = [header.index(n) for n in OBJECTIVE_NAMES]
    out = []
    for r in body:
        c = [float(r[i]) for i in cidx if r[i]]
        rad = [float(r[i]) for i in ridx if r[i]]
        out.append(Strategy(r[0], Formulation.parse(r[1]), PolicyParams(tuple(c), tuple(rad)),
                            ObjectiveVector(*(float(r[i]) for i in oidx)), int(r[2])))
    return StrategySet(out)


def write_rows_csv(path: str | Path, rows: Sequence[Mapping]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
