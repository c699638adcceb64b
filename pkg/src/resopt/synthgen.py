"""Kirsch-Nowak style synthetic daily streamflow.

Monthly totals are log-transformed and standardized per month. Synthetic
years are built by bootstrapping historical standardized values month by
month and imposing the historical month-to-month correlation with a
Cholesky factor. A second factor on the half-year-shifted matrix carries the
correlation across the water-year boundary. Monthly totals are then split
into days using the daily pattern of a historical month picked by k-nearest
neighbour on the monthly total.

Realization ``j`` draws from its own stream ``SeedSequence(seed,
spawn_key=(j,))`` (PCG64), so any realization can be regenerated alone and
generation order does not matter.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hydroseries import (
    WATER_YEAR_MONTHS,
    DailySeries,
    InflowEnsemble,
    SeriesError,
    load_daily_csv,
    monthly_totals,
    water_year_bounds,
    write_daily_csv,
)

MIN_FIT_YEARS = 10
PACKED_MAGIC = b"RESOPT-ENSEMBLE1"
_PACKED_HEADER = struct.Struct("<QQIiBB2x")


@dataclass(frozen=True)
class GeneratorModel:
    """Fitted statistics of the historical record (water-year month order)."""

    log_mean: np.ndarray  # (12,)
    log_sd: np.ndarray  # (12,)
    z_hist: np.ndarray  # (n_years, 12) standardized log totals
    totals: np.ndarray  # (n_years, 12) historical monthly totals
    corr: np.ndarray  # (12, 12)
    corr_shifted: np.ndarray  # (12, 12)
    chol: np.ndarray  # upper factor U with U.T @ U = corr
    chol_shifted: np.ndarray
    daily: tuple  # daily[year][month] -> historical daily flows of that month
    inter_annual: bool = True

    @property
    def n_years(self) -> int:
        return self.totals.shape[0]

    def proportions(self, year: int, month_col: int, length: int) -> np.ndarray:
        """Daily proportion vector of a historical month, fitted to ``length`` days."""
        d = self.daily[year][month_col]
        if d.size > length:
            d = d[:length]
        elif d.size < length:
            d = np.concatenate([d, np.repeat(d[-1:], length - d.size)])
        tot = d.sum()
        if tot <= 0:
            return np.full(length, 1.0 / length)
        return d / tot

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.log_mean, self.log_sd, self.z_hist, self.corr, self.corr_shifted):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        for year in self.daily:
            for d in year:
                h.update(np.ascontiguousarray(d, dtype="<f8").tobytes())
        h.update(b"1" if self.inter_annual else b"0")
        return h.hexdigest()


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    realizations: int = 10_000
    years: int = 10
    jitter_floor: float = 1e-6
    start_year: int = 2000

    def __post_init__(self):
        if self.realizations < 1 or self.years < 1:
            raise ValueError("need at least one realization of at least one year")
        if self.jitter_floor <= 0:
            raise ValueError("jitter floor must be positive")


def condition_correlation(corr: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Nearest valid correlation matrix by eigenvalue clipping and diagonal rescaling."""
    sym = 0.5 * (corr + corr.T)
    w, v = np.linalg.eigh(sym)
    fixed = (v * np.maximum(w, floor)) @ v.T
    d = np.sqrt(np.diag(fixed))
    out = fixed / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return 0.5 * (out + out.T)


def _upper_factor(corr: np.ndarray) -> np.ndarray:
    c = condition_correlation(corr)
    jitter = 0.0
    for _ in range(20):
        try:
            return np.linalg.cholesky(c + jitter * np.eye(12)).T
        except np.linalg.LinAlgError:
            jitter = max(1e-12, jitter * 10)
    raise SeriesError("correlation matrix could not be factorized")


def _shift(z: np.ndarray) -> np.ndarray:
    """Half-year offset rows: second half of year y followed by first half of y+1."""
    return np.hstack([z[:-1, 6:], z[1:, :6]])


def fit(historical: DailySeries, inter_annual: bool = True,
        min_years: int = MIN_FIT_YEARS) -> GeneratorModel:
    years, totals = monthly_totals(historical)
    n = len(years)
    if n < min_years:
        raise SeriesError(f"generator fit needs >= {min_years} complete water years, got {n}")
    logs = np.log(np.maximum(totals, 1e-12))
    mu = logs.mean(axis=0)
    sd = logs.std(axis=0, ddof=1)
    if np.any(sd <= 1e-12):
        bad = [WATER_YEAR_MONTHS[i] for i in np.flatnonzero(sd <= 1e-12)]
        raise SeriesError(f"degenerate record: zero variance in calendar months {bad}")
    z = (logs - mu) / sd
    corr = np.corrcoef(z, rowvar=False)
    corr_s = np.corrcoef(_shift(z), rowvar=False)

    daily = []
    for wy in years:
        lo, hi = water_year_bounds(wy)
        yr = historical.window(lo, hi)
        months = yr.months()
        daily.append(tuple(
            np.array(yr.values[months == m]) for m in WATER_YEAR_MONTHS
        ))
    return GeneratorModel(
        log_mean=mu, log_sd=sd, z_hist=z, totals=totals, corr=corr, corr_shifted=corr_s,
        chol=_upper_factor(corr), chol_shifted=_upper_factor(corr_s),
        daily=tuple(daily), inter_annual=inter_annual,
    )


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _month_lengths(start_year: int, years: int) -> np.ndarray:
    out = np.zeros((years, 12), dtype=np.int64)
    for y in range(years):
        for c, m in enumerate(WATER_YEAR_MONTHS):
            cal_year = start_year + y + (0 if m >= 6 else 1)
            nxt = dt.date(cal_year + (m == 12), m % 12 + 1, 1)
            out[y, c] = (nxt - dt.date(cal_year, m, 1)).days
    return out


def _monthly_z(model: GeneratorModel, rng: np.random.Generator, years: int) -> np.ndarray:
    n = model.n_years
    if model.inter_annual:
        boot = rng.integers(0, n, size=(years + 1, 12))
        c = model.z_hist[boot, np.arange(12)]
        z = c @ model.chol
        zs = _shift(c) @ model.chol_shifted
        # year y: first half from the shifted block, second half from the plain block
        return np.hstack([zs[:, 6:], z[1:, 6:]])
    boot = rng.integers(0, n, size=(years, 12))
    return model.z_hist[boot, np.arange(12)] @ model.chol


def generate(model: GeneratorModel, cfg: GenConfig, indices=None) -> InflowEnsemble:
    """Synthetic daily ensemble; ``indices`` selects which realizations to build."""
    idx = list(range(cfg.realizations)) if indices is None else [int(i) for i in indices]
    m = cfg.years
    lengths = _month_lengths(cfg.start_year, m)
    T = int(lengths.sum())
    k = max(1, math.ceil(math.sqrt(model.n_years)))
    weights = 1.0 / np.arange(1, k + 1)
    cum_w = np.cumsum(weights / weights.sum())

    tables = {}
    for y in range(m):
        for c in range(12):
            key = (c, int(lengths[y, c]))
            if key not in tables:
                tables[key] = np.array([model.proportions(h, c, key[1]) for h in range(model.n_years)])

    flows = np.empty((len(idx), T))
    for row, j in enumerate(idx):
        rng = realization_rng(cfg.seed, j)
        z = _monthly_z(model, rng, m)
        u = rng.random((m, 12))
        monthly = np.exp(z * model.log_sd + model.log_mean)
        dist = np.abs(model.totals[None, :, :] - monthly[:, None, :])
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k, :]
        choice = np.minimum(np.searchsorted(cum_w, u, side="right"), k - 1)
        pick = np.take_along_axis(nearest, choice[:, None, :], axis=1)[:, 0, :]
        pos = 0
        for y in range(m):
            for c in range(12):
                n_days = int(lengths[y, c])
                floor_total = n_days * cfg.jitter_floor
                total = max(monthly[y, c], floor_total)
                prop = tables[(c, n_days)][pick[y, c]]
                flows[row, pos:pos + n_days] = cfg.jitter_floor + (total - floor_total) * prop
                pos += n_days
    return InflowEnsemble(dt.date(cfg.start_year, 6, 1), flows, m, tuple(idx))


def sample_subset(e: InflowEnsemble, k: int, seed: int) -> InflowEnsemble:
    """``k`` distinct realizations drawn uniformly without replacement, in index order."""
    if not 1 <= k <= e.n_realizations:
        raise ValueError(f"subset size {k} outside [1, {e.n_realizations}]")
    if k == e.n_realizations:
        return e.subset(range(k))
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(e.n_realizations, size=k, replace=False))
    return e.subset(rows)


# --- persistence -----------------------------------------------------------

def save_packed(e: InflowEnsemble, path: str | Path) -> None:
    """Single binary container: magic, header, little-endian float64 (NR, T)."""
    with Path(path).open("wb") as fh:
        fh.write(PACKED_MAGIC)
        fh.write(_PACKED_HEADER.pack(e.n_realizations, e.steps, e.years,
                                     e.start.year, e.start.month, e.start.day))
        fh.write(np.asarray(e.indices, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(e.flows, dtype="<f8").tobytes())


def load_packed(path: str | Path) -> InflowEnsemble:
    raw = Path(path).read_bytes()
    if raw[:16] != PACKED_MAGIC:
        raise SeriesError(f"{path}: not a packed ensemble (bad magic)")
    nr, t, years, y, mo, d = _PACKED_HEADER.unpack_from(raw, 16)
    off = 16 + _PACKED_HEADER.size
    idx = np.frombuffer(raw, dtype="<i8", count=nr, offset=off)
    off += 8 * nr
    if len(raw) != off + 8 * nr * t:
        raise SeriesError(f"{path}: truncated ensemble payload")
    flows = np.frombuffer(raw, dtype="<f8", count=nr * t, offset=off).reshape(nr, t)
    return InflowEnsemble(dt.date(y, mo, d), flows, years, tuple(int(i) for i in idx))


def write_ensemble_dir(e: InflowEnsemble, directory: str | Path, seed: int,
                       model_hash: str) -> dict:
    """One CSV per realization plus ``manifest.json``; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for j, idx in enumerate(e.indices):
        name = f"realization_{idx:06d}.csv"
        write_daily_csv(e.realization(j), directory / name)
        files.append(name)
    manifest = {
        "seed": seed,
        "realizations": e.n_realizations,
        "years": e.years,
        "steps": e.steps,
        "start": e.start.isoformat(),
        "model_hash": model_hash,
        "indices": list(e.indices),
        "files": files,
        "content_hash": ensemble_digest(e),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_ensemble_dir(directory: str | Path) -> InflowEnsemble:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    series = [load_daily_csv(directory / f) for f in manifest["files"]]
    start = series[0].start
    if any(s.start != start or len(s) != manifest["steps"] for s in series):
        raise SeriesError(f"{directory}: realizations are not aligned")
    return InflowEnsemble(start, np.vstack([s.values for s in series]), manifest["years"],
                          tuple(manifest["indices"]))


def ensemble_digest(e: InflowEnsemble) -> str:
    h = hashlib.sha256()
    h.update(e.start.isoformat().encode())
    h.update(np.asarray(e.indices, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(e.flows, dtype="<f8").tobytes())
    return h.hexdigest()
