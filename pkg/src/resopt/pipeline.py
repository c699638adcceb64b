"""Experiment plumbing shared by the CLI: inputs, scenario assembly, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .fixtures import ns_like_demand
from .hydroseries import DAYS_IN_WATER_YEAR, DailySeries, InflowEnsemble, load_daily_csv
from .objectives import EvalConfig, MefBasis
from .reservoir import ReservoirConfig
from .synthgen import GenConfig, GeneratorModel, fit, load_packed, read_ensemble_dir
from .thresholds import FloodThreshold, MefSchedule, flood_threshold, moefcc, percent_of_maf

logger = logging.getLogger(__name__)

ENSEMBLE_FILE = "ensemble.bin"


class InputError(RuntimeError):
    """Missing or unreadable input (exit code 1 at the CLI)."""


def git_blob_hash(path: str | Path) -> str:
    """Content hash in git's blob format, so it matches ``git hash-object``."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def tree_hash(path: str | Path) -> str:
    p = Path(path)
    if p.is_file():
        return git_blob_hash(p)
    h = hashlib.sha1()
    for f in sorted(q for q in p.rglob("*") if q.is_file()):
        h.update(f.relative_to(p).as_posix().encode() + b"\0" + git_blob_hash(f).encode())
    return h.hexdigest()


def write_manifest(out: Path, command: str, cfg: ExperimentConfig, inputs: dict, seeds: dict,
                   outputs: list[Path], extra: dict | None = None) -> Path:
    """JSON manifest: config and its hash, input hashes, seeds and output hashes."""
    manifest = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "inputs": {k: {"path": str(v), "hash": tree_hash(v)} for k, v in sorted(inputs.items())},
        "seeds": seeds,
        "outputs": {p.relative_to(out).as_posix(): tree_hash(p) for p in sorted(outputs)},
    }
    if extra:
        manifest.update(extra)
    path = out / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise InputError(f"{what} not found: {path}")
    return path


def load_history(cfg: ExperimentConfig) -> DailySeries:
    hist = load_daily_csv(_require(cfg.inflow_path(), "inflow record"))
    g = cfg.generator
    if g.fit_first_year or g.fit_last_year:
        years = hist.complete_water_years()
        first = g.fit_first_year or years[0]
        last = g.fit_last_year or years[-1]
        hist = hist.water_year_window(first, last)
    return hist


def load_releases(cfg: ExperimentConfig) -> DailySeries:
    return load_daily_csv(_require(cfg.releases_path(), "release history"))


def load_demand(cfg: ExperimentConfig) -> np.ndarray:
    if not cfg.paths.demand:
        return ns_like_demand()
    path = _require(cfg.resolve(cfg.paths.demand), "demand schedule")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]
    values = np.array([float(r[-1]) for r in rows])
    if values.shape != (DAYS_IN_WATER_YEAR,):
        raise InputError(f"{path}: demand schedule needs {DAYS_IN_WATER_YEAR} rows, got {len(values)}")
    return values


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def build_mef(cfg: ExperimentConfig, hist: DailySeries, fraction: float | None = None) -> MefSchedule:
    t = cfg.thresholds
    if t.method == "moefcc" and fraction is None:
        return moefcc(hist)
    return percent_of_maf(hist, t.fraction if fraction is None else fraction)


def build_flood(cfg: ExperimentConfig) -> FloodThreshold:
    if cfg.reservoir.flood_threshold > 0:
        return FloodThreshold(cfg.reservoir.flood_threshold)
    return flood_threshold(load_releases(cfg))


def build_reservoir(cfg: ExperimentConfig, mef: MefSchedule, flood: FloodThreshold,
                    max_inflow: float) -> ReservoirConfig:
    r = cfg.reservoir
    return ReservoirConfig(
        mef=mef, flood=flood, demand=load_demand(cfg),
        elevation_storage=tuple(tuple(p) for p in r.elevation_storage),
        live_capacity=r.live_capacity, hp_release_cap=r.hp_release_cap,
        hp_power_cap=r.hp_power_cap, efficiency=r.efficiency,
        specific_weight=r.specific_weight, max_inflow=max_inflow,
        canal_power_cap=r.canal_power_cap, canal_head=r.canal_head,
    )


def gen_config(cfg: ExperimentConfig, seed: int | None = None) -> GenConfig:
    g = cfg.generator
    return GenConfig(seed=g.seed if seed is None else seed, realizations=g.realizations,
                     years=g.years, jitter_floor=g.jitter_floor, start_year=g.start_year)


def fit_model(cfg: ExperimentConfig, hist: DailySeries | None = None) -> GeneratorModel:
    return fit(load_history(cfg) if hist is None else hist, inter_annual=cfg.generator.inter_annual)


def ensemble_path(cfg: ExperimentConfig, out: Path) -> Path:
    """Configured ensemble, else the packed file in ``out``, else its CSV directory."""
    if cfg.paths.ensemble:
        return cfg.resolve(cfg.paths.ensemble)
    packed = out / ENSEMBLE_FILE
    as_dir = packed.with_suffix("")
    return as_dir if not packed.exists() and as_dir.is_dir() else packed


def load_ensemble(path: Path) -> InflowEnsemble:
    _require(path, "inflow ensemble (run `resopt gen` first)")
    return read_ensemble_dir(path) if path.is_dir() else load_packed(path)


@dataclass
class Scenario:
    """Everything an optimization or evaluation needs, built from one config."""

    config: ExperimentConfig
    history: DailySeries
    ensemble: InflowEnsemble
    reservoir: ReservoirConfig
    ensemble_path: Path

    def eval_config(self, threads: int = 1) -> EvalConfig:
        e = self.config.evaluation
        return EvalConfig(self.ensemble, e.sample_size, 0, MefBasis(e.mef_basis),
                          self.config.reservoir.s0_fraction, threads)

    def inputs(self) -> dict:
        out = {"inflow": self.config.inflow_path(), "ensemble": self.ensemble_path}
        if self.config.reservoir.flood_threshold <= 0:
            out["releases"] = self.config.releases_path()
        if self.config.paths.demand:
            out["demand"] = self.config.resolve(self.config.paths.demand)
        return out


def build_scenario(cfg: ExperimentConfig, out: Path, fraction: float | None = None) -> Scenario:
    hist = load_history(cfg)
    path = ensemble_path(cfg, out)
    ens = load_ensemble(path)
    if ens.n_realizations < cfg.evaluation.sample_size:
        raise InputError(f"ensemble holds {ens.n_realizations} realizations, "
                         f"fewer than sample_size {cfg.evaluation.sample_size}")
    res = build_reservoir(cfg, build_mef(cfg, hist, fraction), build_flood(cfg), float(ens.flows.max()))
    return Scenario(cfg, hist, ens, res, path)


def monthly_validation(hist: DailySeries, ens: InflowEnsemble, floor: float = 0.0,
                       mean_tol: float = 0.05, sd_tol: float = 0.15) -> tuple[list[dict], bool]:
    """Per-month synthetic vs historical mean and sd of monthly totals."""
    from .hydroseries import WATER_YEAR_MONTHS, monthly_totals

    _, h = monthly_totals(hist)
    template = ens.template()
    months = template.months()
    wy = template.water_years()
    # boundaries of each (water year, month) block, in order
    key = wy * 100 + months
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    totals = np.add.reduceat(ens.flows, starts, axis=1).reshape(ens.n_realizations, -1, 12)
    s = totals.reshape(-1, 12)
    rows, ok = [], True
    for c, m in enumerate(WATER_YEAR_MONTHS):
        hm, hs = h[:, c].mean(), h[:, c].std(ddof=1)
        sm, ss = s[:, c].mean(), s[:, c].std(ddof=1)
        mean_err = abs(sm / hm - 1.0) if hm > 0 else 0.0
        sd_err = abs(ss / hs - 1.0) if hs > 0 else 0.0
        passed = mean_err <= mean_tol and sd_err <= sd_tol
        ok &= passed
        rows.append({"month": m, "hist_mean": hm, "synth_mean": sm, "mean_rel_err": mean_err,
                     "hist_sd": hs, "synth_sd": ss, "sd_rel_err": sd_err, "pass": int(passed)})
    floor_ok = bool(ens.flows.min() >= floor)
    return rows, ok and floor_ok
