"""Experiment configuration: a TOML file with strict, typed sections.

Every key has a default; unknown sections or keys are rejected. Relative
paths resolve against the directory holding the config file, and an unset
inflow or release path falls back to the bundled NS-like fixture.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fixtures import NS_LIKE_HEAD_CURVE
from .moea.operators import DEFAULT_OPERATORS
from .objectives import MefBasis
from .reservoir import Formulation


class ConfigError(ValueError):
    """Invalid configuration (exit code 1 at the CLI)."""


@dataclass(frozen=True)
class PathsSection:
    inflow: str = ""  # empty: bundled NS-like inflow record
    releases: str = ""  # empty: bundled NS-like release history
    demand: str = ""  # empty: NS-like 365-day demand cycle
    ensemble: str = ""  # empty: <out>/ensemble
    out: str = "out"


@dataclass(frozen=True)
class ReservoirSection:
    live_capacity: float = 5733.0
    hp_release_cap: float = 101.9
    hp_power_cap: float = 0.96
    efficiency: float = 0.90
    specific_weight: float = 9810.0
    elevation_storage: list = field(default_factory=lambda: [list(p) for p in NS_LIKE_HEAD_CURVE])
    canal_power_cap: float = 0.0
    canal_head: float = 0.0
    s0_fraction: float = 0.5
    flood_threshold: float = 0.0  # 0: max of the release history


@dataclass(frozen=True)
class GeneratorSection:
    seed: int = 0
    realizations: int = 10_000
    years: int = 10
    jitter_floor: float = 1e-6
    inter_annual: bool = True
    start_year: int = 2000
    fit_first_year: int = 0  # 0: every complete water year in the record
    fit_last_year: int = 0


@dataclass(frozen=True)
class ThresholdSection:
    method: str = "percent_of_maf"
    fraction: float = 0.3


@dataclass(frozen=True)
class OptimizationSection:
    nfe: int = 10_000
    population_size: int = 100
    epsilons: list = field(default_factory=lambda: [50.0, 50.0, 0.01, 0.01])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    formulations: list = field(default_factory=lambda: ["mef-first", "demand-first"])
    rbf_count: int = 1
    operators: list = field(default_factory=lambda: list(DEFAULT_OPERATORS))
    adaptive: bool = True
    restarts: bool = True
    checkpoint_interval: int = 500
    hv_samples: int = 1_000_000


@dataclass(frozen=True)
class EvaluationSection:
    sample_size: int = 100
    mef_basis: str = "efr"
    reevaluation_realizations: int = 100_000
    reevaluation_seed: int = 1
    reevaluation_chunk: int = 2_000


@dataclass(frozen=True)
class SimulationSection:
    first_water_year: int = 1968
    last_water_year: int = 1983


@dataclass(frozen=True)
class SweepSection:
    fractions: list = field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7, 0.8])


@dataclass(frozen=True)
class SelectionSection:
    priorities: list = field(default_factory=lambda: ["deficit_mm3"])
    min_hp_gwh: float = float("-inf")
    max_deficit_mm3: float = float("inf")
    min_mef_rel_pct: float = float("-inf")
    min_flood_rel_pct: float = float("-inf")

    def bounds(self) -> dict:
        return {
            "hp_gwh": (self.min_hp_gwh, None),
            "deficit_mm3": (None, self.max_deficit_mm3),
            "mef_rel_pct": (self.min_mef_rel_pct, None),
            "flood_rel_pct": (self.min_flood_rel_pct, None),
        }


SECTIONS = {
    "paths": PathsSection,
    "reservoir": ReservoirSection,
    "generator": GeneratorSection,
    "thresholds": ThresholdSection,
    "optimization": OptimizationSection,
    "evaluation": EvaluationSection,
    "simulation": SimulationSection,
    "sweep": SweepSection,
    "selection": SelectionSection,
}

THRESHOLD_METHODS = ("percent_of_maf", "moefcc")


def _coerce(section: str, f: dataclasses.Field, value: Any) -> Any:
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    where = f"[{section}].{f.name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be an array")
        return value
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    paths: PathsSection = field(default_factory=PathsSection)
    reservoir: ReservoirSection = field(default_factory=ReservoirSection)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    thresholds: ThresholdSection = field(default_factory=ThresholdSection)
    optimization: OptimizationSection = field(default_factory=OptimizationSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    selection: SelectionSection = field(default_factory=SelectionSection)
    base_dir: str = "."

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        built = {}
        for name, klass in SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"[{name}] must be a table")
            known = {f.name: f for f in fields(klass)}
            bad = set(raw) - set(known)
            if bad:
                raise ConfigError(f"unknown key(s) in [{name}]: {sorted(bad)}")
            built[name] = klass(**{k: _coerce(name, known[k], v) for k, v in raw.items()})
        return cls(**built, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        return cls.from_dict(data, p.resolve().parent)

    def validate(self) -> None:
        r, g, t, o, e = self.reservoir, self.generator, self.thresholds, self.optimization, self.evaluation
        if t.method not in THRESHOLD_METHODS:
            raise ConfigError(f"unknown threshold method {t.method!r}; expected one of {THRESHOLD_METHODS}")
        if not 0 < t.fraction <= 1:
            raise ConfigError("[thresholds].fraction must lie in (0, 1]")
        if any(not 0 < f <= 1 for f in self.sweep.fractions) or not self.sweep.fractions:
            raise ConfigError("[sweep].fractions must be nonempty values in (0, 1]")
        if not 0 <= r.s0_fraction <= 1:
            raise ConfigError("[reservoir].s0_fraction must lie in [0, 1]")
        if g.realizations < 1 or g.years < 1 or g.jitter_floor <= 0:
            raise ConfigError("[generator] needs realizations >= 1, years >= 1, jitter_floor > 0")
        if len(o.epsilons) != 4 or any(not isinstance(x, (int, float)) or x <= 0 for x in o.epsilons):
            raise ConfigError("[optimization].epsilons must be four positive numbers")
        if not o.seeds or any(isinstance(s, bool) or not isinstance(s, int) for s in o.seeds):
            raise ConfigError("[optimization].seeds must be a nonempty list of integers")
        for name in o.formulations:
            try:
                Formulation.parse(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        bad_ops = set(o.operators) - set(DEFAULT_OPERATORS)
        if bad_ops or not o.operators:
            raise ConfigError(f"unknown operators: {sorted(bad_ops)}")
        if o.nfe < o.population_size or o.population_size < 1:
            raise ConfigError("[optimization].nfe must be at least population_size")
        if o.rbf_count < 1:
            raise ConfigError("[optimization].rbf_count must be >= 1")
        if e.mef_basis not in {b.value for b in MefBasis}:
            raise ConfigError(f"unknown mef_basis {e.mef_basis!r}")
        if e.sample_size < 1 or e.sample_size > g.realizations:
            raise ConfigError("[evaluation].sample_size must lie in [1, generator.realizations]")
        try:
            pairs = [tuple(float(x) for x in p) for p in r.elevation_storage]
        except (TypeError, ValueError):
            raise ConfigError("[reservoir].elevation_storage must be [storage, head] pairs") from None
        if len(pairs) < 2 or any(len(p) != 2 for p in pairs):
            raise ConfigError("[reservoir].elevation_storage needs at least two [storage, head] pairs")

    # -- helpers ---------------------------------------------------------
    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def out_dir(self, override: str | None = None) -> Path:
        return Path(override) if override else self.resolve(self.paths.out)

    def inflow_path(self) -> Path:
        return self.resolve(self.paths.inflow) if self.paths.inflow else bundled("ns_like_inflow.csv")

    def releases_path(self) -> Path:
        return self.resolve(self.paths.releases) if self.paths.releases else bundled("ns_like_releases.csv")

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        # TOML and JSON cannot carry infinities; encode them as strings
        for sec in out.values():
            for k, v in sec.items():
                if isinstance(v, float) and v in (float("inf"), float("-inf")):
                    sec[k] = str(v)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_updates(self, **sections) -> "ExperimentConfig":
        """Copy with some fields replaced, e.g. ``with_updates(generator={"seed": 3})``."""
        kw = {}
        for name, changes in sections.items():
            kw[name] = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **kw)


def bundled(name: str) -> Path:
    return Path(str(resources.files("resopt") / "data" / name))
