"""Steady-state ε-MOEA with auto-adaptive operator selection and restarts.

Follows the Borg design: each iteration picks a variation operator with
probability proportional to the number of archive members it produced
(plus one), draws one parent from the ε-archive and the rest from the
population by tournament, and evaluates a single offspring. Stalled
ε-progress or a drifting population-to-archive ratio triggers a restart
that rebuilds the population around the archive.
"""

from __future__ import annotations

import logging
import math
import pickle
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .archive import EpsilonArchive, Individual
from .operators import DEFAULT_OPERATORS, OPERATORS, polynomial_mutation, reflect, uniform_mutation

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("nfe", "archive_size", "eps_progress", "restarts") + tuple(
    f"p_{name}" for name in DEFAULT_OPERATORS) + ("hv_estimate",)


@dataclass(frozen=True)
class Problem:
    """Box-bounded minimization problem.

    ``function(genome, key)`` returns the minimized objective vector; ``key``
    is ``(run_seed, evaluation_index)`` so stochastic fitness is reproducible.
    """

    lower: np.ndarray
    upper: np.ndarray
    n_obj: int
    function: Callable[[np.ndarray, tuple[int, int]], Sequence[float]]

    @property
    def n_vars(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class RunConfig:
    nfe: int = 10_000
    population_size: int = 100
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    operators: tuple[str, ...] = DEFAULT_OPERATORS
    adaptive: bool = True
    restarts: bool = True
    stall_window: int = 100
    population_ratio: float = 4.0
    ratio_tolerance: float = 0.25
    injection_rate: float = 0.25
    selection_ratio: float = 0.02
    min_population: int = 10
    max_population: int = 10_000
    update_interval: int = 100
    checkpoint_interval: int = 500

    def __post_init__(self):
        if self.nfe < self.population_size:
            raise ValueError("NFE budget must cover the initial population")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        unknown = set(self.operators) - set(OPERATORS)
        if unknown or not self.operators:
            raise ValueError(f"unknown operators: {sorted(unknown)}")


@dataclass
class Snapshot:
    nfe: int
    genomes: np.ndarray
    objectives: np.ndarray


@dataclass
class RunResult:
    seed: int
    archive: EpsilonArchive
    log: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    operator_usage: dict = field(default_factory=dict)
    nfe: int = 0
    restarts: int = 0


class EvaluationError(RuntimeError):
    pass


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


class BorgRun:
    """Mutable optimizer state; picklable (without the problem) for checkpoints."""

    def __init__(self, problem: Problem, epsilons, rc: RunConfig, seed: int):
        self.problem = problem
        self.rc = rc
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.lower = np.asarray(problem.lower, dtype=float)
        self.upper = np.asarray(problem.upper, dtype=float)
        self.archive = EpsilonArchive(np.asarray(epsilons, dtype=float))
        self.population: list[Individual] = []
        self.ops = [OPERATORS[name] for name in rc.operators]
        self.probs = np.full(len(self.ops), 1.0 / len(self.ops))
        self.usage = np.zeros(len(self.ops), dtype=np.int64)
        self.nfe = 0
        self.restarts = 0
        self.tournament = max(2, int(rc.selection_ratio * rc.population_size))
        self.last_progress = 0
        self.log: list[dict] = []
        self.snapshots: list[Snapshot] = []
        self.initialized = False

    # -- persistence ------------------------------------------------------
    def __getstate__(self):
        state = self.__dict__.copy()
        state["problem"] = None
        return state

    def save(self, path: str | Path) -> None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_bytes(pickle.dumps(self))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path, problem: Problem) -> "BorgRun":
        run = pickle.loads(Path(path).read_bytes())
        run.problem = problem
        return run

    # -- evaluation -------------------------------------------------------
    def _evaluate(self, genome: np.ndarray, operator: int) -> Individual:
        key = (self.seed, self.nfe)
        try:
            f = np.asarray(self.problem.function(genome, key), dtype=float)
        except Exception as exc:
            raise EvaluationError(
                f"evaluation {self.nfe} (seed {self.seed}) failed for genome {genome.tolist()}: {exc}"
            ) from exc
        if f.shape != (self.problem.n_obj,) or not np.all(np.isfinite(f)):
            raise EvaluationError(f"evaluation {self.nfe} returned invalid objectives {f}")
        self.nfe += 1
        ind = Individual(genome, f, operator, self.nfe)
        self.archive.insert(ind)
        self._after_evaluation()
        return ind

    def _after_evaluation(self) -> None:
        rc = self.rc
        if self.nfe % rc.checkpoint_interval == 0 or self.nfe == rc.nfe:
            self._record()

    def _record(self) -> None:
        if self.snapshots and self.snapshots[-1].nfe == self.nfe:
            return
        self.snapshots.append(Snapshot(self.nfe, self.archive.genomes(), self.archive.objectives()))
        row = {"nfe": self.nfe, "archive_size": len(self.archive),
               "eps_progress": self.archive.improvements, "restarts": self.restarts}
        full = dict.fromkeys(DEFAULT_OPERATORS, 0.0)
        for op, p in zip(self.ops, self.probs):
            full[op.name] = float(p)
        row.update({f"p_{k}": v for k, v in full.items()})
        row["hv_estimate"] = float("nan")
        self.log.append(row)

    def _budget_left(self) -> bool:
        return self.nfe < self.rc.nfe

    # -- selection and variation -----------------------------------------
    def _tournament(self) -> Individual:
        pop = self.population
        idx = self.rng.integers(len(pop), size=self.tournament)
        winner = pop[idx[0]]
        for i in idx[1:]:
            if _dominates(pop[i].objectives, winner.objectives):
                winner = pop[i]
        return winner

    def _offspring(self, op_index: int) -> np.ndarray:
        op = self.ops[op_index]
        arch = self.archive.members
        parents = [arch[self.rng.integers(len(arch))].genome]
        parents += [self._tournament().genome for _ in range(op.arity - 1)]
        parents = np.array(parents)[self.rng.permutation(op.arity)]
        child = op.apply(parents, self.lower, self.upper, self.rng)
        child = reflect(np.asarray(child, dtype=float), self.lower, self.upper)
        if op.mutate_after:
            child = polynomial_mutation(child, self.lower, self.upper, self.rng)
        return reflect(child, self.lower, self.upper)

    def _add_to_population(self, child: Individual) -> None:
        pop = self.population
        dominated = [i for i, p in enumerate(pop) if _dominates(child.objectives, p.objectives)]
        if dominated:
            pop[dominated[self.rng.integers(len(dominated))]] = child
        elif any(_dominates(p.objectives, child.objectives) for p in pop):
            return
        else:
            pop[self.rng.integers(len(pop))] = child

    def _update_probabilities(self) -> None:
        if not self.rc.adaptive:
            return
        counts = np.zeros(len(self.ops))
        for m in self.archive.members:
            if m.operator >= 0:
                counts[m.operator] += 1
        counts += 1.0
        self.probs = counts / counts.sum()

    # -- restarts ---------------------------------------------------------
    def _needs_restart(self) -> bool:
        stalled = self.archive.improvements <= self.last_progress
        ratio = len(self.population) / max(len(self.archive), 1)
        target = self.rc.population_ratio
        drifted = abs(ratio - target) > self.rc.ratio_tolerance * target
        return stalled or drifted

    def _restart(self) -> None:
        rc = self.rc
        self.restarts += 1
        size = int(np.clip(round(len(self.archive) / rc.injection_rate),
                           rc.min_population, rc.max_population))
        size = max(size, len(self.archive))
        self.population = [m for m in self.archive.members]
        self.tournament = max(2, int(rc.selection_ratio * size))
        um = self.ops.index(OPERATORS["um"]) if OPERATORS["um"] in self.ops else -1
        while len(self.population) < size and self._budget_left():
            src = self.archive.members[self.rng.integers(len(self.archive))]
            genome = uniform_mutation(src.genome[None, :], self.lower, self.upper, self.rng)
            self.population.append(self._evaluate(genome, um))
        logger.debug("seed %d restart %d at nfe %d: population %d, archive %d",
                     self.seed, self.restarts, self.nfe, len(self.population), len(self.archive))

    # -- main loop --------------------------------------------------------
    def initialize(self) -> None:
        n = self.rc.population_size
        while len(self.population) < n and self._budget_left():
            genome = self.rng.uniform(self.lower, self.upper)
            self.population.append(self._evaluate(genome, -1))
        self.last_progress = self.archive.improvements
        self.initialized = len(self.population) >= n

    def iterate(self) -> None:
        op_index = int(self.rng.choice(len(self.ops), p=self.probs))
        self.usage[op_index] += 1
        genome = self._offspring(op_index)
        child = self._evaluate(genome, op_index)
        self._add_to_population(child)
        if self.nfe % self.rc.update_interval == 0:
            self._update_probabilities()
        if self.rc.restarts and self.nfe % self.rc.stall_window == 0:
            if self._needs_restart():
                self._restart()
            self.last_progress = self.archive.improvements

    def run(self, stop_at: int | None = None, checkpoint_path: str | Path | None = None,
            checkpoint_every: int | None = None) -> None:
        limit = self.rc.nfe if stop_at is None else min(stop_at, self.rc.nfe)
        if not self.initialized:
            self.initialize()
        last_saved = self.nfe
        while self.nfe < limit:
            self.iterate()
            if checkpoint_path and checkpoint_every and self.nfe - last_saved >= checkpoint_every:
                self.save(checkpoint_path)
                last_saved = self.nfe
        if self.nfe >= self.rc.nfe:
            self._record()

    def result(self) -> RunResult:
        usage = {op.name: int(u) for op, u in zip(self.ops, self.usage)}
        return RunResult(self.seed, self.archive, list(self.log), list(self.snapshots), usage,
                         self.nfe, self.restarts)


def evolve(problem: Problem, epsilons, rc: RunConfig, seed: int,
           checkpoint_path: str | Path | None = None, checkpoint_every: int | None = None,
           resume: bool = False, stop_at: int | None = None) -> RunResult:
    """Run one seed to the NFE budget (or ``stop_at``), optionally resuming from a checkpoint."""
    if resume and checkpoint_path and Path(checkpoint_path).exists():
        run = BorgRun.load(checkpoint_path, problem)
        logger.info("resumed seed %d at nfe %d", run.seed, run.nfe)
    else:
        run = BorgRun(problem, epsilons, rc, seed)
    run.run(stop_at, checkpoint_path=checkpoint_path, checkpoint_every=checkpoint_every)
    if checkpoint_path:
        run.save(checkpoint_path)
    return run.result()


def merge_archives(archives: Sequence[EpsilonArchive], epsilons) -> EpsilonArchive:
    merged = EpsilonArchive(np.asarray(epsilons, dtype=float))
    for a in archives:
        for m in a.members:
            merged.insert(m)
    return merged


@dataclass
class MultiSeedResult:
    runs: list
    merged: EpsilonArchive
    reference: np.ndarray | None = None
    trajectories: dict = field(default_factory=dict)  # seed -> [(nfe, hv)]


def hv_reference(points: np.ndarray, margin: float = 0.1) -> np.ndarray:
    """Worst value per objective pushed outward by ``margin`` of its magnitude."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    worst = pts.max(axis=0)
    best = pts.min(axis=0)
    pad = margin * np.abs(worst)
    fallback = margin * np.maximum(worst - best, 1.0)
    return worst + np.where(pad > 0, pad, fallback)


def run_multiseed(problem: Problem, epsilons, rc: RunConfig, hv_samples: int = 1_000_000,
                  hv: Callable | None = None, checkpoint_dir: str | Path | None = None,
                  resume: bool = False, stop_at: int | None = None) -> MultiSeedResult:
    """Run every seed in ``rc.seeds``, merge archives and record HV trajectories."""
    from ..analysis import hypervolume

    hv = hv or (lambda pts, ref: hypervolume(pts, ref, samples=hv_samples))
    runs = []
    for s in rc.seeds:
        ckpt = Path(checkpoint_dir) / f"seed_{s}.ckpt" if checkpoint_dir else None
        every = rc.checkpoint_interval if ckpt else None
        runs.append(evolve(problem, epsilons, rc, s, ckpt, every, resume, stop_at))
    merged = merge_archives([r.archive for r in runs], epsilons)
    observed = [snap.objectives for r in runs for snap in r.snapshots if len(snap.objectives)]
    ref = hv_reference(np.vstack(observed)) if observed else None
    out = MultiSeedResult(runs, merged, ref)
    if ref is not None:
        for r in runs:
            traj = []
            for snap, row in zip(r.snapshots, r.log):
                value = hv(snap.objectives, ref)
                row["hv_estimate"] = value
                traj.append((snap.nfe, value))
            out.trajectories[r.seed] = traj
    return out
