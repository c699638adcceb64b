"""Reservoir policy search: binds the simulator and objectives to the MOEA."""

from __future__ import annotations

import numpy as np

from .moea import MultiSeedResult, Problem, RunConfig, run_multiseed
from .objectives import OBJECTIVE_NAMES, EvalConfig, ObjectiveVector, evaluate
from .reservoir import Formulation, PolicyParams, ReservoirConfig

# radii are searched on [RADIUS_FLOOR, 1] so a reflected gene can never reach zero
RADIUS_FLOOR = 1e-4
DEFAULT_EPSILONS = (50.0, 50.0, 0.01, 0.01)


def policy_bounds(k: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Gene bounds for ``k`` RBFs: centers on [-1, 1] then radii on (0, 1]."""
    if k < 1:
        raise ValueError("need at least one RBF")
    lower = np.concatenate([np.full(k, -1.0), np.full(k, RADIUS_FLOOR)])
    upper = np.ones(2 * k)
    return lower, upper


def reservoir_problem(form: Formulation, cfg: ReservoirConfig, ec: EvalConfig,
                      k: int = 1) -> Problem:
    """Minimization problem over RBF genomes.

    Each evaluation draws its own subsample of the ensemble from the seed
    ``(run_seed, evaluation_index)``, so noisy fitness is reproducible.
    """
    lower, upper = policy_bounds(k)

    def objective(genome, key):
        p = PolicyParams.from_genome(genome)
        return evaluate(p, form, cfg, ec, sample_seed=list(key)).minimized()

    return Problem(lower, upper, len(OBJECTIVE_NAMES), objective)


def optimize(form: Formulation, cfg: ReservoirConfig, ec: EvalConfig, rc: RunConfig,
             epsilons=DEFAULT_EPSILONS, k: int = 1, hv_samples: int = 1_000_000,
             checkpoint_dir=None, resume: bool = False, stop_at: int | None = None) -> MultiSeedResult:
    """Multi-seed search for one formulation."""
    return run_multiseed(reservoir_problem(form, cfg, ec, k), epsilons, rc,
                         hv_samples=hv_samples, checkpoint_dir=checkpoint_dir, resume=resume,
                         stop_at=stop_at)


def archive_policies(result: MultiSeedResult) -> list[tuple[PolicyParams, ObjectiveVector, int]]:
    """(policy, objectives, provenance seed) for each merged archive member.

    The provenance seed is the first seed whose own archive holds the genome.
    """
    out = []
    for m in result.merged.members:
        seed = next((r.seed for r in result.runs
                     if any(x is m or np.array_equal(x.genome, m.genome) for x in r.archive.members)),
                    result.runs[0].seed)
        out.append((PolicyParams.from_genome(m.genome), ObjectiveVector.from_minimized(m.objectives),
                    seed))
    return out
