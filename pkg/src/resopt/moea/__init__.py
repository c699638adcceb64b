"""ε-dominance multi-objective evolutionary search."""

from .archive import EpsilonArchive, Individual, InsertResult, box_dominates, box_index, corner_distance
from .borg import (
    BorgRun,
    EvaluationError,
    MultiSeedResult,
    Problem,
    RunConfig,
    RunResult,
    evolve,
    hv_reference,
    merge_archives,
    run_multiseed,
)
from .operators import DEFAULT_OPERATORS, OPERATORS

__all__ = [
    "BorgRun", "DEFAULT_OPERATORS", "EpsilonArchive", "EvaluationError", "Individual",
    "InsertResult", "MultiSeedResult", "OPERATORS", "Problem", "RunConfig", "RunResult",
    "box_dominates", "box_index", "corner_distance", "evolve", "hv_reference",
    "merge_archives", "run_multiseed",
]
