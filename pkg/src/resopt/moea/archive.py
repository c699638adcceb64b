"""ε-box dominance archive (all objectives minimized)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class InsertResult(enum.Enum):
    ACCEPTED = "accepted"
    DOMINATED = "dominated"
    SAME_BOX_REPLACED = "same-box-replaced"
    SAME_BOX_REJECTED = "same-box-rejected"

    @property
    def stored(self) -> bool:
        return self in (InsertResult.ACCEPTED, InsertResult.SAME_BOX_REPLACED)


@dataclass
class Individual:
    genome: np.ndarray
    objectives: np.ndarray  # minimized
    operator: int = -1  # index of the variation operator that produced it; -1 = random init
    nfe: int = 0

    def copy(self) -> "Individual":
        return Individual(self.genome.copy(), self.objectives.copy(), self.operator, self.nfe)


def box_index(f, eps) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError(f"non-finite objective vector: {f}")
    if np.any(eps <= 0):
        raise ValueError("epsilons must be positive")
    return np.floor(f / eps).astype(np.int64)


def box_dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """Box ``a`` dominates box ``b``: componentwise <= with at least one strict."""
    return bool(np.all(a <= b) and np.any(a < b))


def corner_distance(f, eps) -> float:
    """Distance from the box's lower (ideal) corner, in ε units."""
    scaled = np.asarray(f, dtype=float) / np.asarray(eps, dtype=float)
    return float(np.sqrt(np.sum((scaled - np.floor(scaled)) ** 2)))


@dataclass
class EpsilonArchive:
    epsilons: np.ndarray
    members: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    improvements: int = 0  # ε-progress counter

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=float)
        if np.any(self.epsilons <= 0):
            raise ValueError("epsilons must be positive")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def insert(self, x: Individual) -> InsertResult:
        bx = box_index(x.objectives, self.epsilons)
        for i, ba in enumerate(self.boxes):
            if np.array_equal(ba, bx):
                # the occupant's box already excludes every box dominated by bx
                if corner_distance(x.objectives, self.epsilons) < corner_distance(
                        self.members[i].objectives, self.epsilons):
                    self.members[i] = x
                    return InsertResult.SAME_BOX_REPLACED
                return InsertResult.SAME_BOX_REJECTED
        keep = []
        for i, ba in enumerate(self.boxes):
            if box_dominates(ba, bx):
                return InsertResult.DOMINATED
            if not box_dominates(bx, ba):
                keep.append(i)
        self.members = [self.members[i] for i in keep] + [x]
        self.boxes = [self.boxes[i] for i in keep] + [bx]
        self.improvements += 1
        return InsertResult.ACCEPTED

    def objectives(self) -> np.ndarray:
        if not self.members:
            return np.empty((0, len(self.epsilons)))
        return np.array([m.objectives for m in self.members])

    def genomes(self) -> np.ndarray:
        return np.array([m.genome for m in self.members])

    def copy(self) -> "EpsilonArchive":
        return EpsilonArchive(self.epsilons.copy(), [m.copy() for m in self.members],
                              [b.copy() for b in self.boxes], self.improvements)

    def check_invariant(self) -> None:
        for i, a in enumerate(self.boxes):
            for j, b in enumerate(self.boxes):
                if i != j and (box_dominates(a, b) or np.array_equal(a, b)):
                    raise AssertionError(f"archive boxes {a} and {b} conflict")
