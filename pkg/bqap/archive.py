from enum import Enum
from typing import Dict, Iterable, Iterator, List, Tuple

from pydantic import BaseModel, ConfigDict

from bqap.models import EvaluatedSolution, ObjectivePair


def dominates(a: ObjectivePair, b: ObjectivePair) -> bool:
    """Minimisation dominance: no worse in both objectives, strictly better in one"""
    return a.f1 <= b.f1 and a.f2 <= b.f2 and (a.f1 < b.f1 or a.f2 < b.f2)


def nondominated_filter(points: Iterable[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Drop duplicate and dominated points; result is ascending in f1, strictly descending in f2"""
    front: List[Tuple[float, float]] = []
    best_f2 = float("inf")
    for f1, f2 in sorted(set(points)):
        if f2 < best_f2:
            front.append((f1, f2))
            best_f2 = f2
    return front


class InsertStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    DUPLICATE_KEPT = "duplicate-kept"


class InsertOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: InsertStatus
    removed: int = 0


class Archive:
    """Mutually non-dominated set of evaluated solutions, one entry per objective pair.

    Single writer: the runner that owns the archive mutates it, readers only look
    between insertions.
    """

    def __init__(self, solutions: Iterable[EvaluatedSolution] = ()):
        self._entries: Dict[Tuple[float, float], EvaluatedSolution] = {}
        for solution in solutions:
            self.insert(solution)

    def insert(self, solution: EvaluatedSolution) -> InsertOutcome:
        candidate = solution.objectives
        key = candidate.as_tuple()
        if key in self._entries:
            return InsertOutcome(status=InsertStatus.DUPLICATE_KEPT)

        dominated_keys = []
        for existing_key, entry in self._entries.items():
            if dominates(entry.objectives, candidate):
                return InsertOutcome(status=InsertStatus.REJECTED)
            if dominates(candidate, entry.objectives):
                dominated_keys.append(existing_key)

        for existing_key in dominated_keys:
            del self._entries[existing_key]
        self._entries[key] = solution
        return InsertOutcome(status=InsertStatus.ACCEPTED, removed=len(dominated_keys))

    def extend(self, solutions: Iterable[EvaluatedSolution]) -> int:
        """Insert in order; returns how many were accepted"""
        accepted = 0
        for solution in solutions:
            if self.insert(solution).status is InsertStatus.ACCEPTED:
                accepted += 1
        return accepted

    def front_sorted(self) -> List[EvaluatedSolution]:
        return [self._entries[key] for key in sorted(self._entries)]

    def objectives(self) -> List[ObjectivePair]:
        return [entry.objectives for entry in self.front_sorted()]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[EvaluatedSolution]:
        return iter(self.front_sorted())
