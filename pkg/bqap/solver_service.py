import math
import time
import logging
from itertools import islice, permutations
from typing import Dict, Iterable, Iterator, List, Optional, Protocol, Tuple

import numpy as np

from bqap.archive import nondominated_filter
from bqap.config import get_settings
from bqap.encoding import evaluate_objectives, evaluate_objectives_batch, scalarised_flow, scalarised_value
from bqap.errors import CapacityError, ValidationError
from bqap.models import (
    Assignment,
    BiQapInstance,
    BudgetMode,
    EvaluatedSolution,
    ObjectivePair,
    SolverRequest,
    SolverResult,
    WeightVector,
)

logger = logging.getLogger(__name__)

RESULT_CAP = 20
EXHAUSTIVE_MAX_N = 10
EXHAUSTIVE_BATCH = 4096

# Annealing schedule
TEMPERATURE_SAMPLES = 100
MIN_INITIAL_TEMPERATURE = 1.0
COOLING_RATE = 0.995
RESTART_RATIO = 1e-3


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; the same seed reproduces the same draws on every platform"""
    return np.random.Generator(np.random.PCG64(seed))


def selection_key(objectives: ObjectivePair, weight: WeightVector, loc: Tuple[int, ...]) -> Tuple[float, float, Tuple[int, ...]]:
    """Scalarised value first; ties go to the better objective sum, then the assignment"""
    return (scalarised_value(objectives, weight), objectives.f1 + objectives.f2, loc)


def evaluate_solutions(request: SolverRequest, locs: Iterable[Tuple[int, ...]]) -> List[EvaluatedSolution]:
    """Exact evaluation of distinct assignments, ordered by selection key"""
    solutions = []
    for loc in dict.fromkeys(tuple(int(v) for v in loc) for loc in locs):
        assignment = Assignment(loc=loc)
        solutions.append(
            EvaluatedSolution(
                assignment=assignment,
                objectives=evaluate_objectives(request.instance, assignment),
                generating_weight=request.weight,
            )
        )
    solutions.sort(key=lambda s: selection_key(s.objectives, request.weight, s.assignment.loc))
    return solutions


def build_result(request: SolverRequest, solutions: List[EvaluatedSolution], started: float) -> SolverResult:
    best = min(scalarised_value(s.objectives, request.weight) for s in solutions)
    return SolverResult(solutions=solutions, best_scalarised=best, wall_time=time.perf_counter() - started)


class SolverBackend(Protocol):
    name: str

    def solve(self, request: SolverRequest) -> SolverResult:
        ...


class _BestPool:
    """Best distinct assignments seen so far, by approximate scalarised cost"""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.entries: Dict[Tuple[int, ...], float] = {}
        self.threshold = math.inf

    def offer(self, cost: float, loc: np.ndarray) -> None:
        if cost > self.threshold:
            return
        key = tuple(loc.tolist())
        if key in self.entries:
            return
        self.entries[key] = cost
        if len(self.entries) >= 2 * self.capacity:
            self._prune()

    def _prune(self) -> None:
        kept = sorted(self.entries.items(), key=lambda item: (item[1], item[0]))[: self.capacity]
        self.entries = dict(kept)
        if len(kept) == self.capacity:
            self.threshold = kept[-1][1]

    def best(self) -> List[Tuple[int, ...]]:
        self._prune()
        return list(self.entries)


class _Budget:
    def __init__(self, request: SolverRequest, started: float):
        self.remaining: Optional[int] = None
        self.deadline: Optional[float] = None
        if request.budget_mode is BudgetMode.ITERATIONS:
            self.remaining = request.iterations
        else:
            self.deadline = started + request.time_limit

    def take(self, wanted: int) -> int:
        """Number of proposals granted for the next sweep"""
        if self.remaining is None:
            return wanted
        granted = min(wanted, self.remaining)
        self.remaining -= granted
        return granted

    @property
    def exhausted(self) -> bool:
        if self.remaining is not None:
            return self.remaining <= 0
        return time.perf_counter() >= self.deadline


def _total_cost(flow: np.ndarray, dist: np.ndarray, loc: np.ndarray) -> float:
    return float(np.sum(flow * dist[np.ix_(loc, loc)]))


def _touching_cost(flow: np.ndarray, dist: np.ndarray, loc: np.ndarray, r: int, s: int) -> float:
    """Part of the cost that involves facility r or s"""
    lr, ls = loc[r], loc[s]
    rows = flow[r] @ dist[lr, loc] + flow[s] @ dist[ls, loc]
    cols = flow[:, r] @ dist[loc, lr] + flow[:, s] @ dist[loc, ls]
    both = (
        flow[r, r] * dist[lr, lr]
        + flow[r, s] * dist[lr, ls]
        + flow[s, r] * dist[ls, lr]
        + flow[s, s] * dist[ls, ls]
    )
    return rows + cols - both


class SimulatedAnnealingBackend:
    """Permutation-space annealing with a pairwise-swap neighbourhood.

    Temperature starts at the spread of the scalarised cost over random assignments,
    cools geometrically once per sweep of n(n-1)/2 proposals and the search restarts
    from a fresh random assignment when it has cooled below RESTART_RATIO of the start.
    """

    name = "sa"

    def solve(self, request: SolverRequest) -> SolverResult:
        started = time.perf_counter()
        instance = request.instance
        n = instance.n
        flow = scalarised_flow(instance, request.weight)
        dist = instance.distances.astype(float)
        rng = make_rng(request.seed)
        budget = _Budget(request, started)

        initial_temperature = self._initial_temperature(flow, dist, rng, n)
        sweep_size = n * (n - 1) // 2
        pool = _BestPool(RESULT_CAP)
        restart_bests: List[Tuple[int, ...]] = []

        while True:
            loc = rng.permutation(n)
            cost = _total_cost(flow, dist, loc)
            best_cost, best_loc = cost, loc.copy()
            pool.offer(cost, loc)
            temperature = initial_temperature

            while temperature >= RESTART_RATIO * initial_temperature and not budget.exhausted:
                granted = budget.take(sweep_size)
                first = rng.integers(0, n, size=granted)
                second = rng.integers(0, n - 1, size=granted)
                second += second >= first
                thresholds = rng.random(granted)

                for r, s, u in zip(first.tolist(), second.tolist(), thresholds.tolist()):
                    before = _touching_cost(flow, dist, loc, r, s)
                    loc[r], loc[s] = loc[s], loc[r]
                    delta = _touching_cost(flow, dist, loc, r, s) - before
                    if delta <= 0 or u < math.exp(-delta / temperature):
                        cost += delta
                        pool.offer(cost, loc)
                        if cost < best_cost:
                            best_cost, best_loc = cost, loc.copy()
                    else:
                        loc[r], loc[s] = loc[s], loc[r]
                temperature *= COOLING_RATE

            restart_bests.append(tuple(best_loc.tolist()))
            logger.debug(f"SA restart {len(restart_bests)} best {best_cost:.6g} (weight {request.weight.lambda1:.6g})")
            if budget.exhausted:
                break

        solutions = evaluate_solutions(request, pool.best() + restart_bests)[:RESULT_CAP]
        result = build_result(request, solutions, started)
        logger.debug(
            f"SA seed={request.seed} weight={request.weight.lambda1:.6g}: best {result.best_scalarised:.6g} "
            f"after {len(restart_bests)} restarts in {result.wall_time:.3f}s"
        )
        return result

    @staticmethod
    def _initial_temperature(flow: np.ndarray, dist: np.ndarray, rng: np.random.Generator, n: int) -> float:
        costs = [_total_cost(flow, dist, rng.permutation(n)) for _ in range(TEMPERATURE_SAMPLES)]
        return max(MIN_INITIAL_TEMPERATURE, float(np.std(costs)))


def _permutation_batches(n: int, size: int) -> Iterator[np.ndarray]:
    source = permutations(range(n))
    while True:
        batch = list(islice(source, size))
        if not batch:
            return
        yield np.array(batch, dtype=np.int64)


def _nondominated_rows(objectives: np.ndarray) -> np.ndarray:
    """Row indices of the non-dominated points; the earliest row wins among duplicates"""
    order = np.lexsort((np.arange(len(objectives)), objectives[:, 1], objectives[:, 0]))
    f2 = objectives[order, 1].astype(float)
    running_min = np.concatenate(([np.inf], np.minimum.accumulate(f2)[:-1]))
    return order[f2 < running_min]


class ExhaustiveBackend:
    """Enumerates all n! assignments; the oracle for small instances.

    Returns every minimiser of the scalarised cost (capped, best selection keys first)
    followed by the non-dominated assignments met during enumeration. The time limit
    does not apply.
    """

    name = "exhaustive"

    def __init__(self, max_ties: Optional[int] = None):
        self.max_ties = max_ties

    def solve(self, request: SolverRequest) -> SolverResult:
        n = request.instance.n
        if n > EXHAUSTIVE_MAX_N:
            raise CapacityError(f"exhaustive enumeration supports n <= {EXHAUSTIVE_MAX_N}, got n={n}")

        started = time.perf_counter()
        max_ties = self.max_ties or get_settings().exhaustive_max_ties
        weight = request.weight

        best_value = math.inf
        tied: List[Tuple[float, Tuple[int, ...]]] = []
        front_objectives = np.empty((0, 2), dtype=np.int64)
        front_locs = np.empty((0, n), dtype=np.int64)

        for locs in _permutation_batches(n, EXHAUSTIVE_BATCH):
            objectives = evaluate_objectives_batch(request.instance, locs)
            values = weight.lambda1 * objectives[:, 0] + weight.lambda2 * objectives[:, 1]

            batch_min = float(values.min())
            tolerance = 1e-12 * (1.0 + abs(batch_min))
            if batch_min < best_value - tolerance:
                best_value = batch_min
                tied = []
            if batch_min <= best_value + tolerance:
                for row in np.flatnonzero(values <= best_value + tolerance):
                    tied.append((float(objectives[row].sum()), tuple(locs[row].tolist())))
                if len(tied) > 2 * max_ties:
                    tied = sorted(tied)[:max_ties]

            merged_objectives = np.concatenate((front_objectives, objectives))
            merged_locs = np.concatenate((front_locs, locs))
            keep = _nondominated_rows(merged_objectives)
            front_objectives, front_locs = merged_objectives[keep], merged_locs[keep]

        minimisers = evaluate_solutions(request, [loc for _, loc in sorted(tied)[:max_ties]])
        seen = {s.assignment.loc for s in minimisers}
        auxiliary = [
            s for s in evaluate_solutions(request, (tuple(row) for row in front_locs.tolist()))
            if s.assignment.loc not in seen
        ]
        auxiliary.sort(key=lambda s: s.objectives.as_tuple())

        result = build_result(request, minimisers + auxiliary, started)
        logger.debug(
            f"Exhaustive n={n} weight={weight.lambda1:.6g}: best {result.best_scalarised:.6g}, "
            f"{len(minimisers)} minimisers, {len(front_objectives)} non-dominated"
        )
        return result


class SolverService:
    """Registry of named scalarised-subproblem backends"""

    def __init__(self):
        self.backends: Dict[str, SolverBackend] = {}
        self.register(SimulatedAnnealingBackend())
        self.register(ExhaustiveBackend())

    def register(self, backend: SolverBackend) -> None:
        self.backends[backend.name] = backend

    def get_backend(self, name: str) -> SolverBackend:
        try:
            return self.backends[name]
        except KeyError:
            raise ValidationError(f"unknown backend {name!r}; available: {', '.join(sorted(self.backends))}")

    def solve(self, name: str, request: SolverRequest) -> SolverResult:
        return self.get_backend(name).solve(request)


# Global service instance
solver_service = SolverService()


def get_backend(name: str) -> SolverBackend:
    return solver_service.get_backend(name)


def solve_sa(request: SolverRequest) -> SolverResult:
    return solver_service.solve("sa", request)


def solve_exhaustive(request: SolverRequest) -> SolverResult:
    return solver_service.solve("exhaustive", request)


def pareto_front(instance: BiQapInstance) -> List[ObjectivePair]:
    """Exact Pareto front by enumeration (n <= 10)"""
    request = SolverRequest(instance=instance, weight=WeightVector(lambda1=1.0, lambda2=0.0), time_limit=1.0, seed=0)
    result = solve_exhaustive(request)
    points = nondominated_filter(s.objectives.as_tuple() for s in result.solutions)
    return [ObjectivePair(f1=f1, f2=f2) for f1, f2 in points]
