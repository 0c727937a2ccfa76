"""Scalarisation weight schedules and the runners that drive a backend with them.

uniform             evenly spaced weights, independent backend calls
adaptive-dichotomic after the two single-objective runs, target the largest gap of the
                    current front with the weight that equalises the gap endpoints
adaptive-averages   same gap targeting, next weight is the midpoint of the weights that
                    generated the gap endpoints

Gaps are euclidean distances between neighbours on the min-max normalised front.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

from bqap.archive import Archive
from bqap.errors import DegenerateFrontError, DegeneratePairError, ValidationError
from bqap.models import (
    BiQapInstance,
    EvaluatedSolution,
    MethodKind,
    ObjectivePair,
    ScalarisationPlan,
    SolverResult,
    WeightVector,
)
from bqap.solver_service import SolverBackend

logger = logging.getLogger(__name__)

DUPLICATE_WEIGHT_TOLERANCE = 1e-9
FIRST_OBJECTIVE = WeightVector(lambda1=1.0, lambda2=0.0)
SECOND_OBJECTIVE = WeightVector(lambda1=0.0, lambda2=1.0)
MIDPOINT = WeightVector(lambda1=0.5, lambda2=0.5)

IterationCallback = Callable[[int, WeightVector, Archive], None]


def uniform_weights(num_weights: int) -> List[WeightVector]:
    if num_weights < 1:
        raise ValidationError(f"need at least one weight, got {num_weights}")
    if num_weights == 1:
        return [MIDPOINT]
    return [WeightVector.from_lambda1(i / (num_weights - 1)) for i in range(num_weights)]


def _ranked_gaps(front: Sequence[ObjectivePair]) -> List[Tuple[int, float]]:
    """(left index, normalised distance) of neighbouring points, largest first, leftmost on ties"""
    lows = [min(p.f1 for p in front), min(p.f2 for p in front)]
    spans = [max(p.f1 for p in front) - lows[0], max(p.f2 for p in front) - lows[1]]

    def scaled(value: float, axis: int) -> float:
        return (value - lows[axis]) / spans[axis] if spans[axis] > 0 else 0.0

    gaps = []
    for k in range(len(front) - 1):
        left, right = front[k], front[k + 1]
        distance = math.hypot(scaled(right.f1, 0) - scaled(left.f1, 0), scaled(right.f2, 1) - scaled(left.f2, 1))
        gaps.append((k, distance))
    gaps.sort(key=lambda gap: (-gap[1], front[gap[0]].f1))
    return gaps


def largest_gap(front: Sequence[ObjectivePair]) -> Tuple[ObjectivePair, ObjectivePair, float]:
    if len(front) < 2:
        raise DegenerateFrontError(f"largest gap needs at least 2 points, got {len(front)}")
    ordered = sorted(front, key=lambda p: p.as_tuple())
    k, distance = _ranked_gaps(ordered)[0]
    return ordered[k], ordered[k + 1], distance


def dichotomic_weight(left: ObjectivePair, right: ObjectivePair) -> WeightVector:
    """Weight under which both endpoints have the same scalarised value"""
    if not (left.f1 < right.f1 and left.f2 > right.f2):
        raise DegeneratePairError(
            f"endpoints must trade off strictly: got ({left.f1}, {left.f2}) and ({right.f1}, {right.f2})"
        )
    rise = left.f2 - right.f2
    run = right.f1 - left.f1
    return WeightVector.from_lambda1(rise / (rise + run))


def averages_weight(left: WeightVector, right: WeightVector) -> WeightVector:
    return WeightVector(
        lambda1=(left.lambda1 + right.lambda1) / 2.0,
        lambda2=(left.lambda2 + right.lambda2) / 2.0,
    )


def _is_used(weight: WeightVector, used: Sequence[WeightVector]) -> bool:
    return any(weight.matches(other, DUPLICATE_WEIGHT_TOLERANCE) for other in used)


def _widest_used_interval(used: Sequence[WeightVector]) -> WeightVector:
    """Midpoint of the neighbouring used weights (by lambda1) that lie furthest apart"""
    lambdas = sorted({w.lambda1 for w in used})
    if len(lambdas) < 2:
        return MIDPOINT
    k = max(range(len(lambdas) - 1), key=lambda i: (lambdas[i + 1] - lambdas[i], -i))
    return WeightVector.from_lambda1((lambdas[k] + lambdas[k + 1]) / 2.0)


def next_adaptive_weight(
    front: Sequence[EvaluatedSolution],
    used: Sequence[WeightVector],
    method: MethodKind,
) -> WeightVector:
    """Next weight for an adaptive method given the archive front (ascending f1)"""
    if len(front) >= 2:
        objectives = [s.objectives for s in front]
        for k, distance in _ranked_gaps(objectives):
            left, right = front[k], front[k + 1]
            if method is MethodKind.ADAPTIVE_DICHOTOMIC:
                candidate = dichotomic_weight(left.objectives, right.objectives)
            else:
                candidate = averages_weight(left.generating_weight, right.generating_weight)
            if not _is_used(candidate, used):
                return candidate
            logger.debug(f"Gap at f1={left.objectives.f1:g} (distance {distance:.4g}) gives a used weight, trying the next gap")
    elif not _is_used(MIDPOINT, used):
        return MIDPOINT

    fallback = _widest_used_interval(used)
    logger.debug(f"Falling back to weight {fallback.lambda1:.6g} between the furthest used weights")
    return fallback


def _solve(
    backend: SolverBackend,
    instance: BiQapInstance,
    plan: ScalarisationPlan,
    weight: WeightVector,
    index: int,
) -> SolverResult:
    result = backend.solve(plan.request(instance, weight, index))
    logger.debug(
        f"{plan.method.value} call {index + 1}/{plan.num_weights}: weight ({weight.lambda1:.6g}, {weight.lambda2:.6g}) "
        f"best {result.best_scalarised:.6g}, {len(result.solutions)} solutions, {result.wall_time:.3f}s"
    )
    return result


def run_uniform(
    instance: BiQapInstance,
    backend: SolverBackend,
    plan: ScalarisationPlan,
    on_iteration: Optional[IterationCallback] = None,
    workers: int = 1,
) -> Archive:
    """One backend call per evenly spaced weight; results merge in weight order"""
    weights = uniform_weights(plan.num_weights)
    archive = Archive()

    def call(indexed: Tuple[int, WeightVector]) -> SolverResult:
        index, weight = indexed
        return _solve(backend, instance, plan, weight, index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(call, enumerate(weights)))
    else:
        results = map(call, enumerate(weights))

    for index, (weight, result) in enumerate(zip(weights, results)):
        archive.extend(result.solutions)
        if on_iteration:
            on_iteration(index, weight, archive)
    return archive


def run_adaptive(
    instance: BiQapInstance,
    backend: SolverBackend,
    plan: ScalarisationPlan,
    on_iteration: Optional[IterationCallback] = None,
) -> Archive:
    """Minimise each objective alone, then keep filling the largest gap of the front"""
    if not plan.method.is_adaptive:
        raise ValidationError(f"run_adaptive needs an adaptive method, got {plan.method.value}")

    archive = Archive()
    used: List[WeightVector] = []

    def issue(weight: WeightVector) -> None:
        index = len(used)
        used.append(weight)
        archive.extend(_solve(backend, instance, plan, weight, index).solutions)
        if on_iteration:
            on_iteration(index, weight, archive)

    issue(FIRST_OBJECTIVE)
    issue(SECOND_OBJECTIVE)
    for _ in range(plan.num_weights - 2):
        issue(next_adaptive_weight(archive.front_sorted(), used, plan.method))
    return archive


def run_method(
    instance: BiQapInstance,
    backend: SolverBackend,
    plan: ScalarisationPlan,
    on_iteration: Optional[IterationCallback] = None,
    workers: int = 1,
) -> Archive:
    if plan.method is MethodKind.UNIFORM:
        return run_uniform(instance, backend, plan, on_iteration, workers)
    return run_adaptive(instance, backend, plan, on_iteration)
