import numpy as np
import pytest

from bqap.encoding import scalarised_value
from bqap.errors import DegenerateFrontError, DegeneratePairError, ValidationError
from bqap.metrics import hypervolume_2d
from bqap.models import (
    Assignment,
    BudgetMode,
    EvaluatedSolution,
    MethodKind,
    ObjectivePair,
    ReferencePoint,
    ScalarisationPlan,
    WeightVector,
)
from bqap.scalarisation import (
    averages_weight,
    dichotomic_weight,
    largest_gap,
    next_adaptive_weight,
    run_adaptive,
    run_method,
    run_uniform,
    uniform_weights,
)
from bqap.solver_service import ExhaustiveBackend, SimulatedAnnealingBackend


class CountingBackend:
    """Records every request and delegates to the wrapped backend"""

    def __init__(self, inner=None):
        self.inner = inner or ExhaustiveBackend()
        self.name = f"counting-{self.inner.name}"
        self.requests = []

    def solve(self, request):
        self.requests.append(request)
        return self.inner.solve(request)

    @property
    def lambdas(self):
        return [r.weight.lambda1 for r in self.requests]


def plan(method, num_weights, seed=0, iterations=500):
    return ScalarisationPlan(
        method=method,
        num_weights=num_weights,
        seed=seed,
        budget_mode=BudgetMode.ITERATIONS,
        iterations=iterations,
    )


def pair(f1, f2):
    return ObjectivePair(f1=f1, f2=f2)


def evaluated(f1, f2, lambda1):
    return EvaluatedSolution(
        assignment=Assignment(loc=(0, 1)),
        objectives=pair(f1, f2),
        generating_weight=WeightVector.from_lambda1(lambda1),
    )


class TestUniformWeights:
    def test_two(self):
        assert [w.lambda1 for w in uniform_weights(2)] == [0.0, 1.0]

    def test_three(self):
        assert [(w.lambda1, w.lambda2) for w in uniform_weights(3)] == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]

    def test_ten(self):
        lambdas = [w.lambda1 for w in uniform_weights(10)]
        assert lambdas == pytest.approx([i / 9 for i in range(10)])

    def test_one(self):
        assert uniform_weights(1) == [WeightVector(lambda1=0.5, lambda2=0.5)]

    def test_zero(self):
        with pytest.raises(ValidationError):
            uniform_weights(0)


class TestLargestGap:
    def test_tie_picks_leftmost(self):
        left, right, distance = largest_gap([pair(10, 0), pair(0, 10), pair(5, 5)])
        assert (left.as_tuple(), right.as_tuple()) == ((0, 10), (5, 5))
        assert distance == pytest.approx(2**0.5 / 2)

    def test_normalised_distance(self):
        left, right, distance = largest_gap([pair(0, 10), pair(1, 9), pair(10, 0)])
        assert (left.as_tuple(), right.as_tuple()) == ((1, 9), (10, 0))
        assert distance == pytest.approx(1.2728, abs=1e-4)

    def test_single_point(self):
        with pytest.raises(DegenerateFrontError):
            largest_gap([pair(1, 1)])


class TestDichotomicWeight:
    def test_symmetric(self):
        assert dichotomic_weight(pair(0, 10), pair(10, 0)) == WeightVector(lambda1=0.5, lambda2=0.5)

    def test_asymmetric(self):
        weight = dichotomic_weight(pair(0, 10), pair(5, 0))
        assert weight.lambda1 == pytest.approx(2 / 3)
        assert weight.lambda2 == pytest.approx(1 / 3)

    def test_not_a_trade_off(self):
        with pytest.raises(DegeneratePairError):
            dichotomic_weight(pair(3, 3), pair(3, 1))

    def test_equalises_endpoints(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            f1 = np.sort(rng.choice(10_000, size=2, replace=False))
            f2 = np.sort(rng.choice(10_000, size=2, replace=False))[::-1]
            left, right = pair(float(f1[0]), float(f2[0])), pair(float(f1[1]), float(f2[1]))
            weight = dichotomic_weight(left, right)
            assert 0.0 <= weight.lambda1 <= 1.0
            c_left, c_right = scalarised_value(left, weight), scalarised_value(right, weight)
            assert abs(c_left - c_right) <= 1e-9 * (1 + abs(c_left))


class TestAveragesWeight:
    @pytest.mark.parametrize(
        "left,right,expected",
        [((1.0, 0.0), (0.0, 1.0), (0.5, 0.5)), ((0.5, 0.5), (0.0, 1.0), (0.25, 0.75)), ((0.3, 0.7), (0.3, 0.7), (0.3, 0.7))],
    )
    def test_examples(self, left, right, expected):
        weight = averages_weight(WeightVector(lambda1=left[0], lambda2=left[1]), WeightVector(lambda1=right[0], lambda2=right[1]))
        assert (weight.lambda1, weight.lambda2) == pytest.approx(expected)


class TestNextAdaptiveWeight:
    endpoints = [WeightVector.from_lambda1(1.0), WeightVector.from_lambda1(0.0)]

    def test_dichotomic_on_largest_gap(self):
        front = [evaluated(0, 10, 1.0), evaluated(2, 9, 0.0), evaluated(10, 0, 0.0)]
        weight = next_adaptive_weight(front, self.endpoints, MethodKind.ADAPTIVE_DICHOTOMIC)
        assert weight.lambda1 == pytest.approx(9 / 17)

    def test_averages_uses_generating_weights(self):
        front = [evaluated(0, 10, 0.0), evaluated(10, 0, 1.0)]
        weight = next_adaptive_weight(front, self.endpoints, MethodKind.ADAPTIVE_AVERAGES)
        assert weight == WeightVector(lambda1=0.5, lambda2=0.5)

    def test_used_weight_falls_to_next_gap(self):
        front = [evaluated(0, 10, 1.0), evaluated(2, 9, 0.0), evaluated(10, 0, 0.0)]
        used = self.endpoints + [WeightVector.from_lambda1(9 / 17)]
        weight = next_adaptive_weight(front, used, MethodKind.ADAPTIVE_DICHOTOMIC)
        assert weight.lambda1 == pytest.approx(1 / 3)

    def test_all_gaps_used_falls_to_widest_interval(self):
        front = [evaluated(0, 10, 1.0), evaluated(10, 0, 0.0)]
        used = self.endpoints + [WeightVector.from_lambda1(0.5)]
        weight = next_adaptive_weight(front, used, MethodKind.ADAPTIVE_DICHOTOMIC)
        assert weight.lambda1 == pytest.approx(0.25)

    def test_widest_interval_is_preferred(self):
        front = [evaluated(0, 10, 1.0), evaluated(10, 0, 0.0)]
        used = self.endpoints + [WeightVector.from_lambda1(0.5), WeightVector.from_lambda1(0.25)]
        weight = next_adaptive_weight(front, used, MethodKind.ADAPTIVE_DICHOTOMIC)
        assert weight.lambda1 == pytest.approx(0.75)

    def test_single_point_front(self):
        front = [evaluated(0, 0, 1.0)]
        assert next_adaptive_weight(front, self.endpoints, MethodKind.ADAPTIVE_AVERAGES) == WeightVector(lambda1=0.5, lambda2=0.5)
        used = self.endpoints + [WeightVector(lambda1=0.5, lambda2=0.5)]
        assert next_adaptive_weight(front, used, MethodKind.ADAPTIVE_AVERAGES).lambda1 == pytest.approx(0.25)


class TestRunUniform:
    def test_zero_flow(self, zero_flow_instance):
        archive = run_uniform(zero_flow_instance(4), ExhaustiveBackend(max_ties=3), plan(MethodKind.UNIFORM, 5))
        assert [p.as_tuple() for p in archive.objectives()] == [(0, 0)]

    def test_one_call_per_weight(self, random_instance):
        backend = CountingBackend()
        run_uniform(random_instance(4, 2), backend, plan(MethodKind.UNIFORM, 7, seed=10))
        assert backend.lambdas == pytest.approx([i / 6 for i in range(7)])
        assert [r.seed for r in backend.requests] == list(range(10, 17))

    def test_single_weight(self, random_instance):
        backend = CountingBackend()
        run_uniform(random_instance(3, 2), backend, plan(MethodKind.UNIFORM, 1))
        assert backend.lambdas == [0.5]

    def test_contains_single_objective_minimisers(self, random_instance, brute_force_objectives):
        instance = random_instance(3, 8)
        archive = run_uniform(instance, ExhaustiveBackend(), plan(MethodKind.UNIFORM, 2))
        table = [pair for _, pair in brute_force_objectives(instance)]
        best_f1 = min(table)
        best_f2 = min(table, key=lambda p: (p[1], p[0]))
        found = [p.as_tuple() for p in archive.objectives()]
        assert best_f1 in found
        assert best_f2 in found

    def test_threads_do_not_change_the_result(self, random_instance):
        instance = random_instance(7, 5)
        uniform_plan = plan(MethodKind.UNIFORM, 6, seed=3, iterations=800)
        sequential = run_uniform(instance, SimulatedAnnealingBackend(), uniform_plan)
        threaded = run_uniform(instance, SimulatedAnnealingBackend(), uniform_plan, workers=4)
        assert sequential.front_sorted() == threaded.front_sorted()

    def test_solutions_tagged_with_weight(self, random_instance):
        instance = random_instance(4, 6)
        archive = run_uniform(instance, ExhaustiveBackend(), plan(MethodKind.UNIFORM, 4))
        issued = {w.lambda1 for w in uniform_weights(4)}
        assert all(s.generating_weight.lambda1 in issued for s in archive)


class TestRunAdaptive:
    @pytest.mark.parametrize("method", [MethodKind.ADAPTIVE_AVERAGES, MethodKind.ADAPTIVE_DICHOTOMIC])
    def test_endpoints_first_and_call_count(self, random_instance, method):
        backend = CountingBackend()
        run_adaptive(random_instance(5, 4), backend, plan(method, 8, seed=100))
        assert backend.lambdas[:2] == [1.0, 0.0]
        assert len(backend.requests) == 8
        assert [r.seed for r in backend.requests] == list(range(100, 108))
        assert all(abs(r.weight.lambda1 + r.weight.lambda2 - 1) <= 1e-12 for r in backend.requests)

    def test_two_weights_are_the_endpoint_runs(self, random_instance):
        backend = CountingBackend()
        archive = run_adaptive(random_instance(4, 1), backend, plan(MethodKind.ADAPTIVE_DICHOTOMIC, 2))
        assert backend.lambdas == [1.0, 0.0]
        assert len(archive) >= 1

    def test_zero_flow_fallbacks(self, zero_flow_instance):
        backend = CountingBackend(ExhaustiveBackend(max_ties=2))
        archive = run_adaptive(zero_flow_instance(4), backend, plan(MethodKind.ADAPTIVE_AVERAGES, 5))
        assert backend.lambdas == pytest.approx([1.0, 0.0, 0.5, 0.25, 0.75])
        assert [p.as_tuple() for p in archive.objectives()] == [(0, 0)]

    def test_no_weight_issued_twice(self, random_instance):
        for seed in range(5):
            backend = CountingBackend()
            run_adaptive(random_instance(5, seed), backend, plan(MethodKind.ADAPTIVE_AVERAGES, 10))
            lambdas = sorted(backend.lambdas)
            assert all(b - a > 1e-9 for a, b in zip(lambdas, lambdas[1:]))

    @pytest.mark.parametrize("method", [MethodKind.ADAPTIVE_AVERAGES, MethodKind.ADAPTIVE_DICHOTOMIC])
    def test_exhaustive_archive_is_pareto_optimal(self, random_instance, brute_force_front, method):
        for seed in range(20):
            instance = random_instance(6, 500 + seed)
            archive = run_adaptive(instance, ExhaustiveBackend(), plan(method, 10))
            true_front = set(brute_force_front(instance))
            assert {p.as_tuple() for p in archive.objectives()} <= true_front

    def test_hypervolume_never_decreases(self, random_instance, brute_force_objectives):
        instance = random_instance(6, 21)
        table = [pair for _, pair in brute_force_objectives(instance)]
        ref = ReferencePoint(r1=max(p[0] for p in table) + 1, r2=max(p[1] for p in table) + 1)
        trace = []

        def record(index, weight, archive):
            trace.append(hypervolume_2d(archive.objectives(), ref))

        run_adaptive(instance, SimulatedAnnealingBackend(), plan(MethodKind.ADAPTIVE_DICHOTOMIC, 6, iterations=300), record)
        assert len(trace) == 6
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_rejects_uniform_plan(self, random_instance):
        with pytest.raises(ValidationError):
            run_adaptive(random_instance(3, 0), ExhaustiveBackend(), plan(MethodKind.UNIFORM, 3))

    def test_plan_needs_two_weights(self):
        with pytest.raises(ValueError):
            plan(MethodKind.ADAPTIVE_AVERAGES, 1)


def test_run_method_dispatch(random_instance):
    instance = random_instance(4, 3)
    uniform = CountingBackend()
    run_method(instance, uniform, plan(MethodKind.UNIFORM, 3))
    assert uniform.lambdas == [0.0, 0.5, 1.0]
    adaptive = CountingBackend()
    run_method(instance, adaptive, plan(MethodKind.ADAPTIVE_DICHOTOMIC, 3))
    assert adaptive.lambdas[:2] == [1.0, 0.0]
