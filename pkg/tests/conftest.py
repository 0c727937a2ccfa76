from itertools import permutations

import numpy as np
import pytest

from bqap.models import BiQapInstance


def make_instance(flow1, flow2, distances, name="test"):
    flow1 = np.asarray(flow1)
    return BiQapInstance(name=name, n=len(flow1), flows=np.stack([flow1, np.asarray(flow2)]), distances=distances)


@pytest.fixture
def small_instance():
    """n=2: f1 is 17 at the identity and 11 at the swap"""
    return make_instance([[0, 2], [5, 0]], [[0, 1], [1, 0]], [[0, 1], [3, 0]], name="small")


@pytest.fixture
def zero_flow_instance():
    def build(n=4, seed=0):
        rng = np.random.default_rng(seed)
        zeros = np.zeros((n, n), dtype=int)
        return make_instance(zeros, zeros, rng.integers(0, 50, size=(n, n)), name=f"zero.{n}")
    return build


@pytest.fixture
def random_instance():
    def build(n, seed, high=20):
        rng = np.random.default_rng(seed)
        return make_instance(
            rng.integers(0, high, size=(n, n)),
            rng.integers(0, high, size=(n, n)),
            rng.integers(0, high, size=(n, n)),
            name=f"random.{n}.{seed}",
        )
    return build


@pytest.fixture
def brute_force_objectives():
    """Every assignment with its objective pair, by plain loops"""
    def enumerate_all(instance):
        n = instance.n
        flows = instance.flows.tolist()
        dist = instance.distances.tolist()
        table = []
        for loc in permutations(range(n)):
            pair = tuple(
                float(sum(flows[k][u][v] * dist[loc[u]][loc[v]] for u in range(n) for v in range(n)))
                for k in range(2)
            )
            table.append((loc, pair))
        return table
    return enumerate_all


def pairwise_nondominated(points):
    unique = set(points)
    return sorted(
        p for p in unique
        if not any(q[0] <= p[0] and q[1] <= p[1] and q != p for q in unique)
    )


@pytest.fixture
def brute_force_front(brute_force_objectives):
    def front(instance):
        return pairwise_nondominated(pair for _, pair in brute_force_objectives(instance))
    return front


def grid_hypervolume(points, r1, r2):
    """Union of boxes [p, ref] by summing the covered cells of the coordinate grid"""
    inside = [p for p in points if p[0] < r1 and p[1] < r2]
    xs = sorted({p[0] for p in inside} | {r1})
    ys = sorted({p[1] for p in inside} | {r2})
    volume = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        for y0, y1 in zip(ys, ys[1:]):
            if any(p[0] <= x0 and p[1] <= y0 for p in inside):
                volume += (x1 - x0) * (y1 - y0)
    return volume
