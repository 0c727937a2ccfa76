"""Scalarised constrained quadratic model of the bi-objective QAP.

Binary variable x[i][j] is 1 when facility j sits in location i. Variable (i, j) has
flat index i * n + j. The objective is

    sum_{i,j,l,v} (lambda1 * H1[j][v] + lambda2 * H2[j][v]) * D[i][l] * x[i][j] * x[l][v]

and the exactly-one constraints over every row (g1) and every column (g2) are kept as
hard discrete groups, never folded into the objective as penalties.
"""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Tuple

import numpy as np

from bqap.errors import InfeasibleError, ValidationError
from bqap.models import Assignment, BiQapInstance, BinaryAssignment, ObjectivePair, WeightVector

logger = logging.getLogger(__name__)


def evaluate_objectives(instance: BiQapInstance, assignment: Assignment) -> ObjectivePair:
    """f_k = sum_{u,v} H[k][u][v] * D[loc(u)][loc(v)]"""
    loc = np.asarray(assignment.loc)
    placed = instance.distances[np.ix_(loc, loc)]
    f1, f2 = np.einsum("kuv,uv->k", instance.flows, placed)
    return ObjectivePair(f1=float(f1), f2=float(f2))


def evaluate_objectives_batch(instance: BiQapInstance, locs: np.ndarray) -> np.ndarray:
    """Objective pairs for a (batch, n) array of assignments, as a (batch, 2) integer array"""
    placed = instance.distances[locs[:, :, None], locs[:, None, :]]
    return np.einsum("kuv,buv->bk", instance.flows, placed)


def scalarised_value(objectives: ObjectivePair, weight: WeightVector) -> float:
    return weight.lambda1 * objectives.f1 + weight.lambda2 * objectives.f2


def scalarised_flow(instance: BiQapInstance, weight: WeightVector) -> np.ndarray:
    return weight.lambda1 * instance.flows[0] + weight.lambda2 * instance.flows[1]


@dataclass(frozen=True)
class DiscreteGroup:
    kind: str  # "g1" (row i) or "g2" (column j)
    index: int
    members: Tuple[int, ...]


@dataclass(frozen=True)
class CqmModel:
    n: int
    weight: WeightVector
    linear_terms: Mapping[int, float]
    quadratic_terms: Mapping[Tuple[int, int], float]
    discrete_groups: Tuple[DiscreteGroup, ...]

    @property
    def num_vars(self) -> int:
        return self.n * self.n

    def variable(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.n)


def build_cqm(instance: BiQapInstance, weight: WeightVector) -> CqmModel:
    n = instance.n
    flow = scalarised_flow(instance, weight)

    # kron(D, F)[i*n + j, l*n + v] == D[i][l] * F[j][v]
    products = np.kron(instance.distances.astype(float), flow)
    linear = np.diag(products)
    pair_sums = np.triu(products + products.T, k=1)

    linear_terms = {int(p): float(linear[p]) for p in np.flatnonzero(linear)}
    rows, cols = np.nonzero(pair_sums)
    quadratic_terms = {(int(p), int(q)): float(pair_sums[p, q]) for p, q in zip(rows, cols)}

    groups = [DiscreteGroup("g1", i, tuple(i * n + j for j in range(n))) for i in range(n)]
    groups += [DiscreteGroup("g2", j, tuple(i * n + j for i in range(n))) for j in range(n)]

    logger.debug(
        f"Built model for {instance.name or 'instance'} (n={n}, weight={weight.lambda1:.6g}): "
        f"{len(linear_terms)} linear, {len(quadratic_terms)} quadratic terms"
    )
    return CqmModel(
        n=n,
        weight=weight,
        linear_terms=MappingProxyType(linear_terms),
        quadratic_terms=MappingProxyType(quadratic_terms),
        discrete_groups=tuple(groups),
    )


def encode(assignment: Assignment) -> BinaryAssignment:
    n = assignment.n
    x = np.zeros((n, n), dtype=np.int64)
    x[list(assignment.loc), list(range(n))] = 1
    return BinaryAssignment(x=x)


def decode(binary: BinaryAssignment) -> Assignment:
    x = binary.x
    for i, total in enumerate(x.sum(axis=1)):
        if total != 1:
            raise InfeasibleError("g1", i, int(total))
    for j, total in enumerate(x.sum(axis=0)):
        if total != 1:
            raise InfeasibleError("g2", j, int(total))
    return Assignment(loc=tuple(int(i) for i in np.argmax(x, axis=0)))


def cqm_energy(model: CqmModel, binary: BinaryAssignment, check_feasible: bool = True) -> float:
    """Objective value of the model at x; infeasible x raises unless the check is disabled"""
    if binary.n != model.n:
        raise ValidationError(f"binary assignment has size {binary.n}, model expects {model.n}")
    if check_feasible:
        decode(binary)

    active = [int(p) for p in np.flatnonzero(binary.x)]
    energy = sum(model.linear_terms.get(p, 0.0) for p in active)
    for a, p in enumerate(active):
        for q in active[a + 1:]:
            energy += model.quadratic_terms.get((p, q), 0.0)
    return float(energy)


def dump_cqm(model: CqmModel) -> str:
    """Debug listing: 'var i j', 'lin (i,j) coeff', 'quad (i,j) (l,v) coeff', 'group kind index: members'"""

    def label(p: int) -> str:
        i, j = model.variable(p)
        return f"({i},{j})"

    lines = [f"var {i} {j}" for i, j in map(model.variable, range(model.num_vars))]
    lines += [f"lin {label(p)} {coeff!r}" for p, coeff in sorted(model.linear_terms.items())]
    lines += [f"quad {label(p)} {label(q)} {coeff!r}" for (p, q), coeff in sorted(model.quadratic_terms.items())]
    lines += [
        f"group {group.kind} {group.index}: {' '.join(label(p) for p in group.members)}"
        for group in model.discrete_groups
    ]
    return "\n".join(lines) + "\n"


def to_dimod(model: CqmModel):
    """Export to a dimod ConstrainedQuadraticModel (requires the 'dwave' extra).

    Row groups become discrete constraints, column groups linear equalities.
    """
    import dimod

    def label(p: int) -> str:
        i, j = model.variable(p)
        return f"x_{i}_{j}"

    objective = dimod.BinaryQuadraticModel(
        {label(p): coeff for p, coeff in model.linear_terms.items()},
        {(label(p), label(q)): coeff for (p, q), coeff in model.quadratic_terms.items()},
        0.0,
        dimod.BINARY,
    )
    objective.add_variables_from((label(p), 0.0) for p in range(model.num_vars))

    cqm = dimod.ConstrainedQuadraticModel()
    cqm.set_objective(objective)
    for group in model.discrete_groups:
        names = [label(p) for p in group.members]
        if group.kind == "g1":
            cqm.add_discrete(names, label=f"g1_{group.index}")
        else:
            cqm.add_constraint_from_iterable([(name, 1) for name in names], "==", rhs=1, label=f"g2_{group.index}")
    return cqm
