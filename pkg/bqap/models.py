from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

WEIGHT_TOLERANCE = 1e-12
MATRIX_BLOCKS = ("distance", "flow1", "flow2")


class BudgetMode(str, Enum):
    WALLCLOCK = "wallclock"
    ITERATIONS = "iterations"


class MethodKind(str, Enum):
    UNIFORM = "uniform"
    ADAPTIVE_AVERAGES = "adaptive-averages"
    ADAPTIVE_DICHOTOMIC = "adaptive-dichotomic"

    @property
    def is_adaptive(self) -> bool:
        return self is not MethodKind.UNIFORM

    @classmethod
    def parse(cls, text: str) -> "MethodKind":
        return cls(text.strip().lower().replace("_", "-"))


def _frozen_int_matrix(value, label: str) -> np.ndarray:
    array = np.array(value)
    if array.dtype.kind == "f":
        if not np.all(np.isfinite(array)) or not np.all(array == np.round(array)):
            raise ValueError(f"{label} entries must be finite integers")
    elif array.dtype.kind not in "iu":
        raise ValueError(f"{label} entries must be integers, got dtype {array.dtype}")
    array = array.astype(np.int64)
    if np.any(array < 0):
        raise ValueError(f"{label} entries must be non-negative")
    array.setflags(write=False)
    return array


class MatrixOrder(BaseModel):
    """Order in which the three n x n blocks appear in an instance file"""
    model_config = ConfigDict(frozen=True)

    blocks: Tuple[str, str, str] = MATRIX_BLOCKS

    @field_validator("blocks")
    @classmethod
    def _is_permutation(cls, value):
        if sorted(value) != sorted(MATRIX_BLOCKS):
            raise ValueError(f"matrix order must be a permutation of {','.join(MATRIX_BLOCKS)}")
        return value

    @classmethod
    def parse(cls, text: str) -> "MatrixOrder":
        return cls(blocks=tuple(part.strip().lower() for part in text.split(",")))

    def __str__(self) -> str:
        return ",".join(self.blocks)


class BiQapInstance(BaseModel):
    """Two flow layers indexed [objective][facility][facility], distances indexed [location][location]"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = ""
    n: int = Field(ge=2)
    flows: np.ndarray
    distances: np.ndarray

    @field_validator("flows", mode="before")
    @classmethod
    def _flows(cls, value):
        return _frozen_int_matrix(value, "flow")

    @field_validator("distances", mode="before")
    @classmethod
    def _distances(cls, value):
        return _frozen_int_matrix(value, "distance")

    @model_validator(mode="after")
    def _shapes(self):
        if self.flows.shape != (2, self.n, self.n):
            raise ValueError(f"flow tensor must have shape (2, {self.n}, {self.n}), got {self.flows.shape}")
        if self.distances.shape != (self.n, self.n):
            raise ValueError(f"distance matrix must have shape ({self.n}, {self.n}), got {self.distances.shape}")
        return self

    def __eq__(self, other):
        if not isinstance(other, BiQapInstance):
            return NotImplemented
        return (
            self.name == other.name
            and self.n == other.n
            and np.array_equal(self.flows, other.flows)
            and np.array_equal(self.distances, other.distances)
        )

    def __hash__(self):
        return hash((self.name, self.n, self.flows.tobytes(), self.distances.tobytes()))


class ObjectivePair(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    f1: float
    f2: float

    def as_tuple(self) -> Tuple[float, float]:
        return (self.f1, self.f2)


class ReferenceFront(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: Tuple[ObjectivePair, ...] = ()


class WeightVector(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    lambda1: float = Field(ge=0.0, le=1.0)
    lambda2: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _sums_to_one(self):
        if abs(self.lambda1 + self.lambda2 - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"weights must sum to 1, got {self.lambda1} + {self.lambda2}")
        return self

    @classmethod
    def from_lambda1(cls, lambda1: float) -> "WeightVector":
        lambda1 = min(1.0, max(0.0, float(lambda1)))
        return cls(lambda1=lambda1, lambda2=1.0 - lambda1)

    def matches(self, other: "WeightVector", tolerance: float = 1e-9) -> bool:
        return abs(self.lambda1 - other.lambda1) <= tolerance


class Assignment(BaseModel):
    """loc[j] is the (0-based) location of facility j"""
    model_config = ConfigDict(frozen=True)

    loc: Tuple[int, ...]

    @field_validator("loc", mode="before")
    @classmethod
    def _as_ints(cls, value):
        return tuple(int(v) for v in value)

    @field_validator("loc")
    @classmethod
    def _is_permutation(cls, value):
        if sorted(value) != list(range(len(value))):
            raise ValueError(f"assignment {value} is not a permutation of 0..{len(value) - 1}")
        return value

    @property
    def n(self) -> int:
        return len(self.loc)

    @classmethod
    def identity(cls, n: int) -> "Assignment":
        return cls(loc=tuple(range(n)))


class BinaryAssignment(BaseModel):
    """x[i][j] = 1 when facility j sits in location i; feasibility is checked on decode"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray

    @field_validator("x", mode="before")
    @classmethod
    def _binary_square(cls, value):
        array = np.array(value, dtype=np.int64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError(f"binary assignment must be square, got shape {array.shape}")
        if not np.all((array == 0) | (array == 1)):
            raise ValueError("binary assignment entries must be 0 or 1")
        array.setflags(write=False)
        return array

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def __eq__(self, other):
        if not isinstance(other, BinaryAssignment):
            return NotImplemented
        return np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash(self.x.tobytes())


class EvaluatedSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    assignment: Assignment
    objectives: ObjectivePair
    generating_weight: WeightVector


class SolverRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    instance: BiQapInstance
    weight: WeightVector
    time_limit: float = Field(gt=0)
    seed: int
    budget_mode: BudgetMode = BudgetMode.WALLCLOCK
    iterations: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _budget(self):
        if self.budget_mode is BudgetMode.ITERATIONS and self.iterations is None:
            raise ValueError("iteration budget mode needs an iteration count")
        return self


class SolverResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    solutions: List[EvaluatedSolution] = Field(min_length=1)
    best_scalarised: float
    wall_time: float = Field(ge=0)


class ScalarisationPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: MethodKind
    num_weights: int = Field(ge=1)
    time_limit: float = Field(default=5.0, gt=0)
    seed: int = 0
    budget_mode: BudgetMode = BudgetMode.WALLCLOCK
    iterations: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _enough_weights(self):
        if self.method.is_adaptive and self.num_weights < 2:
            raise ValueError(f"{self.method.value} needs at least 2 weights for the endpoint runs")
        if self.budget_mode is BudgetMode.ITERATIONS and self.iterations is None:
            raise ValueError("iteration budget mode needs an iteration count")
        return self

    def request(self, instance: BiQapInstance, weight: WeightVector, index: int) -> SolverRequest:
        return SolverRequest(
            instance=instance,
            weight=weight,
            time_limit=self.time_limit,
            seed=self.seed + index,
            budget_mode=self.budget_mode,
            iterations=self.iterations,
        )


class ReferencePoint(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    r1: float
    r2: float


class TTestResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    df: int
    p_value: float
    significant: bool


# Experiment configuration and report

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    instance_paths: List[Path] = Field(min_length=1)
    matrix_order: MatrixOrder = MatrixOrder()
    methods: List[MethodKind] = Field(min_length=1)
    num_weights: int = Field(default=10, ge=1)
    time_limit: float = Field(default=5.0, gt=0)
    runs: int = Field(default=20, ge=1)
    base_seed: int = 0
    backend: str = "sa"
    reference_front_paths: List[Path] = []
    output_dir: Path
    budget_mode: BudgetMode = BudgetMode.WALLCLOCK
    iterations: Optional[int] = Field(default=None, ge=1)
    workers: int = Field(default=1, ge=1)
    alpha: float = Field(default=0.05, gt=0, lt=1)

    @model_validator(mode="after")
    def _consistent(self):
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if any(m.is_adaptive for m in self.methods) and self.num_weights < 2:
            raise ValueError("adaptive methods need at least 2 weights")
        if self.reference_front_paths and len(self.reference_front_paths) != len(self.instance_paths):
            raise ValueError("give either no reference front or one per instance")
        if self.budget_mode is BudgetMode.ITERATIONS and self.iterations is None:
            raise ValueError("iteration budget mode needs an iteration count")
        return self

    def plan(self, method: MethodKind, seed: int) -> ScalarisationPlan:
        return ScalarisationPlan(
            method=method,
            num_weights=self.num_weights,
            time_limit=self.time_limit,
            seed=seed,
            budget_mode=self.budget_mode,
            iterations=self.iterations,
        )


class FrontPoint(BaseModel):
    f1: float
    f2: float
    lambda1: float
    lambda2: float


class RunRecord(BaseModel):
    run: int
    seed: int
    hypervolume: float
    front: List[FrontPoint]
    weights: List[WeightVector]
    hypervolume_trace: List[float]


class MethodSummary(BaseModel):
    method: MethodKind
    runs: List[RunRecord]
    mean_hv: float
    std_hv: float
    best: bool = False

    @property
    def hypervolumes(self) -> List[float]:
        return [record.hypervolume for record in self.runs]


class PairwiseTest(BaseModel):
    # Constant samples give t = +/-inf; JSON has no literal for it
    model_config = ConfigDict(ser_json_inf_nan="strings")

    method_a: MethodKind
    method_b: MethodKind
    t: float
    df: int
    p_value: float
    significant: bool


class InstanceReport(BaseModel):
    name: str
    n: int
    reference_point: ReferencePoint
    reference_source: str
    reference_front: List[ObjectivePair]
    methods: List[MethodSummary]
    significance: List[PairwiseTest]


class RunReport(BaseModel):
    config: ExperimentConfig
    instances: List[InstanceReport]
    best_counts: Dict[str, int]
