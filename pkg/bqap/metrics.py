import math
import logging
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from bqap.archive import nondominated_filter
from bqap.errors import ValidationError
from bqap.models import ObjectivePair, ReferenceFront, ReferencePoint, TTestResult

logger = logging.getLogger(__name__)

HvSample = Sequence[float]
PointLike = Union[ObjectivePair, Tuple[float, float]]

BETA_TOLERANCE = 1e-10
BETA_MAX_ITERATIONS = 300
_TINY = 1e-300


def _as_tuple(point: PointLike) -> Tuple[float, float]:
    if isinstance(point, ObjectivePair):
        return point.as_tuple()
    return (float(point[0]), float(point[1]))


def reference_point(front: Union[ReferenceFront, Sequence[PointLike]]) -> ReferencePoint:
    """Component-wise maxima of a known Pareto optimal set or of every archived point"""
    points = [_as_tuple(p) for p in (front.points if isinstance(front, ReferenceFront) else front)]
    if not points:
        raise ValidationError("reference point needs a non-empty front")
    return ReferencePoint(r1=max(p[0] for p in points), r2=max(p[1] for p in points))


def hypervolume_2d(points: Iterable[PointLike], ref: ReferencePoint) -> float:
    """Area dominated by the points and bounded by ref (minimisation).

    Only points strictly better than ref in both objectives contribute.
    """
    inside = [(f1, f2) for f1, f2 in map(_as_tuple, points) if f1 < ref.r1 and f2 < ref.r2]
    front = nondominated_filter(inside)

    volume = 0.0
    for k, (f1, f2) in enumerate(front):
        next_f1 = front[k + 1][0] if k + 1 < len(front) else ref.r1
        volume += (next_f1 - f1) * (ref.r2 - f2)
    return volume


def summarize(values: HvSample) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)"""
    if len(values) == 0:
        raise ValidationError("cannot summarize an empty sample")
    sample = np.asarray(values, dtype=float)
    std = float(np.std(sample, ddof=1)) if len(sample) > 1 else 0.0
    return float(np.mean(sample)), std


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    # Modified Lentz evaluation
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, BETA_MAX_ITERATIONS + 1):
        m2 = 2 * m
        for aa in (
            m * (b - m) * x / ((qam + m2) * (a + m2)),
            -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2)),
        ):
            d = 1.0 + aa * d
            d = 1.0 / (d if abs(d) > _TINY else _TINY)
            c = 1.0 + aa / c
            c = c if abs(c) > _TINY else _TINY
            step = d * c
            h *= step
        if abs(step - 1.0) < BETA_TOLERANCE:
            return h
    logger.warning(f"Incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")
    return h


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(x, a, b) / a
    return 1.0 - front * _beta_continued_fraction(1.0 - x, b, a) / b


def t_test(a: HvSample, b: HvSample, alpha: float = 0.05) -> TTestResult:
    """Two-sided pooled-variance Student t-test"""
    if len(a) < 2 or len(b) < 2:
        raise ValidationError(f"t-test needs at least 2 values per sample, got {len(a)} and {len(b)}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")

    mean_a, std_a = summarize(a)
    mean_b, std_b = summarize(b)
    df = len(a) + len(b) - 2
    pooled = ((len(a) - 1) * std_a**2 + (len(b) - 1) * std_b**2) / df
    diff = mean_a - mean_b

    if pooled <= 0.0:
        if diff == 0.0:
            return TTestResult(t=0.0, df=df, p_value=1.0, significant=False)
        return TTestResult(t=math.copysign(math.inf, diff), df=df, p_value=0.0, significant=True)

    t = diff / math.sqrt(pooled * (1.0 / len(a) + 1.0 / len(b)))
    p_value = regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
    return TTestResult(t=t, df=df, p_value=p_value, significant=p_value < alpha)
