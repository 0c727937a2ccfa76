import math
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pydantic

from bqap.archive import nondominated_filter
from bqap.errors import GenerationError, IoError, ParseError, ValidationError
from bqap.models import BiQapInstance, MatrixOrder, ObjectivePair, ReferenceFront

logger = logging.getLogger(__name__)

SYNTH_MAX_VALUE = 99
SYNTH_CORRELATION_TOLERANCE = 0.15
SYNTH_MAX_RETRIES = 50


def format_number(value: float) -> str:
    """Shortest round-trip text; integral values lose the trailing '.0'"""
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def parse_instance(text: str, order: MatrixOrder = MatrixOrder(), name: str = "") -> BiQapInstance:
    """Parse 'n' followed by three n x n integer blocks in the given order"""
    tokens = text.split()
    if not tokens:
        raise ParseError("instance text is empty", expected=None, found=0)

    try:
        n = int(tokens[0])
    except ValueError:
        raise ParseError(f"problem size must be an integer, got {tokens[0]!r}", found=len(tokens))
    if n < 2:
        raise ValidationError(f"problem size must be at least 2, got {n}")

    expected = 1 + 3 * n * n
    if len(tokens) != expected:
        raise ParseError(
            f"expected {expected} integers for n={n}, found {len(tokens)}",
            expected=expected,
            found=len(tokens),
        )

    values = np.empty(expected - 1, dtype=np.int64)
    for position, token in enumerate(tokens[1:], start=1):
        try:
            values[position - 1] = int(token)
        except ValueError:
            raise ParseError(f"token {position} is not an integer: {token!r}", expected=expected, found=len(tokens))
        except OverflowError:
            raise ParseError(f"token {position} does not fit in 64 bits: {token!r}", expected=expected, found=len(tokens))

    blocks = dict(zip(order.blocks, values.reshape(3, n, n)))
    try:
        return BiQapInstance(
            name=name,
            n=n,
            flows=np.stack([blocks["flow1"], blocks["flow2"]]),
            distances=blocks["distance"],
        )
    except pydantic.ValidationError as e:
        raise ValidationError(str(e)) from e


def render_instance(instance: BiQapInstance, order: MatrixOrder = MatrixOrder()) -> str:
    blocks = {
        "distance": instance.distances,
        "flow1": instance.flows[0],
        "flow2": instance.flows[1],
    }
    parts = [str(instance.n)]
    for block_name in order.blocks:
        parts.append("\n".join(" ".join(str(v) for v in row) for row in blocks[block_name]))
    return "\n\n".join(parts) + "\n"


def parse_front(text: str) -> ReferenceFront:
    """One 'f1 f2' pair per line; commas also separate, '#' starts a comment line"""
    raw: List[Tuple[float, float]] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.replace(",", " ").split()
        if fields[0].lower() == "f1":
            continue  # header
        if len(fields) != 2:
            raise ParseError(f"line {line_number}: expected 2 values, found {len(fields)}", expected=2, found=len(fields), line=line_number)
        try:
            f1, f2 = float(fields[0]), float(fields[1])
        except ValueError:
            raise ParseError(f"line {line_number}: non-numeric value in {stripped!r}", line=line_number)
        if not (math.isfinite(f1) and math.isfinite(f2)):
            raise ParseError(f"line {line_number}: values must be finite", line=line_number)
        raw.append((f1, f2))

    return ReferenceFront(points=tuple(ObjectivePair(f1=f1, f2=f2) for f1, f2 in nondominated_filter(raw)))


def render_front(points: Iterable[Union[ObjectivePair, Sequence[float]]]) -> str:
    lines = []
    for point in points:
        f1, f2 = point.as_tuple() if isinstance(point, ObjectivePair) else point
        lines.append(f"{format_number(f1)} {format_number(f2)}")
    return "".join(line + "\n" for line in lines)


def _read_text(path: Union[str, Path]) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror or e}") from e


def load_instance(path: Union[str, Path], order: MatrixOrder = MatrixOrder(), name: Optional[str] = None) -> BiQapInstance:
    instance = parse_instance(_read_text(path), order, name=name or Path(path).name)
    logger.info(f"Loaded instance {instance.name} (n={instance.n}) from {path}")
    return instance


def load_front(path: Union[str, Path]) -> ReferenceFront:
    front = parse_front(_read_text(path))
    logger.info(f"Loaded reference front with {len(front.points)} points from {path}")
    return front


def write_text(path: Union[str, Path], text: str) -> None:
    """UTF-8, LF line endings"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror or e}") from e


def synth_instance(n: int, correlation: float, seed: int, name: Optional[str] = None) -> BiQapInstance:
    """Random instance whose two flow layers have the requested off-diagonal correlation.

    The second layer is |rho| * base + sqrt(1 - rho^2) * U with base = H1 for rho >= 0
    and the reflection 99 - H1 otherwise, so both layers share the same spread.
    """
    if n < 2:
        raise ValidationError(f"problem size must be at least 2, got {n}")
    if not -1.0 <= correlation <= 1.0:
        raise ValidationError(f"correlation must lie in [-1, 1], got {correlation}")

    rng = np.random.Generator(np.random.PCG64(seed))
    upper = np.triu(rng.integers(1, SYNTH_MAX_VALUE + 1, size=(n, n)), k=1)
    distances = upper + upper.T

    off_diagonal = ~np.eye(n, dtype=bool)
    noise_scale = math.sqrt(max(0.0, 1.0 - correlation * correlation))

    for attempt in range(1, SYNTH_MAX_RETRIES + 1):
        flow1 = rng.integers(0, SYNTH_MAX_VALUE + 1, size=(n, n))
        np.fill_diagonal(flow1, 0)
        noise = rng.integers(0, SYNTH_MAX_VALUE + 1, size=(n, n))

        base = flow1 if correlation >= 0 else SYNTH_MAX_VALUE - flow1
        flow2 = np.clip(np.rint(abs(correlation) * base + noise_scale * noise), 0, None).astype(np.int64)
        np.fill_diagonal(flow2, 0)

        with np.errstate(invalid="ignore", divide="ignore"):
            sample = np.corrcoef(flow1[off_diagonal], flow2[off_diagonal])[0, 1]
        if math.isfinite(sample) and abs(sample - correlation) <= SYNTH_CORRELATION_TOLERANCE:
            return BiQapInstance(
                name=name or f"synth.{n}.{correlation:+.2f}.{seed}",
                n=n,
                flows=np.stack([flow1, flow2]),
                distances=distances,
            )
        logger.debug(f"Synthetic attempt {attempt}: correlation {sample:.3f} misses target {correlation:+.2f}")

    raise GenerationError(
        f"no instance with correlation within {SYNTH_CORRELATION_TOLERANCE} of {correlation} "
        f"after {SYNTH_MAX_RETRIES} attempts (n={n}, seed={seed})"
    )
