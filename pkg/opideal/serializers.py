import csv
import io
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from opideal.error import OpIdealError
from opideal.types import BlockSpace, DenseOperator, ExtExponent, FssProfile

TIMING_KEYS = frozenset({"elapsed_ms", "wall_clock_ms"})
PROFILE_COLUMNS = ("d", "estimate", "envelope", "best_subspace", "trials", "method")


class SerializationError(OpIdealError):
    pass


class WrongExponentError(SerializationError):
    pass


class WrongShapeError(SerializationError):
    pass


class WrongValueError(SerializationError):
    pass


def serialize_exponent(exponent: ExtExponent) -> str:
    return str(exponent)


def deserialize_exponent(value) -> ExtExponent:
    try:
        return ExtExponent.parse(value)
    except (ValueError, ZeroDivisionError, TypeError) as e:
        raise WrongExponentError(f"not an exponent: {value!r}") from e


def serialize_matrix(matrix: np.ndarray) -> List[List[float]]:
    """Row-major nested lists."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise WrongShapeError(f"expected a matrix, got {matrix.ndim} dimensions")
    if not np.all(np.isfinite(matrix)):
        raise WrongValueError("matrix has non-finite entries")
    return matrix.tolist()


def deserialize_matrix(rows: Sequence[Sequence[float]], shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    widths = {len(row) for row in rows}
    if len(widths) > 1:
        raise WrongShapeError(f"ragged rows of widths {sorted(widths)}")
    try:
        matrix = np.array(rows, dtype=float).reshape(len(rows), widths.pop() if widths else 0)
    except (TypeError, ValueError) as e:
        raise WrongValueError(str(e)) from e
    if not np.all(np.isfinite(matrix)):
        raise WrongValueError("matrix has non-finite entries")
    if shape is not None and matrix.shape != tuple(shape):
        raise WrongShapeError(f"expected shape {tuple(shape)}, got {matrix.shape}")
    return matrix


def serialize_space(space: BlockSpace) -> Dict[str, Any]:
    return {
        "blocks": [[serialize_exponent(inner), dim] for inner, dim in space.blocks],
        "outer": serialize_exponent(space.outer),
    }


def deserialize_space(data: Dict[str, Any]) -> BlockSpace:
    try:
        blocks = tuple((deserialize_exponent(inner), int(dim)) for inner, dim in data["blocks"])
        return BlockSpace(blocks, deserialize_exponent(data["outer"]))
    except (KeyError, TypeError, ValueError) as e:
        raise WrongValueError(f"malformed space: {e}") from e


def serialize_operator(op: DenseOperator) -> Dict[str, Any]:
    return {
        "domain": serialize_space(op.domain),
        "codomain": serialize_space(op.codomain),
        "matrix": serialize_matrix(op.matrix),
    }


def deserialize_operator(data: Dict[str, Any]) -> DenseOperator:
    domain = deserialize_space(data["domain"])
    codomain = deserialize_space(data["codomain"])
    matrix = deserialize_matrix(data["matrix"], (codomain.total_dim, domain.total_dim))
    return DenseOperator(matrix, domain, codomain)


def profile_to_csv(profile: FssProfile) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    for point in profile.points:
        writer.writerow([point.d, repr(point.estimate), repr(point.envelope), repr(point.best_subspace),
                         point.trials, point.method])
    return buffer.getvalue()


def strip_timing(payload: Any) -> Any:
    """Drop wall-clock fields so payloads of equal runs compare equal."""
    if isinstance(payload, dict):
        return {key: strip_timing(value) for key, value in payload.items() if key not in TIMING_KEYS}
    if isinstance(payload, list):
        return [strip_timing(value) for value in payload]
    return payload
