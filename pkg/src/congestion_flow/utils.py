from typing import Any, List, Optional

import numpy as np

from congestion_flow.exceptions import DemandImbalanceError, DimensionMismatchError
from congestion_flow.types import Record, Vector, VectorLike

BALANCE_TOLERANCE = 1e-9


def merge_records(objs: List[Any]) -> Record:
    """Convert and merge a list of records into a single dict.

    Later records override keys of earlier ones.

    Args:
        objs (List[Any]): Objects exposing a `dict()` method.

    Returns:
        A dict containing the merged contents of the input records.
    """
    merged: Record = {}
    for obj in objs:
        merged.update(obj.dict())
    return merged


def as_vector(
    values: VectorLike, size: Optional[int] = None, name: str = "vector"
) -> Vector:
    """Convert `values` to a float64 array and check its leading dimension.

    Args:
        values (VectorLike): Values to convert. 2-D inputs hold one vector
            per column.
        size (Optional[int]): Expected length of the first axis.
        name (str): Name used in error messages.

    Raises:
        DimensionMismatchError: If the first axis does not have `size` entries.

    Returns:
        Vector: The converted array.
    """
    out = np.asarray(values, dtype=np.float64)
    if out.ndim == 0 or out.ndim > 2:
        raise DimensionMismatchError(
            f"{name} must be 1-D or 2-D, got shape {out.shape}"
        )
    if size is not None and out.shape[0] != size:
        raise DimensionMismatchError(
            f"{name} has {out.shape[0]} entries, expected {size}"
        )
    return out


def check_balanced(b: Vector, tol: float = BALANCE_TOLERANCE) -> None:
    """Raise if a demand vector (or every column of a batch) does not sum to 0.

    Args:
        b (Vector): Demand vector or batch of demand vectors.
        tol (float): Relative tolerance against ‖b‖₁.

    Raises:
        DemandImbalanceError: If some column sums to more than tol·‖b‖₁.
    """
    total = np.abs(b.sum(axis=0))
    scale = np.abs(b).sum(axis=0)
    bad = total > tol * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad & (scale > 0)):
        raise DemandImbalanceError(
            f"demand vector is not balanced: sum {np.max(total):.3e}, "
            f"norm {np.max(scale):.3e}"
        )


def random_demand(
    n: int, rng: np.random.Generator, support: Optional[int] = None
) -> Vector:
    """Draw a random balanced demand vector.

    Args:
        n (int): Number of vertices.
        rng (np.random.Generator): Source of randomness.
        support (Optional[int]): Number of nonzero entries, all when None.

    Returns:
        Vector: Demands summing to zero (exactly, up to rounding).
    """
    b = np.zeros(n)
    k = n if support is None else max(2, min(n, support))
    idx = rng.choice(n, size=k, replace=False)
    b[idx] = rng.normal(size=k)
    b[idx] -= b[idx].mean()
    return b


def unit_demand(n: int, source: int, sink: int) -> Vector:
    """Demand routing one unit from `source` to `sink` (b_s = -1, b_t = +1)."""
    if source == sink:
        raise ValueError("source and sink must differ")
    b = np.zeros(n)
    b[source] = -1.0
    b[sink] = 1.0
    return b


def relative_error(a: float, b: float) -> float:
    """|a - b| relative to max(1, |a|, |b|)."""
    return abs(a - b) / max(1.0, abs(a), abs(b))
