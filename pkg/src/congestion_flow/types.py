from enum import Enum
from os import PathLike
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt


class ApproximatorKind(Enum):
    """Available congestion-approximators"""

    DEGREE = "degree"
    TREE = "tree"
    HIERARCHY = "hierarchy"


class SolveMethod(Enum):
    """Solver backends exposed on the command line"""

    SHERMAN = "sherman"
    EXACT = "exact"

    @classmethod
    def _missing_(cls, value: object) -> Optional["SolveMethod"]:
        # "gradient" names the softmax descent too
        return cls.SHERMAN if value == "gradient" else None


class DescentMethod(Enum):
    """First order methods for the inner descent"""

    STEEPEST = "steepest"


class GraphFormat(Enum):
    """Text formats understood by `FlowIO.read_graph`"""

    EDGELIST = "edgelist"
    DIMACS = "dimacs"


# Real vector, one entry per vertex or per edge
Vector = npt.NDArray[np.float64]
# Per-vertex vectors: demands b, potentials v
DemandVector = Vector
Potentials = Vector
# Per-edge vectors: flows f, prices, gradients
EdgeVector = Vector
# Integer index arrays (vertex ids, edge ids, parent pointers)
IndexArray = npt.NDArray[np.int64]
# Vertex subset, either as an index collection or as a boolean mask
VertexSet = Union[Iterable[int], npt.NDArray[np.bool_]]
# Anything numpy can turn into a vector
VectorLike = Union[Vector, List[float], Tuple[float, ...]]
# Edge given as (tail, head, capacity)
EdgeTuple = Tuple[int, int, float]
EdgeList = List[EdgeTuple]
# Local path or http(s) url
Source = Union[str, "PathLike[str]"]
# Json-like record
Record = Dict[str, Any]
