from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from networkx.utils import UnionFind
from pydantic import validator

from pydantic.dataclasses import dataclass
from scipy.sparse.csgraph import connected_components

from congestion_flow.exceptions import (
    DegenerateCutError,
    DimensionMismatchError,
    DisconnectedGraphError,
    InvalidCapacityError,
)
from congestion_flow.types import (
    DemandVector,
    EdgeList,
    EdgeVector,
    IndexArray,
    Vector,
    VectorLike,
    VertexSet,
)
from congestion_flow.utils import as_vector


class ArrayConfig:
    """Pydantic config for records carrying numpy arrays"""

    arbitrary_types_allowed = True


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class Graph:
    """Undirected capacitated graph with a fixed orientation per edge.

    Edge `e` runs from `tails[e]` to `heads[e]`; a positive flow value means
    flow in that direction. The orientation only fixes signs, the graph is
    undirected. Parallel edges are kept distinct.

    Examples:
        >>> g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 2.0)])
        >>> assert g.m == 2
        >>> assert list(g.degrees) == [1.0, 3.0, 2.0]

    Arguments:
        n (int) -- Number of vertices, numbered 0..n-1.
        tails (np.ndarray) -- Tail vertex of each edge.
        heads (np.ndarray) -- Head vertex of each edge.
        capacities (np.ndarray) -- Positive capacity of each edge.

    Raises:
        InvalidCapacityError: If a capacity is not positive and finite.
        DisconnectedGraphError: If the edges do not connect all vertices.
        ValueError: On self-loops, out of range vertices or length mismatch.
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    capacities: np.ndarray

    @validator("n")
    def _check_n(cls, n: int) -> int:
        if n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={n}")
        return n

    @validator("tails", "heads", pre=True)
    def _to_index_array(cls, v: Any, values: Dict[str, Any]) -> np.ndarray:
        arr = np.array(v, dtype=np.int64).reshape(-1)
        n = values.get("n")
        if n is not None and arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"vertex ids must lie in [0, {n}), got {arr.min()}..")
        return arr

    @validator("capacities", pre=True)
    def _to_capacity_array(cls, v: Any, values: Dict[str, Any]) -> np.ndarray:
        arr = np.array(v, dtype=np.float64).reshape(-1)
        tails = values.get("tails")
        if tails is not None and arr.size != tails.size:
            raise ValueError(
                f"got {arr.size} capacities for {tails.size} edges"
            )
        return arr

    def __post_init_post_parse__(self) -> None:
        if np.any(self.tails == self.heads):
            loop = int(np.flatnonzero(self.tails == self.heads)[0])
            raise ValueError(f"self-loop at edge {loop} (vertex {self.tails[loop]})")
        if not np.all(np.isfinite(self.capacities)) or np.any(self.capacities <= 0):
            raise InvalidCapacityError("every capacity must be positive and finite")
        if self.n > 1:
            count, _ = connected_components(self.adjacency_matrix, directed=False)
            if count != 1:
                raise DisconnectedGraphError(
                    f"graph has {count} connected components, expected 1"
                )
        # Lock the arrays so the graph stays immutable
        for arr in (self.tails, self.heads, self.capacities):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges: EdgeList) -> "Graph":
        """Create a graph from a list of `(tail, head, capacity)` tuples."""
        if len(edges) == 0:
            return cls(n=n, tails=[], heads=[], capacities=[])
        tails, heads, caps = zip(*edges)
        return cls(n=n, tails=tails, heads=heads, capacities=caps)

    @classmethod
    def from_networkx(cls, graph: nx.Graph, capacity: str = "capacity") -> "Graph":
        """Create a graph from a networkx graph with integer-convertible nodes.

        Nodes are relabeled 0..n-1 in sorted order; edge orientation follows
        the networkx edge order. Missing capacities default to 1.
        """
        nodes = sorted(graph.nodes())
        index = {node: i for i, node in enumerate(nodes)}
        edges = [
            (index[u], index[v], float(data.get(capacity, 1.0)))
            for u, v, data in graph.edges(data=True)
        ]
        return cls.from_edges(len(nodes), edges)

    @property
    def m(self) -> int:
        """Number of edges"""
        return int(self.tails.size)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Divergence matrix B (n x m): +1 at the head, -1 at the tail"""
        cols = np.arange(self.m)
        data = np.concatenate([np.ones(self.m), -np.ones(self.m)])
        return sp.csr_matrix(
            (data, (np.concatenate([self.heads, self.tails]), np.tile(cols, 2))),
            shape=(self.n, self.m),
        )

    @cached_property
    def adjacency_matrix(self) -> sp.csr_matrix:
        """Symmetric capacity matrix, parallel edges summed"""
        mat = sp.coo_matrix(
            (self.capacities, (self.tails, self.heads)), shape=(self.n, self.n)
        )
        return (mat + mat.T).tocsr()

    @cached_property
    def adjacency(self) -> Tuple[IndexArray, IndexArray, IndexArray]:
        """CSR-style neighbor index `(indptr, neighbors, edge_ids)`.

        Neighbors of `v` are `neighbors[indptr[v]:indptr[v+1]]`, reached through
        the edges `edge_ids[indptr[v]:indptr[v+1]]`.
        """
        ends = np.concatenate([self.tails, self.heads])
        others = np.concatenate([self.heads, self.tails])
        edge_ids = np.tile(np.arange(self.m), 2)
        order = np.argsort(ends, kind="stable")
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=self.n), out=indptr[1:])
        return indptr, others[order], edge_ids[order]

    def neighbors(self, v: int) -> Tuple[IndexArray, IndexArray]:
        """Neighbors of `v` and the edges leading to them, in O(deg(v))."""
        indptr, others, edge_ids = self.adjacency
        lo, hi = indptr[v], indptr[v + 1]
        return others[lo:hi], edge_ids[lo:hi]

    @cached_property
    def degrees(self) -> Vector:
        """Weighted degree c_{v} of every vertex"""
        deg = np.bincount(self.tails, self.capacities, minlength=self.n)
        deg += np.bincount(self.heads, self.capacities, minlength=self.n)
        return deg

    @property
    def total_capacity(self) -> float:
        return float(self.capacities.sum())

    def edges(self) -> EdgeList:
        """Edges as `(tail, head, capacity)` tuples."""
        return [
            (int(a), int(h), float(c))
            for a, h, c in zip(self.tails, self.heads, self.capacities)
        ]

    def to_networkx(self) -> nx.Graph:
        """Simple networkx graph, parallel edges merged into one capacity."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for a, h, c in self.edges():
            if graph.has_edge(a, h):
                graph[a][h]["capacity"] += c
            else:
                graph.add_edge(a, h, capacity=c)
        return graph


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class Cut:
    """A cut (S, V minus S) together with the demand it separates.

    Arguments:
        n (int) -- Number of vertices of the graph.
        side (np.ndarray) -- Sorted vertex ids of S.
        b_S (float) -- Total demand inside S.
        c_S (float) -- Capacity of the edges with exactly one end in S.
    """

    n: int
    side: np.ndarray
    b_S: float
    c_S: float

    @validator("side", pre=True)
    def _to_sorted_side(cls, v: Any) -> np.ndarray:
        return np.unique(np.asarray(v, dtype=np.int64))

    @validator("c_S")
    def _check_capacity(cls, c_S: float) -> float:
        if not c_S > 0:
            raise ValueError(f"cut capacity must be positive, got {c_S}")
        return c_S

    @property
    def ratio(self) -> float:
        """Congestion b_S / c_S forced on the cut"""
        return self.b_S / self.c_S

    def mask(self) -> np.ndarray:
        """Boolean membership mask of S"""
        out = np.zeros(self.n, dtype=bool)
        out[self.side] = True
        return out

    def complement(self) -> "Cut":
        """The same cut seen from V minus S (b_S changes sign)."""
        return Cut(
            n=self.n, side=np.flatnonzero(~self.mask()), b_S=-self.b_S, c_S=self.c_S
        )

    def dict(self) -> Dict[str, Any]:
        """Return a dict representation of the cut"""
        return {
            "side": [int(v) for v in self.side],
            "b_S": float(self.b_S),
            "c_S": float(self.c_S),
            "ratio": float(self.ratio),
        }


def vertex_mask(n: int, S: VertexSet) -> np.ndarray:
    """Convert a vertex set (ids or boolean mask) to a boolean mask of length n."""
    arr = np.asarray(list(S) if not isinstance(S, np.ndarray) else S)
    if arr.dtype == bool:
        if arr.size != n:
            raise DimensionMismatchError(f"mask has {arr.size} entries, expected {n}")
        return arr
    ids = arr.astype(np.int64)
    # Negative ids would wrap around to the end
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise DimensionMismatchError(
            f"vertex ids must lie in [0, {n}), got {ids.min()}..{ids.max()}"
        )
    mask = np.zeros(n, dtype=bool)
    mask[ids] = True
    return mask


def divergence(g: Graph, f: VectorLike) -> DemandVector:
    """Excess Bf at every vertex: inflow minus outflow.

    Args:
        g (Graph): The graph.
        f (VectorLike): Flow per edge (or a batch with one flow per column).

    Raises:
        DimensionMismatchError: If `f` does not have m entries.

    Returns:
        DemandVector: (Bf)_v = sum of f_e over edges entering v minus
        sum over edges leaving v.
    """
    flow = as_vector(f, g.m, "flow")
    return np.asarray(g.incidence @ flow)


def adjoint_divergence(g: Graph, v: VectorLike) -> EdgeVector:
    """Potential difference Bᵀv across every edge, v[head] - v[tail].

    Raises:
        DimensionMismatchError: If `v` does not have n entries.
    """
    pot = as_vector(v, g.n, "potentials")
    return np.asarray(g.incidence.T @ pot)


def congestion(g: Graph, f: VectorLike) -> EdgeVector:
    """Per-edge congestion |f_e| / c_e."""
    flow = as_vector(f, g.m, "flow")
    return np.abs(flow) / g.capacities


def max_congestion(g: Graph, f: VectorLike) -> float:
    """Maximum congestion ‖C⁻¹f‖∞ (0 for the empty or zero flow)."""
    cong = congestion(g, f)
    return float(cong.max()) if cong.size else 0.0


def cut_capacity(g: Graph, S: VertexSet) -> float:
    """Capacity of the edges with exactly one endpoint in S."""
    mask = vertex_mask(g.n, S)
    crossing = mask[g.tails] != mask[g.heads]
    return float(g.capacities[crossing].sum())


def cut_quantities(g: Graph, b: VectorLike, S: VertexSet) -> Cut:
    """Demand b_S, capacity c_S and congestion ratio of the cut S.

    Raises:
        DegenerateCutError: If S is empty or contains every vertex.
    """
    demand = as_vector(b, g.n, "demand")
    mask = vertex_mask(g.n, S)
    size = int(mask.sum())
    if size == 0 or size == g.n:
        raise DegenerateCutError(f"cut side must be nonempty and proper, got {size}")
    return Cut(
        n=g.n,
        side=np.flatnonzero(mask),
        b_S=float(demand[mask].sum()),
        c_S=cut_capacity(g, mask),
    )


def maximal_spanning_tree(g: Graph, weights: Optional[VectorLike] = None) -> IndexArray:
    """Spanning tree of maximum total weight by greedy Kruskal.

    Edges are scanned by descending weight, ties broken by edge index, so the
    result is deterministic.

    Args:
        g (Graph): A connected graph.
        weights (Optional[VectorLike]): Edge weights, capacities when None.

    Raises:
        DisconnectedGraphError: If no spanning tree exists.

    Returns:
        IndexArray: Sorted ids of the n-1 tree edges.
    """
    w = g.capacities if weights is None else as_vector(weights, g.m, "weights")
    order = np.lexsort((np.arange(g.m), -w))
    subtrees = UnionFind(range(g.n))
    tree = []
    for e in order:
        a, h = int(g.tails[e]), int(g.heads[e])
        if subtrees[a] != subtrees[h]:
            subtrees.union(a, h)
            tree.append(int(e))
            if len(tree) == g.n - 1:
                break
    if len(tree) != g.n - 1:
        raise DisconnectedGraphError("graph has no spanning tree")
    return np.sort(np.asarray(tree, dtype=np.int64))


def merge_parallel_edges(g: Graph) -> Graph:
    """Graph with parallel edges merged, capacities summed, oriented low to high.

    Every cut keeps its capacity.
    """
    lo = np.minimum(g.tails, g.heads)
    hi = np.maximum(g.tails, g.heads)
    keys, inverse = np.unique(lo * g.n + hi, return_inverse=True)
    caps = np.bincount(inverse, g.capacities, minlength=keys.size)
    return Graph(n=g.n, tails=keys // g.n, heads=keys % g.n, capacities=caps)
