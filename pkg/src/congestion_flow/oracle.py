"""Exact baselines: max flow, opt(b) by binary search, brute-force cuts.

These are ground truth for tests and small command line runs, not
competitors: max flows go through networkx's Edmonds–Karp and the cut
enumeration is exponential in n.
"""
import logging
from functools import cached_property
from typing import Any, Dict, Literal, Optional, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp
from pydantic.dataclasses import dataclass

from congestion_flow.exceptions import OracleError
from congestion_flow.graph import (
    ArrayConfig,
    Cut,
    Graph,
    cut_quantities,
    divergence,
    max_congestion,
    maximal_spanning_tree,
)
from congestion_flow.trees import TreeRouting, tree_flow
from congestion_flow.types import EdgeVector, Vector, VectorLike
from congestion_flow.utils import as_vector, check_balanced

logger = logging.getLogger("congestion_flow")

BRUTE_FORCE_LIMIT = 20
DEFAULT_TOLERANCE = 1e-9
_SOURCE = "source"
_SINK = "sink"


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class OracleResult:
    """Exact optimum of the min-congestion problem with its witnesses.

    Arguments:
        opt_value (float) -- opt(b).
        witness_cut (Optional[Cut]) -- Cut with ratio equal to opt_value
            (None for b = 0).
        witness_flow (Optional[np.ndarray]) -- Flow routing b with congestion
            within tolerance of opt_value, when computed.
        method (str) -- "binary_search" or "brute_cuts".
    """

    opt_value: float
    witness_cut: Optional[Cut]
    witness_flow: Optional[np.ndarray]
    method: Literal["binary_search", "brute_cuts"]


class CutTable:
    """Every cut of a small graph, enumerated once.

    Each unordered cut appears once: the last vertex is never in S.

    Args:
        g (Graph): Graph with at most `BRUTE_FORCE_LIMIT` vertices.

    Raises:
        OracleError: If the graph is too large or has a single vertex.
    """

    def __init__(self, g: Graph) -> None:
        if g.n > BRUTE_FORCE_LIMIT:
            raise OracleError(
                f"brute-force cut enumeration needs n <= {BRUTE_FORCE_LIMIT}, "
                f"got {g.n}"
            )
        if g.n < 2:
            raise OracleError("a single vertex has no proper cut")
        self.graph = g
        codes = np.arange(1, 2 ** (g.n - 1), dtype=np.int64)
        bits = (codes[:, None] >> np.arange(g.n - 1)) & 1
        self.masks = np.zeros((codes.size, g.n), dtype=bool)
        self.masks[:, : g.n - 1] = bits.astype(bool)

    @cached_property
    def capacities(self) -> Vector:
        """c_S of every enumerated cut"""
        crossing = self.masks[:, self.graph.tails] != self.masks[:, self.graph.heads]
        return crossing.astype(np.float64) @ self.graph.capacities

    @cached_property
    def volumes(self) -> Vector:
        """Total degree of S for every enumerated cut"""
        return self.masks.astype(np.float64) @ self.graph.degrees

    def ratios(self, b: VectorLike) -> Vector:
        """|b_S| / c_S of every cut, one column per demand vector."""
        demand = as_vector(b, self.graph.n, "demand")
        b_S = self.masks.astype(np.float64) @ demand
        return (np.abs(b_S).T / self.capacities).T

    def opt(self, b: VectorLike) -> Any:
        """opt(b) = max over cuts of |b_S| / c_S (per column for batches)."""
        return self.ratios(b).max(axis=0)

    def best_cut(self, b: VectorLike) -> Cut:
        """A maximum-ratio cut, oriented so that b_S >= 0."""
        demand = as_vector(b, self.graph.n, "demand")
        best = int(np.argmax(self.ratios(demand)))
        cut = cut_quantities(self.graph, demand, self.masks[best])
        return cut.complement() if cut.b_S < 0 else cut

    def conductance(self) -> float:
        """min over cuts of c_S / min(vol(S), vol(V minus S))."""
        total = float(self.graph.degrees.sum())
        smaller = np.minimum(self.volumes, total - self.volumes)
        return float(np.min(self.capacities / smaller))


def brute_opt_cut(g: Graph, b: VectorLike) -> Cut:
    """Exhaustive maximum of |b_S|/c_S over all proper cuts (n <= 20).

    Raises:
        OracleError: If n is too large.
    """
    return CutTable(g).best_cut(b)


def exact_conductance(g: Graph) -> float:
    """Conductance of a small graph by enumerating every cut."""
    return CutTable(g).conductance()


def _flow_network(g: Graph, scale: float = 1.0) -> nx.DiGraph:
    """Two antiparallel arcs of capacity scale·c per merged edge."""
    network = nx.DiGraph()
    network.add_nodes_from(range(g.n))
    for a, h, data in g.to_networkx().edges(data=True):
        cap = scale * data["capacity"]
        network.add_edge(a, h, capacity=cap)
        network.add_edge(h, a, capacity=cap)
    return network


def _edge_flows(g: Graph, flow_dict: Dict[Any, Dict[Any, float]]) -> EdgeVector:
    """Net flow per graph edge, shared between parallel edges by capacity."""
    lo = np.minimum(g.tails, g.heads)
    hi = np.maximum(g.tails, g.heads)
    keys, inverse = np.unique(lo * g.n + hi, return_inverse=True)
    pair_caps = np.bincount(inverse, g.capacities, minlength=keys.size)
    net = np.array(
        [
            flow_dict[int(k // g.n)][int(k % g.n)]
            - flow_dict[int(k % g.n)][int(k // g.n)]
            for k in keys
        ]
    )
    # Net flow of each pair along lo -> hi, turned to each edge's orientation
    share = net[inverse] * g.capacities / pair_caps[inverse]
    return np.where(g.tails == lo, share, -share)


def exact_max_flow(g: Graph, s: int, t: int) -> Tuple[float, EdgeVector]:
    """Maximum s–t flow with Edmonds–Karp, undirected edges as arc pairs.

    Returns:
        Tuple[float, EdgeVector]: The flow value and a feasible flow per
        graph edge (positive along its orientation) achieving it.
    """
    if s == t:
        raise ValueError("source and sink must differ")
    value, flow_dict = nx.maximum_flow(
        _flow_network(g), s, t, flow_func=edmonds_karp
    )
    return float(value), _edge_flows(g, flow_dict)


def exact_min_cut(g: Graph, s: int, t: int) -> Tuple[float, Cut]:
    """Minimum s–t cut by residual reachability; the cut side contains t."""
    value, (source_side, _) = nx.minimum_cut(
        _flow_network(g), s, t, flow_func=edmonds_karp
    )
    mask = np.ones(g.n, dtype=bool)
    mask[list(source_side)] = False
    b = np.zeros(g.n)
    b[s], b[t] = -1.0, 1.0
    return float(value), cut_quantities(g, b, mask)


def _demand_network(g: Graph, b: Vector, congestion: float) -> nx.DiGraph:
    network = _flow_network(g, congestion)
    for v in np.flatnonzero(b < 0):
        network.add_edge(_SOURCE, int(v), capacity=float(-b[v]))
    for v in np.flatnonzero(b > 0):
        network.add_edge(int(v), _SINK, capacity=float(b[v]))
    return network


def exact_opt_congestion(
    g: Graph, b: VectorLike, tol: float = DEFAULT_TOLERANCE
) -> OracleResult:
    """opt(b) by binary search over the congestion λ.

    `b` is routable with congestion λ iff the network with internal
    capacities λ·c_e, a super source feeding every deficit vertex and every
    excess vertex draining to a super sink, carries the total deficit.

    Args:
        g (Graph): The graph.
        b (VectorLike): Balanced demands.
        tol (float): Relative width of the final bracket.

    Raises:
        DemandImbalanceError: If `b` is not balanced.
        OracleError: If no witness cut can be extracted.

    Returns:
        OracleResult: opt(b), a cut attaining it within tolerance and a flow
        routing `b` within tolerance.
    """
    demand = as_vector(b, g.n, "demand")
    check_balanced(demand)
    if not np.any(demand):
        return OracleResult(
            opt_value=0.0,
            witness_cut=None,
            witness_flow=np.zeros(g.m),
            method="binary_search",
        )
    required = float(-demand[demand < 0].sum())
    tree = TreeRouting.from_edges(g, maximal_spanning_tree(g))
    best_flow = tree_flow(g, tree, demand)
    lo = float(np.abs(demand).max()) / (2.0 * g.total_capacity)
    hi = max_congestion(g, best_flow)
    calls = 0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        value, flow_dict = nx.maximum_flow(
            _demand_network(g, demand, mid), _SOURCE, _SINK, flow_func=edmonds_karp
        )
        calls += 1
        if value >= required * (1.0 - 1e-12):
            hi = mid
            best_flow = _edge_flows(g, flow_dict)
        else:
            lo = mid
    logger.debug(f"binary search finished after {calls} max flows, [{lo}, {hi}]")

    _, (source_side, _) = nx.minimum_cut(
        _demand_network(g, demand, lo), _SOURCE, _SINK, flow_func=edmonds_karp
    )
    mask = np.zeros(g.n, dtype=bool)
    mask[[v for v in source_side if v != _SOURCE]] = True
    if not 0 < mask.sum() < g.n:
        raise OracleError("binary search did not isolate a proper cut")
    cut = cut_quantities(g, demand, mask)
    cut = cut.complement() if cut.b_S < 0 else cut

    # Close the rounding residual of the extracted flow along the tree
    residual = demand - divergence(g, best_flow)
    residual -= residual.mean()
    best_flow = best_flow + tree_flow(g, tree, residual)
    return OracleResult(
        opt_value=cut.ratio,
        witness_cut=cut,
        witness_flow=best_flow,
        method="binary_search",
    )


def opt_congestion(g: Graph, b: VectorLike) -> float:
    """opt(b), by cut enumeration when n is small enough, else binary search."""
    if 2 <= g.n <= 12:
        return float(CutTable(g).opt(b))
    return exact_opt_congestion(g, b).opt_value
