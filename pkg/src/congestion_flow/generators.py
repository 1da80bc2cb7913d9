"""Seeded instance generators built on networkx.

Every generator returns a connected `Graph` whose capacities are drawn
from a numpy generator seeded with the given seed, so the same
`GeneratorSpec` always yields the same instance.
"""
import logging
from typing import Any, Callable, Dict, Literal

import networkx as nx
import numpy as np
from pydantic import validator
from pydantic.dataclasses import dataclass

from congestion_flow.exceptions import DisconnectedGraphError
from congestion_flow.graph import Graph

logger = logging.getLogger("congestion_flow")

GeneratorKind = Literal["path", "cycle", "grid", "gnp", "barbell", "complete"]


@dataclass
class GeneratorSpec:
    """A generator call: which family, with which parameters and seed.

    Examples:
        >>> spec = GeneratorSpec(kind="grid", params={"k": 3})
        >>> g = spec.build()
        >>> assert (g.n, g.m) == (9, 12)

    Arguments:
        kind (str) -- One of path, cycle, grid, gnp, barbell, complete.
        params (Dict[str, Any]) -- Family parameters. Common keys:
            `capacities` ("unit", "uniform" or "exponential"), `low`/`high`
            for uniform capacities and `scale` for exponential ones.
        seed (int) -- Seed of every random choice.
    """

    kind: GeneratorKind
    params: Dict[str, Any]
    seed: int = 0

    @validator("params")
    def _check_capacity_law(cls, params: Dict[str, Any]) -> Dict[str, Any]:
        law = params.get("capacities", "unit")
        if law not in ("unit", "uniform", "exponential"):
            raise ValueError(
                f"capacities must be unit, uniform or exponential, got {law}"
            )
        return params

    def build(self) -> Graph:
        return generate(self.kind, self.params, self.seed)

    def dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


def _capacities(
    m: int, params: Dict[str, Any], rng: np.random.Generator
) -> np.ndarray:
    law = params.get("capacities", "unit")
    if law == "uniform":
        low = float(params.get("low", 1.0))
        high = float(params.get("high", 10.0))
        if not 0 < low <= high:
            raise ValueError(
                f"uniform capacities need 0 < low <= high, got {low}, {high}"
            )
        return rng.uniform(low, high, size=m)
    if law == "exponential":
        # Shifted away from zero so every capacity stays positive
        return rng.exponential(float(params.get("scale", 1.0)), size=m) + 1e-3
    return np.ones(m)


def _from_networkx(
    graph: nx.Graph, params: Dict[str, Any], rng: np.random.Generator
) -> Graph:
    graph = nx.convert_node_labels_to_integers(graph, ordering="sorted")
    caps = _capacities(graph.number_of_edges(), params, rng)
    for (u, v), cap in zip(graph.edges(), caps):
        graph[u][v]["capacity"] = float(cap)
    return Graph.from_networkx(graph)


def _path(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    return nx.path_graph(int(params["n"]))


def _cycle(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    return nx.cycle_graph(int(params["n"]))


def _grid(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    rows = int(params.get("rows", params.get("k", 0)))
    cols = int(params.get("cols", params.get("k", rows)))
    return nx.grid_2d_graph(rows, cols)


def _complete(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    return nx.complete_graph(int(params["n"]))


def _gnp(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    n = int(params["n"])
    p = float(params["p"])
    graph = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
    if not nx.is_connected(graph):
        if not params.get("connect", False):
            raise DisconnectedGraphError(
                f"G({n}, {p}) sample is disconnected; pass connect=True to chain "
                "its components"
            )
        # Join consecutive components through their smallest vertices
        heads = [min(c) for c in nx.connected_components(graph)]
        graph.add_edges_from(zip(heads, heads[1:]))
    return graph


def _barbell(params: Dict[str, Any], rng: np.random.Generator) -> nx.Graph:
    k = int(params["k"])
    graph = nx.barbell_graph(k, int(params.get("path", 0)))
    clique = float(params.get("clique_capacity", k))
    bridge = float(params.get("bridge_capacity", 1.0))
    second = graph.number_of_nodes() - k
    for u, v in graph.edges():
        in_clique = max(u, v) < k or min(u, v) >= second
        graph[u][v]["capacity"] = clique if in_clique else bridge
    return graph


_FAMILIES: Dict[str, Callable[[Dict[str, Any], np.random.Generator], nx.Graph]] = {
    "path": _path,
    "cycle": _cycle,
    "grid": _grid,
    "gnp": _gnp,
    "barbell": _barbell,
    "complete": _complete,
}


def generate(kind: str, params: Dict[str, Any], seed: int = 0) -> Graph:
    """Build an instance of family `kind`.

    Families and their parameters:
        - path, cycle, complete: `n`.
        - grid: `k` (k x k) or `rows` and `cols`.
        - gnp: `n`, `p`, optional `connect`.
        - barbell: `k` clique size, optional `path` length between the
          cliques, `clique_capacity` (default k) and `bridge_capacity`
          (default 1). Barbell capacities ignore the capacity law.

    Raises:
        ValueError: On an unknown family or bad parameters.
        DisconnectedGraphError: If a G(n, p) sample is disconnected and
            `connect` is not set.
    """
    if kind not in _FAMILIES:
        raise ValueError(
            f"unknown generator {kind}, expected one of {list(_FAMILIES)}"
        )
    rng = np.random.default_rng(seed)
    try:
        graph = _FAMILIES[kind](params, rng)
    except KeyError as e:
        raise ValueError(f"generator {kind} needs parameter {e}") from e
    if kind == "barbell":
        g = Graph.from_networkx(graph)
    else:
        g = _from_networkx(graph, params, rng)
    logger.debug(f"generated {kind} graph with n={g.n}, m={g.m} (seed {seed})")
    return g
