"""Hierarchical forest congestion-approximator.

A level over N vertices holds t forests. Every forest component contains
one core vertex; contracting components to their cores gives the graph of
the next level, down to a single vertex. Each forest edge reports the
congestion of the subtree below it, with the capacity of that subtree's
cut in the original graph, so every row is a real cut congestion.

Multiplying by R eliminates leaves towards the cores and passes the core
excesses to the next level. Multiplying by Rᵀ runs the next level first and
spreads its core potentials back down the forests.

Row order is fixed at build time: for each entry in turn, its forest edges
(non-core vertices ascending) followed by the rows of its child, depth
first.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import validator
from pydantic.dataclasses import dataclass as pydantic_dataclass

from congestion_flow.approximators import CongestionApproximator, RowCut
from congestion_flow.exceptions import HierarchyFormatError
from congestion_flow.graph import Graph, maximal_spanning_tree, merge_parallel_edges
from congestion_flow.oracle import CutTable, exact_max_flow
from congestion_flow.trees import RootedForest, TreeRouting, subtree_cut_capacities
from congestion_flow.types import IndexArray, Potentials, Record, Vector

logger = logging.getLogger("congestion_flow")

HIERARCHY_VERSION = 1


@pydantic_dataclass
class HierarchyConfig:
    """Parameters of `build_hierarchy`.

    Arguments:
        t (Optional[int]) -- Forests per level, ⌈√n⌉ when None.
        seed (int) -- Seed of the perturbations and of the alpha trials.
        perturbation (float) -- σ of the log-normal noise applied to edge
            capacities before each forest but the first is picked.
        alpha_trials (int) -- Random s–t pairs used to estimate α.
        alpha_safety (float) -- Multiplier from measured to claimed α.
    """

    t: Optional[int] = None
    seed: int = 0
    perturbation: float = 0.5
    alpha_trials: int = 8
    alpha_safety: float = 2.0

    @validator("t")
    def _check_t(cls, t: Optional[int]) -> Optional[int]:
        if t is not None and t < 1:
            raise ValueError(f"t must be at least 1, got {t}")
        return t

    @validator("perturbation")
    def _check_perturbation(cls, sigma: float) -> float:
        if sigma < 0:
            raise ValueError(f"perturbation must be nonnegative, got {sigma}")
        return sigma

    @validator("alpha_trials")
    def _check_trials(cls, trials: int) -> int:
        if trials < 0:
            raise ValueError(f"alpha_trials must be nonnegative, got {trials}")
        return trials

    @validator("alpha_safety")
    def _check_safety(cls, safety: float) -> float:
        if safety < 1:
            raise ValueError(f"alpha_safety must be at least 1, got {safety}")
        return safety

    def branching(self, n: int) -> int:
        return self.t if self.t is not None else max(1, math.ceil(math.sqrt(n)))


@dataclass(frozen=True)
class ForestEntry:
    """One weighted forest of a level.

    Arguments:
        weight (float) -- Sampling probability among its siblings.
        forest (RootedForest) -- Forest over the level vertices, rooted at
            the cores.
        cut_capacities (Vector) -- c_S per forest edge, in row order.
        cores (IndexArray) -- Core vertices, ascending; child vertex j is the
            component of cores[j].
        core_index (IndexArray) -- Child vertex of every level vertex.
        child (Optional[ForestHierarchy]) -- Next level, None for a single
            core.
    """

    weight: float
    forest: RootedForest
    cut_capacities: Vector
    cores: IndexArray
    core_index: IndexArray
    child: Optional["ForestHierarchy"]

    @property
    def edge_vertices(self) -> IndexArray:
        return self.forest.edge_vertices

    @property
    def rows(self) -> int:
        own = int(self.edge_vertices.size)
        return own + (self.child.rows if self.child is not None else 0)


@dataclass(frozen=True)
class ForestHierarchy:
    """Weighted forests over `n` level vertices, each with a coarser child.

    Arguments:
        n (int) -- Vertices of this level.
        entries (List[ForestEntry]) -- The forests, empty when n = 1.
    """

    n: int
    entries: List[ForestEntry]

    @property
    def rows(self) -> int:
        return sum(entry.rows for entry in self.entries)

    @property
    def depth(self) -> int:
        """Number of levels below and including this one"""
        below = [e.child.depth for e in self.entries if e.child is not None]
        return 1 + max(below, default=0)

    def apply(self, b: Vector) -> Vector:
        """Row congestions for demands on this level's vertices (no checks)."""
        parts = []
        for entry in self.entries:
            sums = entry.forest.subtree_sums(b)
            parts.append((sums[entry.edge_vertices].T / entry.cut_capacities).T)
            if entry.child is not None:
                parts.append(entry.child.apply(sums[entry.cores]))
        if not parts:
            return np.zeros((0,) + b.shape[1:])
        return np.concatenate(parts, axis=0)

    def adjoint(self, p: Vector) -> Potentials:
        """Potentials Rᵀp on this level's vertices (no checks)."""
        v = np.zeros((self.n,) + p.shape[1:])
        offset = 0
        # Rows follow `apply`: each forest, then its child level
        for entry in self.entries:
            own = entry.edge_vertices.size
            # Non-root vertices price their parent edge
            q = np.zeros_like(v)
            prices = p[offset : offset + own].T / entry.cut_capacities
            q[entry.edge_vertices] = prices.T
            offset += own
            if entry.child is not None:
                child_p = p[offset : offset + entry.child.rows]
                offset += entry.child.rows
                core_values = entry.child.adjoint(child_p)
            else:
                core_values = np.zeros((entry.cores.size,) + p.shape[1:])
            v += entry.forest.accumulate_down(q, root_values=core_values)
        return v

    def row_members(self, members: np.ndarray) -> List[np.ndarray]:
        """Original-vertex masks of every row's cut.

        Args:
            members (np.ndarray): Boolean (n x original n) membership of each
                level vertex.
        """
        masks = []
        weights = members.astype(np.float64)
        for entry in self.entries:
            inside = entry.forest.subtree_sums(weights) > 0
            masks.extend(inside[entry.edge_vertices])
            if entry.child is not None:
                masks.extend(entry.child.row_members(inside[entry.cores]))
        return masks

    def sample(
        self, rng: np.random.Generator, representatives: IndexArray
    ) -> List[Tuple[int, int, float]]:
        """Edges of a random spanning tree over `representatives`."""
        if not self.entries:
            return []
        weights = np.array([entry.weight for entry in self.entries])
        pick = rng.choice(len(self.entries), p=weights / weights.sum())
        entry = self.entries[int(pick)]
        parent = entry.forest.parent
        edges = [
            (int(representatives[u]), int(representatives[parent[u]]), float(c))
            for u, c in zip(entry.edge_vertices, entry.cut_capacities)
        ]
        if entry.child is not None:
            edges += entry.child.sample(rng, representatives[entry.cores])
        return edges

    def to_dict(self) -> Record:
        return {
            "n": self.n,
            "entries": [
                {
                    "weight": entry.weight,
                    "parent": entry.forest.parent.tolist(),
                    "cut_capacities": entry.cut_capacities.tolist(),
                    "cores": entry.cores.tolist(),
                    "core_index": entry.core_index.tolist(),
                    "child": None if entry.child is None else entry.child.to_dict(),
                }
                for entry in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: Record) -> "ForestHierarchy":
        """Rebuild a level (and its children) from `to_dict` output.

        Raises:
            HierarchyFormatError: If fields are missing or inconsistent.
        """
        try:
            n = int(d["n"])
            entries = []
            for raw in d["entries"]:
                forest = RootedForest(np.asarray(raw["parent"], dtype=np.int64))
                cores = np.asarray(raw["cores"], dtype=np.int64)
                child = None if raw["child"] is None else cls.from_dict(raw["child"])
                entry = ForestEntry(
                    weight=float(raw["weight"]),
                    forest=forest,
                    cut_capacities=np.asarray(raw["cut_capacities"], dtype=np.float64),
                    cores=cores,
                    core_index=np.asarray(raw["core_index"], dtype=np.int64),
                    child=child,
                )
                _check_entry(n, entry)
                entries.append(entry)
        except (KeyError, TypeError, ValueError) as e:
            raise HierarchyFormatError(f"malformed hierarchy level: {e}") from e
        return cls(n=n, entries=entries)


def _check_entry(n: int, entry: ForestEntry) -> None:
    if entry.forest.n != n:
        raise ValueError(f"forest has {entry.forest.n} vertices, level has {n}")
    if not np.array_equal(entry.forest.roots, entry.cores):
        raise ValueError("forest roots and cores differ")
    if entry.cut_capacities.size != entry.edge_vertices.size:
        raise ValueError("one cut capacity per forest edge expected")
    if np.any(entry.cut_capacities <= 0):
        raise ValueError("cut capacities must be positive")
    expected_child = entry.cores.size if entry.cores.size > 1 else None
    actual_child = entry.child.n if entry.child is not None else None
    if expected_child != actual_child:
        raise ValueError(
            f"child over {actual_child} vertices, expected {expected_child}"
        )


def pick_cores(g: Graph, k: int) -> IndexArray:
    """The k vertices of largest weighted degree (ties to lower ids), ascending."""
    order = np.lexsort((np.arange(g.n), -g.degrees))
    return np.sort(order[:k])


def _contract(g: Graph, core_index: IndexArray, k: int) -> Graph:
    tails, heads = core_index[g.tails], core_index[g.heads]
    keep = tails != heads
    contracted = Graph(
        n=k, tails=tails[keep], heads=heads[keep], capacities=g.capacities[keep]
    )
    return merge_parallel_edges(contracted)


def _build_entry(
    g: Graph,
    cores: IndexArray,
    weights: Optional[Vector],
    weight: float,
    t: int,
    config: HierarchyConfig,
    rng: np.random.Generator,
) -> ForestEntry:
    tree = TreeRouting.from_edges(g, maximal_spanning_tree(g, weights), roots=cores[:1])
    cut = tree.parent_edge[cores[1:]]
    forest_edges = np.setdiff1d(tree.edge_ids, cut)
    forest = TreeRouting.from_edges(g, forest_edges, roots=cores).forest
    capacities = subtree_cut_capacities(g, forest)[forest.edge_vertices]
    core_index = np.searchsorted(cores, forest.component_roots())
    child = None
    if cores.size > 1:
        child = _build_level(_contract(g, core_index, cores.size), t, config, rng)
    return ForestEntry(
        weight=weight,
        forest=forest,
        cut_capacities=capacities,
        cores=cores,
        core_index=core_index,
        child=child,
    )


def _build_level(
    g: Graph, t: int, config: HierarchyConfig, rng: np.random.Generator
) -> ForestHierarchy:
    if g.n == 1:
        return ForestHierarchy(n=1, entries=[])
    g = merge_parallel_edges(g)
    k = max(1, min(math.ceil(g.n / t), g.n - 1))
    cores = pick_cores(g, k)
    logger.debug(f"hierarchy level: {g.n} vertices, {g.m} edges, {k} cores")
    entries = []
    for i in range(t):
        weights = None
        if i > 0 and config.perturbation > 0:
            noise = rng.lognormal(mean=0.0, sigma=config.perturbation, size=g.m)
            weights = g.capacities * noise
        entries.append(_build_entry(g, cores, weights, 1.0 / t, t, config, rng))
    return ForestHierarchy(n=g.n, entries=entries)


def build_hierarchy(
    g: Graph, config: Optional[HierarchyConfig] = None
) -> ForestHierarchy:
    """Build a forest hierarchy over `g`, deterministic under `config.seed`.

    The first forest of every level comes from the maximum-capacity spanning
    tree, the others from trees of log-normally perturbed capacities. The
    ⌈N/t⌉ highest-degree vertices become cores; the tree is cut above every
    core but the first, and the components are contracted for the next
    level.

    Args:
        g (Graph): A connected graph.
        config (Optional[HierarchyConfig]): Build parameters.

    Raises:
        DisconnectedGraphError: If `g` is not connected.
    """
    config = config or HierarchyConfig()
    t = config.branching(g.n)
    rng = np.random.default_rng(config.seed)
    hierarchy = _build_level(g, t, config, rng)
    logger.debug(f"built hierarchy with t={t}, {hierarchy.rows} rows")
    return hierarchy


def single_tree_hierarchy(g: Graph) -> ForestHierarchy:
    """Hierarchy of one level holding the maximum-capacity spanning tree at 0."""
    cores = np.zeros(1, dtype=np.int64)
    entry = _build_entry(
        g, cores, None, 1.0, 1, HierarchyConfig(t=1), np.random.default_rng(0)
    )
    return ForestHierarchy(n=g.n, entries=[entry])


class HierarchyApproximator(CongestionApproximator):
    """`ForestHierarchy` behind the congestion-approximator interface.

    Args:
        g (Graph): The graph the hierarchy was built on.
        hierarchy (ForestHierarchy): The structure.
        alpha_claimed (float): Claimed approximation factor.
        alpha_measured (Optional[float]): Estimate the claim was derived from.
        config (Optional[HierarchyConfig]): Build parameters, for the record.
    """

    def __init__(
        self,
        g: Graph,
        hierarchy: ForestHierarchy,
        alpha_claimed: float,
        alpha_measured: Optional[float] = None,
        config: Optional[HierarchyConfig] = None,
    ) -> None:
        if hierarchy.n != g.n:
            raise HierarchyFormatError(
                f"hierarchy covers {hierarchy.n} vertices, graph has {g.n}"
            )
        super().__init__(g, alpha_claimed)
        self.hierarchy = hierarchy
        self.alpha_measured = alpha_measured
        self.config = config or HierarchyConfig()

    @classmethod
    def build(
        cls,
        g: Graph,
        config: Optional[HierarchyConfig] = None,
        alpha: Optional[float] = None,
    ) -> "HierarchyApproximator":
        """Build the hierarchy and estimate α unless `alpha` is given."""
        config = config or HierarchyConfig()
        hierarchy = build_hierarchy(g, config)
        if alpha is not None:
            return cls(g, hierarchy, alpha, config=config)
        approximator = cls(g, hierarchy, 1.0, config=config)
        measured = estimate_alpha(
            approximator, g, config.alpha_trials, np.random.default_rng(config.seed)
        )
        claimed = max(1.0, config.alpha_safety * measured)
        logger.info(f"hierarchy alpha measured {measured:.4g}, claimed {claimed:.4g}")
        return cls(g, hierarchy, claimed, alpha_measured=measured, config=config)

    @property
    def rows(self) -> int:
        return self.hierarchy.rows

    def _apply(self, b: Vector) -> Vector:
        return self.hierarchy.apply(b)

    def _adjoint(self, p: Vector) -> Potentials:
        return self.hierarchy.adjoint(p)

    def row_cuts(self) -> List[RowCut]:
        masks = self.hierarchy.row_members(np.eye(self.n, dtype=bool))
        g = self.graph
        return [
            (mask, float(g.capacities[mask[g.tails] != mask[g.heads]].sum()))
            for mask in masks
        ]

    def sample_tree(self, seed: int = 0) -> Tuple[IndexArray, IndexArray, Vector]:
        """Spanning tree drawn by picking forests with their weights.

        Returns:
            Tuple[IndexArray, IndexArray, Vector]: Tails, heads and weights
            (the cut capacity each tree edge was annotated with).
        """
        rng = np.random.default_rng(seed)
        edges = self.hierarchy.sample(rng, np.arange(self.n))
        if not edges:
            return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        tails, heads, weights = zip(*edges)
        return (
            np.asarray(tails, dtype=np.int64),
            np.asarray(heads, dtype=np.int64),
            np.asarray(weights, dtype=np.float64),
        )

    def to_dict(self) -> Record:
        return {
            "version": HIERARCHY_VERSION,
            "graph": {
                "n": self.n,
                "m": self.graph.m,
                "total_capacity": self.graph.total_capacity,
            },
            "config": {
                "t": self.config.t,
                "seed": self.config.seed,
                "perturbation": self.config.perturbation,
                "alpha_trials": self.config.alpha_trials,
                "alpha_safety": self.config.alpha_safety,
            },
            "alpha_claimed": self.alpha_claimed,
            "alpha_measured": self.alpha_measured,
            "rows": self.rows,
            "hierarchy": self.hierarchy.to_dict(),
        }

    @classmethod
    def from_dict(cls, g: Graph, d: Dict[str, Any]) -> "HierarchyApproximator":
        """Restore a serialized approximator for the graph it was built on.

        Raises:
            HierarchyFormatError: On a version, graph or structure mismatch.
        """
        version = d.get("version")
        if version != HIERARCHY_VERSION:
            raise HierarchyFormatError(
                f"unsupported hierarchy version {version}, expected {HIERARCHY_VERSION}"
            )
        try:
            recorded = d["graph"]
            if int(recorded["n"]) != g.n or int(recorded["m"]) != g.m:
                raise HierarchyFormatError(
                    f"hierarchy was built on a graph with n={recorded['n']}, "
                    f"m={recorded['m']}, got n={g.n}, m={g.m}"
                )
            hierarchy = ForestHierarchy.from_dict(d["hierarchy"])
            config = HierarchyConfig(**d["config"])
            approximator = cls(
                g,
                hierarchy,
                float(d["alpha_claimed"]),
                alpha_measured=d.get("alpha_measured"),
                config=config,
            )
        except HierarchyFormatError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise HierarchyFormatError(f"malformed hierarchy record: {e}") from e
        if "rows" in d and int(d["rows"]) != approximator.rows:
            raise HierarchyFormatError(
                f"record lists {d['rows']} rows, structure has {approximator.rows}"
            )
        return approximator


def estimate_alpha(
    R: CongestionApproximator, g: Graph, trials: int, rng: np.random.Generator
) -> float:
    """Largest opt(b)/‖Rb‖∞ over random unit s–t demands, via exact max flow."""
    if g.n < 2 or trials == 0:
        return 1.0
    measured = 1.0
    for _ in range(trials):
        s, t = rng.choice(g.n, size=2, replace=False)
        value, _ = exact_max_flow(g, int(s), int(t))
        b = np.zeros(g.n)
        b[s], b[t] = -1.0, 1.0
        lower = R.norm(b)
        if lower > 0:
            measured = max(measured, (1.0 / value) / lower)
    return measured


def domination_fraction(
    g: Graph, tree: Tuple[IndexArray, IndexArray, Vector]
) -> float:
    """Share of the cuts of `g` on which the weighted tree is at least as large.

    Args:
        g (Graph): Small graph (cut enumeration).
        tree (Tuple[IndexArray, IndexArray, Vector]): Tails, heads and weights
            of a spanning tree, as returned by `sample_tree`.
    """
    tails, heads, weights = tree
    table = CutTable(g)
    crossing = table.masks[:, tails] != table.masks[:, heads]
    tree_cuts = crossing.astype(np.float64) @ weights
    return float(np.mean(tree_cuts >= table.capacities * (1 - 1e-12)))
