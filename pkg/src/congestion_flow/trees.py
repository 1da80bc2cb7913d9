"""Rooted forests and the two linear-time passes over them.

A forest is stored as a parent array. `subtree_sums` eliminates leaves
bottom-up (routing demands), `accumulate_down` pushes prices top-down
(recovering potentials). Each pass is one sparse triangular solve against
I - A, where A links every vertex to its parent, factored once in
topological order. Both accept a batch of vectors stored as the columns of
a 2-D array.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import SuperLU, splu

from congestion_flow.exceptions import DemandImbalanceError
from congestion_flow.graph import Graph
from congestion_flow.types import (
    EdgeVector,
    IndexArray,
    Potentials,
    Vector,
    VectorLike,
)
from congestion_flow.utils import BALANCE_TOLERANCE, as_vector


def _ancestor_jumps(parent: IndexArray) -> Tuple[List[IndexArray], IndexArray]:
    """Pointer jumping: the 2^k-th ancestors (roots map to themselves) and depths.

    Raises:
        ValueError: If the parent pointers contain a cycle.
    """
    n = parent.size
    has_parent = parent >= 0
    anc = np.where(has_parent, parent, np.arange(n))
    # Distance from every vertex to anc
    dist = has_parent.astype(np.int64)
    jumps = [anc]
    while not np.all(parent[anc] < 0):
        if len(jumps) > n.bit_length():
            raise ValueError("parent pointers contain a cycle")
        dist = dist + dist[anc]
        anc = anc[anc]
        jumps.append(anc)
    return jumps, dist


@dataclass(frozen=True)
class RootedForest:
    """Forest over vertices 0..n-1 given by parent pointers (-1 at roots).

    Arguments:
        parent (IndexArray) -- Parent of each vertex, -1 for roots.
    """

    parent: IndexArray
    levels: List[IndexArray] = field(init=False, repr=False)
    depth: IndexArray = field(init=False, repr=False)
    jumps: List[IndexArray] = field(init=False, repr=False)
    _order: IndexArray = field(init=False, repr=False)
    _lu: Optional[SuperLU] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        parent = np.asarray(self.parent, dtype=np.int64)
        n = parent.size
        jumps, depth = _ancestor_jumps(parent)
        # Stable sort keeps every level in increasing vertex order
        order = np.argsort(depth, kind="stable")
        counts = np.bincount(depth, minlength=1) if n else np.zeros(0, np.int64)
        levels = np.split(order, np.cumsum(counts)[:-1]) if n else []
        lu = None
        if n:
            pos = np.empty(n, dtype=np.int64)
            pos[order] = np.arange(n)
            children = np.flatnonzero(parent >= 0)
            # Parents come first in `order`, so I - A is unit upper triangular
            link = sp.csc_matrix(
                (
                    np.ones(children.size),
                    (pos[parent[children]], pos[children]),
                ),
                shape=(n, n),
            )
            lu = splu(
                (sp.identity(n, format="csc") - link).tocsc(),
                permc_spec="NATURAL",
            )
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_lu", lu)

    @property
    def n(self) -> int:
        return int(self.parent.size)

    @property
    def roots(self) -> IndexArray:
        return self.levels[0] if self.levels else np.zeros(0, dtype=np.int64)

    @property
    def edge_vertices(self) -> IndexArray:
        """Non-root vertices in increasing order; each stands for its parent edge"""
        return np.flatnonzero(self.parent >= 0)

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def _solve(self, rhs: np.ndarray, trans: str) -> np.ndarray:
        out = np.zeros_like(rhs)
        if self._lu is None:
            return out
        out[self._order] = self._lu.solve(
            np.ascontiguousarray(rhs[self._order]), trans=trans
        )
        return out

    def subtree_sums(self, x: Vector) -> Vector:
        """Sum of `x` over the subtree of every vertex (leaf elimination)."""
        return self._solve(np.array(x, dtype=np.float64), "N")

    def accumulate_down(
        self, q: Vector, root_values: Optional[Vector] = None
    ) -> Vector:
        """Potentials v with v[root] = root_values and v[u] = v[parent(u)] + q[u]."""
        rhs = np.array(q, dtype=np.float64)
        rhs[self.roots] = 0.0 if root_values is None else root_values
        return self._solve(rhs, "T")

    def component_roots(self) -> IndexArray:
        """Root of the tree containing each vertex."""
        return self.jumps[-1].copy()

    def path_to_root(self, u: int) -> List[int]:
        path = [int(u)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path

    def lowest_common_ancestors(self, a: IndexArray, b: IndexArray) -> IndexArray:
        """LCA of each pair (a[i], b[i]) by binary lifting, O(log height) steps.

        Pairs in different trees get -1.
        """
        comp = self.component_roots()
        a = np.array(a, dtype=np.int64)
        b = np.array(b, dtype=np.int64)
        same = comp[a] == comp[b]
        a, b = a[same], b[same]
        # Lift the deeper end of each pair to the depth of the other
        swap = self.depth[a] < self.depth[b]
        a, b = np.where(swap, b, a), np.where(swap, a, b)
        gap = self.depth[a] - self.depth[b]
        for k, up in enumerate(self.jumps):
            bit = ((gap >> k) & 1).astype(bool)
            a[bit] = up[a[bit]]
        for up in reversed(self.jumps):
            move = up[a] != up[b]
            a[move] = up[a[move]]
            b[move] = up[b[move]]
        a = np.where(a != b, self.parent[a], a)
        out = np.full(same.size, -1, dtype=np.int64)
        out[same] = a
        return out


@dataclass(frozen=True)
class TreeRouting:
    """A forest made of graph edges, rooted, with the graph orientation kept.

    Arguments:
        forest (RootedForest) -- Rooted structure over the graph vertices.
        edge_ids (IndexArray) -- Graph edge ids of the forest edges (sorted).
        parent_edge (IndexArray) -- Graph edge joining each vertex to its
            parent, -1 at roots.
        parent_sign (Vector) -- +1 if that edge is oriented parent -> child,
            -1 if child -> parent, 0 at roots.
    """

    forest: RootedForest
    edge_ids: IndexArray
    parent_edge: IndexArray
    parent_sign: Vector

    @classmethod
    def from_edges(
        cls, g: Graph, edge_ids: Sequence[int], roots: Optional[Sequence[int]] = None
    ) -> "TreeRouting":
        """Root the forest formed by `edge_ids` at `roots`.

        Args:
            g (Graph): The graph the edges belong to.
            edge_ids (Sequence[int]): Ids of an acyclic edge set.
            roots (Optional[Sequence[int]]): One root per forest component,
                vertex 0 when None (the edges must then span the graph).

        Raises:
            ValueError: If the edges contain a cycle, or the roots do not hit
                every component exactly once.
        """
        ids = np.sort(np.asarray(edge_ids, dtype=np.int64))
        roots = [0] if roots is None else [int(r) for r in roots]
        if ids.size != g.n - len(roots):
            raise ValueError(
                f"{ids.size} edges cannot form a forest with {len(roots)} "
                f"components on {g.n} vertices"
            )
        mat = sp.coo_matrix(
            (ids + 1, (g.tails[ids], g.heads[ids])), shape=(g.n, g.n)
        ).tocsr()
        mat = (mat + mat.T).tocsr()
        parent = np.full(g.n, -1, dtype=np.int64)
        seen = np.zeros(g.n, dtype=bool)
        for r in roots:
            order, preds = breadth_first_order(
                mat, r, directed=False, return_predecessors=True
            )
            if np.any(seen[order]):
                raise ValueError(f"root {r} shares a component with another root")
            seen[order] = True
            parent[order[1:]] = preds[order[1:]]
        if not np.all(seen):
            raise ValueError("edges and roots do not cover every vertex")
        children = np.flatnonzero(parent >= 0)
        parent_edge = np.full(g.n, -1, dtype=np.int64)
        parent_edge[children] = (
            np.asarray(mat[parent[children], children]).ravel().astype(np.int64) - 1
        )
        sign = np.zeros(g.n)
        oriented_down = g.heads[parent_edge[children]] == children
        sign[children] = np.where(oriented_down, 1.0, -1.0)
        return cls(
            forest=RootedForest(parent),
            edge_ids=ids,
            parent_edge=parent_edge,
            parent_sign=sign,
        )


def subtree_cut_capacities(g: Graph, forest: RootedForest) -> Vector:
    """Capacity in `g` of the cut around every subtree of `forest`.

    Uses c(S_u) = sum of degrees in S_u minus twice the capacity of edges with
    both ends in S_u; an edge lies inside S_u iff its LCA does.

    Returns:
        Vector: Entry u is c_S for S = subtree of u (the whole component at
        roots).
    """
    lca = forest.lowest_common_ancestors(g.tails, g.heads)
    inside = lca >= 0
    internal = np.bincount(lca[inside], g.capacities[inside], minlength=g.n)
    return forest.subtree_sums(g.degrees - 2.0 * internal)


def tree_flow(g: Graph, tree: TreeRouting, b: VectorLike) -> EdgeVector:
    """Unique routing of `b` along the forest edges.

    Args:
        g (Graph): The graph.
        tree (TreeRouting): Rooted forest of graph edges.
        b (VectorLike): Demands, balanced on every forest component.

    Raises:
        DemandImbalanceError: If some component has nonzero total demand.

    Returns:
        EdgeVector: Flow on every graph edge (zero off the forest) whose
        divergence equals `b`.
    """
    demand = as_vector(b, g.n, "demand")
    sums = tree.forest.subtree_sums(demand)
    roots = tree.forest.roots
    scale = np.abs(demand).sum(axis=0)
    if np.any(np.abs(sums[roots]) > BALANCE_TOLERANCE * np.maximum(scale, 1e-300)):
        raise DemandImbalanceError("demand is not balanced on every tree component")
    children = tree.forest.edge_vertices
    flow = np.zeros((g.m,) + demand.shape[1:])
    sign = tree.parent_sign[children]
    flow[tree.parent_edge[children]] = (sign * sums[children].T).T
    return flow


def tree_potential(g: Graph, tree: TreeRouting, q: VectorLike) -> Potentials:
    """Potentials whose differences along forest edges equal the prices `q`.

    Args:
        g (Graph): The graph.
        tree (TreeRouting): Rooted forest of graph edges.
        q (VectorLike): Price per graph edge along its orientation; only the
            forest edges are read.

    Returns:
        Potentials: v with v[root] = 0 and v[head] - v[tail] = q_e on every
        forest edge.
    """
    prices = as_vector(q, g.m, "prices")
    children = tree.forest.edge_vertices
    per_vertex = np.zeros((g.n,) + prices.shape[1:])
    along = prices[tree.parent_edge[children]]
    per_vertex[children] = (tree.parent_sign[children] * along.T).T
    return tree.forest.accumulate_down(per_vertex)
