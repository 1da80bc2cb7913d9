"""Congestion-approximators: linear maps R with ‖Rb‖∞ ≤ opt(b) ≤ α‖Rb‖∞.

Every implementation here reports, per row, the congestion b_S / c_S of a
real cut S of the graph. That makes the lower bound ‖Rb‖∞ ≤ opt(b) exact
and ‖R(Bf)‖∞ ≤ ‖C⁻¹f‖∞ for every flow f; only α depends on the choice of
cuts.
"""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from congestion_flow.exceptions import ApproximatorError
from congestion_flow.graph import (
    Graph,
    divergence,
    max_congestion,
    maximal_spanning_tree,
)
from congestion_flow.trees import TreeRouting, subtree_cut_capacities
from congestion_flow.types import (
    ApproximatorKind,
    DemandVector,
    EdgeVector,
    Potentials,
    Vector,
    VectorLike,
)
from congestion_flow.utils import as_vector, check_balanced, random_demand

logger = logging.getLogger("congestion_flow")

# Above this many vertices the Cheeger bound uses a sparse eigensolver
DENSE_SPECTRUM_LIMIT = 200

# (membership mask of S, c_S) for one row
RowCut = Tuple[np.ndarray, float]


class CongestionApproximator(ABC):
    """Linear operator from demands to row congestions, with its adjoint.

    Subclasses implement `_apply` and `_adjoint` on validated float arrays;
    both receive either a vector or a batch with one vector per column.
    """

    def __init__(self, g: Graph, alpha_claimed: float) -> None:
        if not alpha_claimed >= 1:
            raise ApproximatorError(f"alpha must be at least 1, got {alpha_claimed}")
        self.graph = g
        self.alpha_claimed = float(alpha_claimed)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    @abstractmethod
    def rows(self) -> int:
        """Number of rows of R"""

    @abstractmethod
    def _apply(self, b: Vector) -> Vector:
        ...

    @abstractmethod
    def _adjoint(self, p: Vector) -> Potentials:
        ...

    @abstractmethod
    def row_cuts(self) -> List[RowCut]:
        """The cut (mask, c_S) whose congestion each row reports."""

    def apply(self, b: VectorLike, check_balance: bool = True) -> Vector:
        """Rb for a demand vector or a batch of them.

        Raises:
            DimensionMismatchError: If `b` does not have n entries.
            DemandImbalanceError: If `check_balance` and `b` does not sum to 0.
        """
        demand = as_vector(b, self.n, "demand")
        if check_balance:
            check_balanced(demand)
        return self._apply(demand)

    def adjoint(self, p: VectorLike) -> Potentials:
        """Rᵀp, potentials on the vertices.

        Raises:
            DimensionMismatchError: If `p` does not have one entry per row.
        """
        return self._adjoint(as_vector(p, self.rows, "row vector"))

    def norm(self, b: VectorLike) -> float:
        """‖Rb‖∞, a lower bound on opt(b)."""
        rb = self.apply(b)
        return float(np.max(np.abs(rb))) if rb.size else 0.0

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(n={self.n}, rows={self.rows}, "
            f"alpha_claimed={self.alpha_claimed:.4g})"
        )


def cheeger_alpha(g: Graph) -> float:
    """Upper bound 2/λ₂ on 1/conductance from the normalized Laplacian.

    Cheeger's inequality gives conductance ≥ λ₂/2, so the result is a valid
    approximation factor for `DegreeApproximator`. Graphs above
    `DENSE_SPECTRUM_LIMIT` vertices use sparse shift-invert Lanczos.
    """
    if g.n < 2:
        return 1.0
    scaling = sp.diags(1.0 / np.sqrt(g.degrees))
    laplacian = sp.identity(g.n) - scaling @ g.adjacency_matrix @ scaling
    if g.n <= DENSE_SPECTRUM_LIMIT:
        lambda_2 = float(
            eigh(laplacian.toarray(), eigvals_only=True, subset_by_index=[1, 1])[0]
        )
    else:
        # The two eigenvalues nearest a small negative shift are 0 and λ₂
        start = np.random.default_rng(0).uniform(0.5, 1.5, g.n)
        values = eigsh(
            laplacian.tocsc(),
            k=2,
            sigma=-1e-2,
            which="LM",
            v0=start,
            return_eigenvectors=False,
        )
        lambda_2 = float(np.max(values))
    if lambda_2 <= 0:
        raise ApproximatorError("normalized Laplacian has a zero second eigenvalue")
    return max(1.0, 2.0 / lambda_2)


class DegreeApproximator(CongestionApproximator):
    """Diagonal R with R_ii = 1/deg(i): each row is the cut around one vertex.

    Args:
        g (Graph): The graph.
        alpha (Optional[float]): Claimed approximation factor; the Cheeger
            bound on 1/conductance when None.
    """

    def __init__(self, g: Graph, alpha: Optional[float] = None) -> None:
        super().__init__(g, cheeger_alpha(g) if alpha is None else alpha)
        self.inverse_degrees = 1.0 / g.degrees

    @property
    def rows(self) -> int:
        return self.n

    def _apply(self, b: Vector) -> Vector:
        return (b.T * self.inverse_degrees).T

    def _adjoint(self, p: Vector) -> Potentials:
        return (p.T * self.inverse_degrees).T

    def row_cuts(self) -> List[RowCut]:
        vertices = np.arange(self.n)
        return [(vertices == i, float(d)) for i, d in enumerate(self.graph.degrees)]


class TreeApproximator(CongestionApproximator):
    """One row per spanning tree edge: (Rb)_e = b_S / c_S.

    S is the side of T - e away from the root and c_S its capacity in the
    graph. Rows follow the tree's non-root vertices in increasing order.

    Args:
        g (Graph): The graph.
        tree (TreeRouting): Spanning tree of graph edges.
        cut_capacities (Optional[Vector]): c_S per row, computed when None.
        alpha (Optional[float]): Claimed factor, m when None.
    """

    def __init__(
        self,
        g: Graph,
        tree: TreeRouting,
        cut_capacities: Optional[Vector] = None,
        alpha: Optional[float] = None,
    ) -> None:
        super().__init__(g, max(1.0, float(g.m)) if alpha is None else alpha)
        self.tree = tree
        self.edge_vertices = tree.forest.edge_vertices
        if cut_capacities is None:
            cut_capacities = subtree_cut_capacities(g, tree.forest)[self.edge_vertices]
        self.cut_capacities = as_vector(
            cut_capacities, self.edge_vertices.size, "cut capacities"
        )

    @property
    def rows(self) -> int:
        return int(self.edge_vertices.size)

    def _apply(self, b: Vector) -> Vector:
        sums = self.tree.forest.subtree_sums(b)
        return (sums[self.edge_vertices].T / self.cut_capacities).T

    def _adjoint(self, p: Vector) -> Potentials:
        q = np.zeros((self.n,) + p.shape[1:])
        q[self.edge_vertices] = (p.T / self.cut_capacities).T
        return self.tree.forest.accumulate_down(q)

    def row_cuts(self) -> List[RowCut]:
        row_of = np.full(self.n, -1, dtype=np.int64)
        row_of[self.edge_vertices] = np.arange(self.rows)
        masks = np.zeros((self.rows, self.n), dtype=bool)
        for w in range(self.n):
            ancestors = [u for u in self.tree.forest.path_to_root(w) if row_of[u] >= 0]
            masks[row_of[ancestors], w] = True
        return [(masks[i], float(c)) for i, c in enumerate(self.cut_capacities)]


def build_tree_approximator(
    g: Graph, alpha: Optional[float] = None
) -> TreeApproximator:
    """Tree approximator on the maximum-capacity spanning tree, rooted at 0.

    Raises:
        DisconnectedGraphError: If `g` has no spanning tree.
    """
    tree = TreeRouting.from_edges(g, maximal_spanning_tree(g))
    return TreeApproximator(g, tree, alpha=alpha)


def flow_contraction(R: CongestionApproximator, g: Graph, f: VectorLike) -> float:
    """‖R(Bf)‖∞ / ‖C⁻¹f‖∞, at most 1 when every row is a cut congestion."""
    denom = max_congestion(g, f)
    if denom == 0:
        return 0.0
    rb = R.apply(divergence(g, f), check_balance=False)
    return float(np.max(np.abs(rb))) / denom


def st_demand_batch(n: int) -> DemandVector:
    """Every unit s–t demand with s < t, one per column."""
    sources, sinks = np.triu_indices(n, k=1)
    batch = np.zeros((n, sources.size))
    cols = np.arange(sources.size)
    batch[sources, cols] = -1.0
    batch[sinks, cols] = 1.0
    return batch


def measure_alpha(
    R: CongestionApproximator,
    g: Graph,
    trials: int = 100,
    seed: int = 0,
) -> float:
    """Empirical α: max of opt(b) / ‖Rb‖∞ over sampled and s–t demands.

    Samples `trials` random balanced demands and adds every single-source
    single-sink pair. opt(b) comes from cut enumeration, so `g` must be small.

    Raises:
        OracleError: If `g` is too large for cut enumeration.

    Returns:
        float: The largest ratio seen; inf if some nonzero b has Rb = 0.
    """
    from congestion_flow.oracle import CutTable

    rng = np.random.default_rng(seed)
    sampled = [random_demand(g.n, rng) for _ in range(trials)]
    batch = np.column_stack(sampled + [st_demand_batch(g.n)])
    opt = CutTable(g).opt(batch)
    lower = np.abs(R.apply(batch, check_balance=False)).max(axis=0)
    nonzero = opt > 0
    if np.any(nonzero & (lower <= 0)):
        return float("inf")
    ratios = opt[nonzero] / lower[nonzero]
    measured = float(ratios.max()) if ratios.size else 1.0
    if measured > R.alpha_claimed * (1 + 1e-9):
        logger.warning(
            f"measured alpha {measured:.4g} exceeds claimed {R.alpha_claimed:.4g}"
        )
    return measured


def make_approximator(
    g: Graph,
    kind: Union[ApproximatorKind, str] = ApproximatorKind.HIERARCHY,
    alpha: Optional[float] = None,
    t: Optional[int] = None,
    seed: int = 0,
) -> CongestionApproximator:
    """Build the approximator named by `kind`.

    Args:
        g (Graph): The graph.
        kind (Union[ApproximatorKind, str]): Which approximator to build.
        alpha (Optional[float]): Override of the claimed α.
        t (Optional[int]): Hierarchy branching, ⌈√n⌉ when None.
        seed (int): Hierarchy seed.
    """
    kind = ApproximatorKind(kind)
    if kind is ApproximatorKind.DEGREE:
        return DegreeApproximator(g, alpha)
    if kind is ApproximatorKind.TREE:
        return build_tree_approximator(g, alpha)
    from congestion_flow.hierarchy import HierarchyApproximator, HierarchyConfig

    config = HierarchyConfig(t=t, seed=seed)
    return HierarchyApproximator.build(g, config, alpha=alpha)


def residual_norm(R: CongestionApproximator, b: DemandVector, f: EdgeVector) -> float:
    """‖R(b - Bf)‖∞ without a balance check on the residual."""
    rb = R.apply(np.asarray(b) - divergence(R.graph, f), check_balance=False)
    return float(np.max(np.abs(rb))) if rb.size else 0.0
