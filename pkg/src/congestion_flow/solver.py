"""Approximate min-congestion routing by gradient descent on a softmax potential.

`almost_route` minimizes ‖C⁻¹f‖∞ + 2α‖R(b - Bf)‖∞ through its smooth
version φ and returns a flow that routes most of `b` together with dual
potentials. `route` closes the remaining demand with a few rounds at
ε = 1/2 and a final spanning tree routing, and pairs the flow with a
threshold cut of the first round's potentials.
"""
import dataclasses
import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import validator
from pydantic.dataclasses import dataclass

from congestion_flow.approximators import CongestionApproximator, make_approximator
from congestion_flow.exceptions import (
    ApproximatorError,
    DegenerateCutError,
    DescentError,
    IterationBudgetError,
)
from congestion_flow.graph import (
    ArrayConfig,
    Cut,
    Graph,
    adjoint_divergence,
    divergence,
    max_congestion,
    maximal_spanning_tree,
)
from congestion_flow.smoothing import gradient_and_potentials, potential
from congestion_flow.trees import TreeRouting, tree_flow
from congestion_flow.types import (
    ApproximatorKind,
    DescentMethod,
    EdgeVector,
    Potentials,
    VectorLike,
)
from congestion_flow.utils import as_vector, check_balanced, unit_demand

logger = logging.getLogger("congestion_flow")


@dataclass(frozen=True)
class SolverConfig:
    """Constants of the descent and of the outer recursion.

    Arguments:
        epsilon (float) -- Target accuracy, in (0, 1/2].
        alpha (Optional[float]) -- Override of the approximator's claimed α.
        scale_target_coeff (float) -- φ is kept above coeff·ln(n)/ε.
        scale_up (float) -- Factor applied to the scaling when φ drops below
            the target.
        termination_coeff (float) -- Stop once δ < coeff·ε.
        max_iter_coeff (float) -- Constant of the iteration budget
            coeff·α²·ε⁻³·ln(n)·(2 + ln α).
        outer_rounds (Optional[int]) -- Residual rounds, ⌈log₂(2m)⌉ when None.
        residual_epsilon (float) -- Accuracy of the residual rounds.
        method (DescentMethod) -- Inner descent method.
        check_descent (bool) -- Verify the guaranteed decrease every step.
        descent_tolerance (float) -- Slack of that check, relative to
            max(1, φ).
        min_iterations_budget (int) -- Floor of the iteration budget.
    """

    epsilon: float = 0.1
    alpha: Optional[float] = None
    scale_target_coeff: float = 16.0
    scale_up: float = 17.0 / 16.0
    termination_coeff: float = 0.25
    max_iter_coeff: float = 64.0
    outer_rounds: Optional[int] = None
    residual_epsilon: float = 0.5
    method: DescentMethod = DescentMethod.STEEPEST
    check_descent: bool = True
    descent_tolerance: float = 1e-9
    min_iterations_budget: int = 10000

    @validator("epsilon", "residual_epsilon")
    def _check_epsilon(cls, eps: float) -> float:
        if not 0 < eps <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {eps}")
        return eps

    @validator("alpha")
    def _check_alpha(cls, alpha: Optional[float]) -> Optional[float]:
        if alpha is not None and not alpha >= 1:
            raise ValueError(f"alpha must be at least 1, got {alpha}")
        return alpha

    @validator("scale_up")
    def _check_scale_up(cls, factor: float) -> float:
        if not factor > 1:
            raise ValueError(f"scale_up must exceed 1, got {factor}")
        return factor

    @validator("scale_target_coeff", "termination_coeff", "max_iter_coeff")
    def _check_positive(cls, coeff: float) -> float:
        if not coeff > 0:
            raise ValueError(f"coefficients must be positive, got {coeff}")
        return coeff

    @validator("outer_rounds")
    def _check_rounds(cls, rounds: Optional[int]) -> Optional[int]:
        if rounds is not None and rounds < 0:
            raise ValueError(f"outer_rounds must be nonnegative, got {rounds}")
        return rounds

    def with_epsilon(self, epsilon: float) -> "SolverConfig":
        return dataclasses.replace(self, epsilon=epsilon)

    def rounds_for(self, m: int) -> int:
        if self.outer_rounds is not None:
            return self.outer_rounds
        return max(1, math.ceil(math.log2(2 * max(m, 1))))

    def iteration_budget(self, n: int, alpha: float) -> int:
        epsilon = self.epsilon
        shape = alpha**2 * epsilon**-3 * math.log(max(n, 2)) * (2 + math.log(alpha))
        return max(int(self.max_iter_coeff * shape), self.min_iterations_budget)

    def dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "scale_target_coeff": self.scale_target_coeff,
            "scale_up": self.scale_up,
            "termination_coeff": self.termination_coeff,
            "max_iter_coeff": self.max_iter_coeff,
            "outer_rounds": self.outer_rounds,
            "residual_epsilon": self.residual_epsilon,
            "method": self.method.value,
            "check_descent": self.check_descent,
        }


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class AlmostRouteResult:
    """Output of one `almost_route` call, in the units of the input demand.

    Arguments:
        flow (np.ndarray) -- Flow f.
        potentials (np.ndarray) -- Dual potentials v = Rᵀp₂ at termination.
        residual (np.ndarray) -- Unrouted demand b - Bf.
        objective (float) -- ‖C⁻¹f‖∞ + 2α‖R(b - Bf)‖∞.
        iterations (int) -- Descent steps taken.
        scalings (int) -- Times the scaling was raised.
        alpha (float) -- α used in the potential.
        epsilon (float) -- Accuracy of the call.
        certificate_ratio (float) -- bᵀv / ‖CBᵀv‖₁, a lower bound on opt(b).
        slack_ratio (float) -- ‖R(b - Bf)‖∞ / ‖Rb‖∞.
    """

    flow: np.ndarray
    potentials: np.ndarray
    residual: np.ndarray
    objective: float
    iterations: int
    scalings: int
    alpha: float
    epsilon: float
    certificate_ratio: float
    slack_ratio: float


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class FlowSolution:
    """A flow routing b exactly with a cut certifying its quality.

    Arguments:
        flow (np.ndarray) -- Flow with divergence b.
        cut (Cut) -- Threshold cut of the first round's potentials.
        primal (float) -- ‖C⁻¹f‖∞.
        dual (float) -- b_S / c_S of the cut, a lower bound on opt(b).
        gap (float) -- primal / dual.
        epsilon (float) -- Requested accuracy.
        alpha (float) -- α used by the descent.
        iterations (int) -- Descent steps over all rounds.
        scalings (int) -- Scalings over all rounds.
        rounds (int) -- Residual rounds run after the first.
        round_iterations (List[int]) -- Descent steps of every round, the
            first round first.
        certificate_ratio (float) -- First round bᵀv / ‖CBᵀv‖₁.
        slack_ratio (float) -- First round ‖R(b - Bf)‖∞ / ‖Rb‖∞.
    """

    flow: np.ndarray
    cut: Cut
    primal: float
    dual: float
    gap: float
    epsilon: float
    alpha: float
    iterations: int
    scalings: int
    rounds: int
    round_iterations: List[int]
    certificate_ratio: float
    slack_ratio: float

    @property
    def within_tolerance(self) -> bool:
        """Whether the certified gap meets the requested accuracy"""
        return self.gap <= 1 + self.epsilon + 1e-9

    def dict(self) -> Dict[str, Any]:
        return {
            "flow": self.flow.tolist(),
            "cut": self.cut.dict(),
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "iterations": self.iterations,
            "scalings": self.scalings,
            "rounds": self.rounds,
            "round_iterations": list(self.round_iterations),
            "certificate_ratio": self.certificate_ratio,
            "slack_ratio": self.slack_ratio,
        }


def certificate_ratio(g: Graph, b: VectorLike, v: Potentials) -> float:
    """bᵀv / ‖CBᵀv‖₁, 0 for constant potentials."""
    denom = float(np.sum(g.capacities * np.abs(adjoint_divergence(g, v))))
    if denom == 0:
        return 0.0
    return float(np.dot(b, v)) / denom


def _sign_step(grad: EdgeVector) -> EdgeVector:
    # np.sign maps exact zeros to zero
    return np.sign(grad)


def almost_route(
    g: Graph,
    R: CongestionApproximator,
    b: VectorLike,
    eps: Optional[float] = None,
    cfg: Optional[SolverConfig] = None,
) -> AlmostRouteResult:
    """Route most of `b` with near-optimal congestion plus a slack penalty.

    Args:
        g (Graph): The graph.
        R (CongestionApproximator): Approximator used for the slack term.
        b (VectorLike): Balanced demands.
        eps (Optional[float]): Accuracy, `cfg.epsilon` when None.
        cfg (Optional[SolverConfig]): Solver constants.

    Raises:
        DemandImbalanceError: If `b` does not sum to zero.
        ApproximatorError: If R maps a nonzero `b` to zero.
        IterationBudgetError: If the descent exceeds its budget.
        DescentError: If a step or the scaling count breaks its guarantee.

    Returns:
        AlmostRouteResult: Flow, potentials and diagnostics, unscaled.
    """
    cfg = cfg or SolverConfig()
    if eps is not None:
        cfg = cfg.with_epsilon(eps)
    epsilon = cfg.epsilon
    demand = as_vector(b, g.n, "demand")
    check_balanced(demand)
    alpha = cfg.alpha if cfg.alpha is not None else R.alpha_claimed
    zero_flow = np.zeros(g.m)
    if not np.any(demand):
        return AlmostRouteResult(
            flow=zero_flow,
            potentials=np.zeros(g.n),
            residual=np.zeros(g.n),
            objective=0.0,
            iterations=0,
            scalings=0,
            alpha=alpha,
            epsilon=epsilon,
            certificate_ratio=0.0,
            slack_ratio=0.0,
        )
    rb_norm = float(np.max(np.abs(R.apply(demand, check_balance=False))))
    if rb_norm == 0:
        raise ApproximatorError("approximator maps a nonzero demand to zero")

    target = cfg.scale_target_coeff * math.log(max(g.n, 2)) / epsilon
    floor = 4.0 / epsilon * (math.log(2 * g.m) + math.log(2 * R.rows))
    if target < floor:
        logger.debug(f"raising scale target from {target:.4g} to {floor:.4g}")
        target = floor
    scale = target / (2.0 * alpha * rb_norm)
    budget = cfg.iteration_budget(g.n, alpha)
    max_scalings = 4.0 * (math.log(2 * alpha) / math.log(cfg.scale_up) + 1)
    step_coeff = 1.0 / (1.0 + 4.0 * alpha**2)
    min_decrease = 1.0 / (2.0 + 8.0 * alpha**2)

    flow = zero_flow
    iterations = 0
    scalings = 0
    parts = potential(g, R, alpha, demand, flow, scale)
    while True:
        while parts.phi < target:
            scale *= cfg.scale_up
            scalings += 1
            if scalings > max_scalings:
                raise DescentError(
                    f"scaled {scalings} times, more than the bound {max_scalings:.1f}"
                )
            parts = potential(g, R, alpha, demand, flow, scale)
        grad, v = gradient_and_potentials(parts, g, R, alpha)
        delta = float(np.sum(g.capacities * np.abs(grad)))
        if delta < cfg.termination_coeff * epsilon:
            break
        if iterations >= budget:
            raise IterationBudgetError(
                f"no convergence within {budget} iterations (alpha={alpha:.4g}, "
                f"epsilon={epsilon}); the claimed alpha may be too small"
            )
        step = delta * step_coeff
        flow = flow - (step / scale) * _sign_step(grad) * g.capacities
        iterations += 1
        previous = parts.phi
        parts = potential(g, R, alpha, demand, flow, scale)
        if cfg.check_descent:
            allowed = previous - delta**2 * min_decrease
            if parts.phi > allowed + cfg.descent_tolerance * max(1.0, previous):
                raise DescentError(
                    f"step {iterations} moved phi from {previous:.10g} to "
                    f"{parts.phi:.10g}, expected at most {allowed:.10g}"
                )

    residual = parts.residual
    slack = float(np.max(np.abs(R.apply(residual, check_balance=False))))
    result = AlmostRouteResult(
        flow=flow,
        potentials=v,
        residual=residual,
        objective=parts.objective / scale,
        iterations=iterations,
        scalings=scalings,
        alpha=alpha,
        epsilon=epsilon,
        certificate_ratio=certificate_ratio(g, demand, v),
        slack_ratio=slack / rb_norm,
    )
    logger.debug(
        f"almost_route: {iterations} iterations, {scalings} scalings, "
        f"objective {result.objective:.6g}, "
        f"certificate {result.certificate_ratio:.6g}"
    )
    return result


def threshold_cut(g: Graph, b: VectorLike, v: VectorLike) -> Cut:
    """Best cut {u : v_u ≥ θ} over all thresholds θ, by |b_S| / c_S.

    Vertices are sorted by decreasing potential and every prefix ending
    between two distinct values is scanned; a difference array over the
    sorted ranks gives all prefix capacities in O(m + n log n).

    Args:
        g (Graph): The graph.
        b (VectorLike): Demands.
        v (VectorLike): Finite potentials, not all equal.

    Raises:
        DegenerateCutError: If every potential is equal.
        ValueError: If a potential is not finite.

    Returns:
        Cut: The best threshold cut, oriented so that b_S ≥ 0.
    """
    demand = as_vector(b, g.n, "demand")
    pot = as_vector(v, g.n, "potentials")
    if not np.all(np.isfinite(pot)):
        raise ValueError("potentials must be finite")
    if g.n < 2 or np.ptp(pot) == 0:
        raise DegenerateCutError("all potentials are equal, no threshold cut exists")
    order = np.argsort(-pot, kind="stable")
    rank = np.empty(g.n, dtype=np.int64)
    rank[order] = np.arange(g.n)

    lo = np.minimum(rank[g.tails], rank[g.heads])
    hi = np.maximum(rank[g.tails], rank[g.heads])
    # Prefixes of sizes lo + 1 through hi split an edge
    diff = np.zeros(g.n + 1)
    np.add.at(diff, lo + 1, g.capacities)
    np.add.at(diff, hi + 1, -g.capacities)
    capacities = np.cumsum(diff)[1 : g.n]
    # Entry k - 1 holds the prefix of size k; the full prefix is no cut
    inside = np.cumsum(demand[order])[:-1]

    sorted_pot = pot[order]
    threshold = sorted_pot[:-1] > sorted_pot[1:]
    ratios = np.where(threshold, np.abs(inside) / capacities, -np.inf)
    k = int(np.argmax(ratios)) + 1
    cut = Cut(
        n=g.n,
        side=order[:k],
        b_S=float(inside[k - 1]),
        c_S=float(capacities[k - 1]),
    )
    return cut.complement() if cut.b_S < 0 else cut


def _centered(residual: np.ndarray) -> np.ndarray:
    return residual - residual.mean()


def route(
    g: Graph,
    R: CongestionApproximator,
    b: VectorLike,
    eps: Optional[float] = None,
    cfg: Optional[SolverConfig] = None,
) -> FlowSolution:
    """Route `b` exactly with congestion within 1 + ε of the returned cut.

    Runs `almost_route` at the requested accuracy, then `outer_rounds` more
    times at `residual_epsilon` on what is left, and routes the last
    residual on a maximum-capacity spanning tree.

    Args:
        g (Graph): The graph.
        R (CongestionApproximator): Congestion-approximator for `g`.
        b (VectorLike): Balanced, nonzero demands.
        eps (Optional[float]): Accuracy, `cfg.epsilon` when None.
        cfg (Optional[SolverConfig]): Solver constants.

    Raises:
        ValueError: If `b` is zero.
        DemandImbalanceError: If `b` does not sum to zero.
        SolverError: Propagated from `almost_route`.

    Returns:
        FlowSolution: The flow, the certifying cut and the gap between them.
    """
    cfg = cfg or SolverConfig()
    if eps is not None:
        cfg = cfg.with_epsilon(eps)
    demand = as_vector(b, g.n, "demand")
    check_balanced(demand)
    if not np.any(demand):
        raise ValueError("route needs a nonzero demand vector")

    first = almost_route(g, R, demand, cfg=cfg)
    total = first.flow.copy()
    iterations, scalings = first.iterations, first.scalings
    per_round = [first.iterations]
    scale = float(np.abs(demand).sum())
    residual_cfg = cfg.with_epsilon(cfg.residual_epsilon)
    rounds = cfg.rounds_for(g.m)
    done = 0
    for i in range(rounds):
        residual = _centered(demand - divergence(g, total))
        size = float(np.abs(residual).sum())
        if size <= 1e-14 * scale:
            break
        logger.debug(f"residual round {i + 1}/{rounds}, residual norm {size:.3e}")
        result = almost_route(g, R, residual, cfg=residual_cfg)
        total += result.flow
        iterations += result.iterations
        per_round.append(result.iterations)
        scalings += result.scalings
        done += 1
    tree = TreeRouting.from_edges(g, maximal_spanning_tree(g))
    total += tree_flow(g, tree, _centered(demand - divergence(g, total)))

    cut = threshold_cut(g, demand, first.potentials)
    primal = max_congestion(g, total)
    solution = FlowSolution(
        flow=total,
        cut=cut,
        primal=primal,
        dual=cut.ratio,
        gap=primal / cut.ratio,
        epsilon=cfg.epsilon,
        alpha=first.alpha,
        iterations=iterations,
        scalings=scalings,
        rounds=done,
        round_iterations=per_round,
        certificate_ratio=first.certificate_ratio,
        slack_ratio=first.slack_ratio,
    )
    logger.info(
        f"routed demand: primal {primal:.6g}, dual {cut.ratio:.6g}, "
        f"gap {solution.gap:.6g}, {iterations} iterations"
    )
    if not solution.within_tolerance:
        logger.warning(
            f"gap {solution.gap:.6g} exceeds 1 + epsilon = {1 + cfg.epsilon:.6g}"
        )
    return solution


def st_max_flow(
    g: Graph,
    s: int,
    t: int,
    eps: Optional[float] = None,
    R: Optional[CongestionApproximator] = None,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[float, EdgeVector, Cut]:
    """Approximate maximum s–t flow through min-congestion routing.

    The smallest congestion of a unit s–t flow is one over the max flow, so
    the routed unit flow divided by its congestion is a feasible flow.

    Args:
        g (Graph): The graph.
        s (int): Source.
        t (int): Sink.
        eps (Optional[float]): Accuracy.
        R (Optional[CongestionApproximator]): Approximator, a forest
            hierarchy when None.
        cfg (Optional[SolverConfig]): Solver constants.

    Raises:
        ValueError: If s equals t.

    Returns:
        Tuple[float, EdgeVector, Cut]: Flow value, a flow with every
        |f_e| ≤ c_e, and a cut whose capacity bounds the max flow.
    """
    b = unit_demand(g.n, s, t)
    if R is None:
        R = make_approximator(g, ApproximatorKind.HIERARCHY)
    solution = route(g, R, b, eps=eps, cfg=cfg)
    return 1.0 / solution.primal, solution.flow / solution.primal, solution.cut
