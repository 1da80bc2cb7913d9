import logging
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic.dataclasses import dataclass

from congestion_flow.exceptions import CongestionFlowError
from congestion_flow.graph import Graph, cut_quantities, divergence, max_congestion
from congestion_flow.solver import FlowSolution
from congestion_flow.types import Record, VectorLike, VertexSet
from congestion_flow.utils import as_vector, relative_error

logger = logging.getLogger("congestion_flow")

CONSERVATION_TOLERANCE = 1e-9
RECOMPUTE_TOLERANCE = 1e-9


@dataclass
class Check:
    """Outcome of one certificate check.

    Arguments:
        name (str) -- Check identifier.
        passed (bool) -- Whether the check holds.
        value (Optional[float]) -- Measured quantity, when there is one.
        detail (str) -- Human readable explanation.
    """

    name: str
    passed: bool
    value: Optional[float] = None
    detail: str = ""

    def dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "detail": self.detail,
        }


@dataclass
class CertificateReport:
    """Every check run against a flow and cut, recomputed from scratch.

    Arguments:
        checks (List[Check]) -- Individual outcomes, in evaluation order.
        primal (Optional[float]) -- Recomputed max congestion.
        dual (Optional[float]) -- Recomputed |b_S| / c_S of the cut.
    """

    checks: List[Check]
    primal: Optional[float] = None
    dual: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def gap(self) -> Optional[float]:
        if self.primal is None or not self.dual:
            return None
        return self.primal / self.dual

    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "checks": [check.dict() for check in self.checks],
        }


def certify_flow(
    g: Graph,
    b: VectorLike,
    flow: VectorLike,
    side: VertexSet,
    epsilon: Optional[float] = None,
    claimed_primal: Optional[float] = None,
    claimed_dual: Optional[float] = None,
) -> CertificateReport:
    """Check a flow and a cut against demands `b`.

    Never raises on bad input data; every problem becomes a failed check.

    Args:
        g (Graph): The graph.
        b (VectorLike): Demands.
        flow (VectorLike): Flow per edge.
        side (VertexSet): Vertices of the cut side S.
        epsilon (Optional[float]): When given, the gap must be at most 1 + ε.
        claimed_primal (Optional[float]): Reported congestion to compare with.
        claimed_dual (Optional[float]): Reported cut ratio to compare with.
    """
    checks: List[Check] = []
    demand = as_vector(b, g.n, "demand")
    try:
        f = as_vector(flow, g.m, "flow")
    except CongestionFlowError as e:
        failure = Check(name="flow_shape", passed=False, detail=str(e))
        return CertificateReport(checks=[failure])

    error = float(np.max(np.abs(divergence(g, f) - demand), initial=0.0))
    largest = float(np.max(np.abs(demand), initial=0.0))
    bound = CONSERVATION_TOLERANCE * max(1.0, largest)
    checks.append(
        Check(
            name="conservation",
            passed=error <= bound,
            value=error,
            detail=f"max |Bf - b| = {error:.3e}, allowed {bound:.3e}",
        )
    )

    primal = max_congestion(g, f)
    if claimed_primal is not None:
        checks.append(
            Check(
                name="primal",
                passed=relative_error(primal, claimed_primal) <= RECOMPUTE_TOLERANCE,
                value=primal,
                detail=f"recomputed {primal:.12g}, reported {claimed_primal:.12g}",
            )
        )

    try:
        cut = cut_quantities(g, demand, side)
    except (CongestionFlowError, IndexError, ValueError) as e:
        checks.append(Check(name="cut", passed=False, detail=str(e)))
        return CertificateReport(checks=checks, primal=primal)
    dual = abs(cut.b_S) / cut.c_S
    checks.append(
        Check(
            name="cut",
            passed=True,
            value=cut.c_S,
            detail=f"|S| = {cut.side.size}, b_S = {cut.b_S:.6g}, c_S = {cut.c_S:.6g}",
        )
    )
    if claimed_dual is not None:
        checks.append(
            Check(
                name="dual",
                passed=relative_error(dual, claimed_dual) <= RECOMPUTE_TOLERANCE,
                value=dual,
                detail=f"recomputed {dual:.12g}, reported {claimed_dual:.12g}",
            )
        )

    if dual > 0:
        gap = primal / dual
        checks.append(
            Check(
                name="weak_duality",
                passed=gap >= 1 - 1e-9,
                value=gap,
                detail=f"primal / dual = {gap:.12g}",
            )
        )
        if epsilon is not None:
            checks.append(
                Check(
                    name="gap",
                    passed=gap <= 1 + epsilon + 1e-9,
                    value=gap,
                    detail=f"gap {gap:.6g}, allowed {1 + epsilon:.6g}",
                )
            )
    else:
        checks.append(
            Check(name="weak_duality", passed=False, detail="cut separates no demand")
        )

    report = CertificateReport(checks=checks, primal=primal, dual=dual)
    if not report.passed:
        logger.warning(f"certificate failed: {', '.join(report.failures())}")
    return report


def certify(g: Graph, b: VectorLike, solution: FlowSolution) -> CertificateReport:
    """Recompute a solver result and check every invariant it claims."""
    return certify_flow(
        g,
        b,
        solution.flow,
        solution.cut.side,
        epsilon=solution.epsilon,
        claimed_primal=solution.primal,
        claimed_dual=solution.dual,
    )


def certify_record(g: Graph, b: VectorLike, record: Record) -> CertificateReport:
    """Check a solution read back from JSON (see `SolutionRecord`)."""
    try:
        flow = record["flow"]
        side = record["cut"]["side"]
    except (KeyError, TypeError) as e:
        return CertificateReport(
            checks=[Check(name="record", passed=False, detail=f"missing field {e}")]
        )
    return certify_flow(
        g,
        b,
        flow,
        side,
        epsilon=record.get("epsilon"),
        claimed_primal=record.get("primal"),
        claimed_dual=record.get("dual"),
    )
