"""JSON records written by the command line: solutions, run reports, bench rows."""
import logging
from dataclasses import field
from datetime import datetime as datetime_
from datetime import timezone
from typing import Any, Dict, List, Literal, Optional

from pydantic import validator
from pydantic.dataclasses import dataclass

from congestion_flow.certify import CertificateReport
from congestion_flow.solver import FlowSolution, SolverConfig
from congestion_flow.utils import merge_records

logger = logging.getLogger("congestion_flow")

SCHEMA_VERSION = 1


def utc_timestamp(dt: Optional[datetime_] = None) -> str:
    """UTC ISO format with a trailing Z, the current time when `dt` is None."""
    dt = (dt or datetime_.now(timezone.utc)).astimezone(timezone.utc)
    dt = dt.replace(tzinfo=None, microsecond=0)
    return f'{dt.isoformat("T")}Z'


@dataclass
class InstanceInfo:
    """Where an instance came from.

    Arguments:
        n (int) -- Vertices.
        m (int) -- Edges.
        graph (Optional[str]) -- Graph file, None for generated instances.
        demands (Optional[str]) -- Demand file, if any.
        source (Optional[int]) -- 0-indexed source of an s–t run.
        sink (Optional[int]) -- 0-indexed sink of an s–t run.
        seed (int) -- Seed of the run.
    """

    n: int
    m: int
    graph: Optional[str] = None
    demands: Optional[str] = None
    source: Optional[int] = None
    sink: Optional[int] = None
    seed: int = 0

    def dict(self) -> Dict[str, Any]:
        return {
            "instance": {
                "n": self.n,
                "m": self.m,
                "graph": self.graph,
                "demands": self.demands,
                "source": self.source,
                "sink": self.sink,
                "seed": self.seed,
            }
        }


@dataclass
class ApproximatorInfo:
    """The approximator a run used.

    Arguments:
        kind (str) -- degree, tree or hierarchy.
        rows (int) -- Rows of R.
        alpha_claimed (float) -- α given to the descent.
        alpha_measured (Optional[float]) -- Estimate behind the claim.
        build_seconds (float) -- Wall time of the build.
    """

    kind: Literal["degree", "tree", "hierarchy", "exact"]
    rows: int = 0
    alpha_claimed: float = 1.0
    alpha_measured: Optional[float] = None
    build_seconds: float = 0.0

    def dict(self) -> Dict[str, Any]:
        return {
            "approximator": {
                "kind": self.kind,
                "rows": self.rows,
                "alpha_claimed": self.alpha_claimed,
                "alpha_measured": self.alpha_measured,
                "build_seconds": self.build_seconds,
            }
        }


@dataclass
class SolutionRecord:
    """Solution file contents: the flow, the cut and the numbers tying them.

    Everything but `created` is a function of the inputs and the seed.

    Arguments:
        n (int) -- Vertices.
        method (str) -- "sherman" (softmax descent) or "exact".
        flow (List[float]) -- Flow per edge.
        side (List[int]) -- 0-indexed cut side S.
        primal (float) -- Max congestion of the flow.
        dual (float) -- Cut ratio.
        epsilon (float) -- Requested accuracy.
        config (Dict[str, Any]) -- Solver configuration echo.
        value (Optional[float]) -- Flow value for s–t runs.
        created (str) -- UTC timestamp.
    """

    n: int
    method: Literal["sherman", "exact"]
    flow: List[float]
    side: List[int]
    primal: float
    dual: float
    epsilon: float
    config: Dict[str, Any]
    value: Optional[float] = None
    created: str = ""

    @validator("side")
    def _check_side(cls, side: List[int], values: Dict[str, Any]) -> List[int]:
        n = values.get("n")
        if n is not None and not 0 < len(set(side)) < n:
            raise ValueError(f"cut side must be nonempty and proper, got {len(side)}")
        return sorted(set(side))

    @property
    def gap(self) -> float:
        return self.primal / self.dual if self.dual else float("inf")

    @classmethod
    def from_solution(
        cls,
        solution: FlowSolution,
        config: SolverConfig,
        value: Optional[float] = None,
    ) -> "SolutionRecord":
        return cls(
            n=solution.cut.n,
            method="sherman",
            flow=[float(x) for x in solution.flow],
            side=[int(v) for v in solution.cut.side],
            primal=solution.primal,
            dual=solution.dual,
            epsilon=solution.epsilon,
            config=config.dict(),
            value=value,
            created=utc_timestamp(),
        )

    def dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "schema": SCHEMA_VERSION,
            "created": self.created or utc_timestamp(),
            "method": self.method,
            "flow": self.flow,
            "cut": {"side": self.side},
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "epsilon": self.epsilon,
            "config": self.config,
        }
        if self.value is not None:
            out["value"] = self.value
        return out


@dataclass
class RunReport:
    """Summary of one solve: instance, approximator, result and timings.

    Arguments:
        instance (InstanceInfo) -- Instance metadata.
        approximator (ApproximatorInfo) -- Approximator metadata.
        config (Dict[str, Any]) -- Solver configuration echo.
        primal (float) -- Max congestion.
        dual (float) -- Cut ratio.
        iterations (int) -- Descent steps over all rounds.
        rounds (int) -- Residual rounds.
        round_iterations (List[int]) -- Descent steps per round, the first
            round first.
        solve_seconds (float) -- Wall time of the solve.
        certified (Optional[bool]) -- Outcome of the certificate checks.
        value (Optional[float]) -- Flow value for s–t runs.
    """

    instance: InstanceInfo
    approximator: ApproximatorInfo
    config: Dict[str, Any]
    primal: float
    dual: float
    iterations: int = 0
    rounds: int = 0
    round_iterations: List[int] = field(default_factory=list)
    solve_seconds: float = 0.0
    certified: Optional[bool] = None
    value: Optional[float] = None

    @property
    def gap(self) -> float:
        return self.primal / self.dual if self.dual else float("inf")

    def attach_certificate(self, report: CertificateReport) -> None:
        self.certified = report.passed

    def dict(self) -> Dict[str, Any]:
        out = merge_records([self.instance, self.approximator])
        out.update(
            {
                "schema": SCHEMA_VERSION,
                "created": utc_timestamp(),
                "config": self.config,
                "primal": self.primal,
                "dual": self.dual,
                "gap": self.gap,
                "value": self.value,
                "iterations": self.iterations,
                "rounds": self.rounds,
                "round_iterations": list(self.round_iterations),
                "solve_seconds": self.solve_seconds,
                "certified": self.certified,
            }
        )
        return out


@dataclass
class BenchRow:
    """One benchmark measurement for an (ε, approximator) pair."""

    instance: str
    n: int
    m: int
    epsilon: float
    approximator: str
    alpha: float
    rows: int
    iterations: int
    rounds: int
    primal: float
    dual: float
    gap: float
    build_seconds: float
    solve_seconds: float
    status: Literal["ok", "gap", "budget", "descent"] = "ok"

    def dict(self) -> Dict[str, Any]:
        return {
            "instance": self.instance,
            "n": self.n,
            "m": self.m,
            "epsilon": self.epsilon,
            "approximator": self.approximator,
            "alpha": self.alpha,
            "rows": self.rows,
            "iterations": self.iterations,
            "rounds": self.rounds,
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "build_seconds": self.build_seconds,
            "solve_seconds": self.solve_seconds,
            "status": self.status,
        }
