"""Command line front end: `solve`, `certify`, `gen`, `bench` and `build`.

Vertex ids on the command line are 1-indexed, like the file formats.

Exit codes:
    0 -- success, and the certified gap is within 1 + ε.
    1 -- the gap exceeds 1 + ε, or a certificate check failed.
    2 -- unreadable or malformed input.
    3 -- the descent ran out of iterations or broke its guarantee.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from congestion_flow import __version__
from congestion_flow.approximators import CongestionApproximator, make_approximator
from congestion_flow.certify import certify_flow, certify_record
from congestion_flow.exceptions import (
    CongestionFlowError,
    DescentError,
    IterationBudgetError,
    SolverError,
)
from congestion_flow.flow_io import FlowIO
from congestion_flow.generators import generate
from congestion_flow.graph import Graph, max_congestion
from congestion_flow.hierarchy import HierarchyApproximator, HierarchyConfig
from congestion_flow.oracle import exact_opt_congestion
from congestion_flow.schema import (
    ApproximatorInfo,
    BenchRow,
    InstanceInfo,
    RunReport,
    SolutionRecord,
    utc_timestamp,
)
from congestion_flow.solver import SolverConfig, route
from congestion_flow.types import ApproximatorKind, DemandVector, SolveMethod
from congestion_flow.utils import random_demand, unit_demand

logger = logging.getLogger("congestion_flow")

EXIT_OK = 0
EXIT_GAP = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

BENCH_EPSILONS = (0.5, 0.2, 0.1, 0.05)

# Single-argument families take `n`, the others `k`
_SIZE_PARAM = {
    "path": "n",
    "cycle": "n",
    "complete": "n",
    "gnp": "n",
    "grid": "k",
    "barbell": "k",
}


class Problem:
    """A graph with the demand to route and where both came from."""

    def __init__(
        self,
        graph: Graph,
        demand: DemandVector,
        info: InstanceInfo,
    ) -> None:
        self.graph = graph
        self.demand = demand
        self.info = info

    @property
    def is_st(self) -> bool:
        return self.info.source is not None


def _vertex_arg(value: Optional[int], n: int, flag: str) -> Optional[int]:
    if value is None:
        return None
    if not 1 <= value <= n:
        raise ValueError(f"{flag} {value} is not a vertex of a graph with n={n}")
    return value - 1


def load_problem(args: argparse.Namespace, io: Optional[FlowIO] = None) -> Problem:
    """Read the graph and build the demand from `--demands` or `--s`/`--t`.

    DIMACS files may name the source and sink themselves; the flags win.
    """
    io = io or FlowIO()
    instance = io.read_instance(args.graph)
    g = instance.graph
    source = _vertex_arg(args.source, g.n, "--s")
    sink = _vertex_arg(args.sink, g.n, "--t")
    if source is None:
        source = instance.source
    if sink is None:
        sink = instance.sink
    demands = getattr(args, "demands", None)
    info = InstanceInfo(
        n=g.n, m=g.m, graph=str(args.graph), seed=getattr(args, "seed", 0)
    )
    if demands is not None:
        info.demands = str(demands)
        return Problem(g, io.read_demands(demands, g.n), info)
    if source is None or sink is None:
        raise ValueError("give either --demands or both --s and --t")
    info.source, info.sink = source, sink
    return Problem(g, unit_demand(g.n, source, sink), info)


def _approximator(
    args: argparse.Namespace, g: Graph, kind: Optional[ApproximatorKind] = None
) -> CongestionApproximator:
    hierarchy = getattr(args, "hierarchy", None)
    if hierarchy is not None:
        return FlowIO().read_hierarchy(hierarchy, g)
    return make_approximator(
        g,
        kind or ApproximatorKind(args.approx),
        alpha=args.alpha,
        t=args.branching,
        seed=args.seed,
    )


def _approximator_info(
    kind: str, R: Optional[CongestionApproximator], seconds: float
) -> ApproximatorInfo:
    if R is None:
        return ApproximatorInfo(kind="exact", build_seconds=seconds)
    return ApproximatorInfo(
        kind=kind,
        rows=R.rows,
        alpha_claimed=R.alpha_claimed,
        alpha_measured=getattr(R, "alpha_measured", None),
        build_seconds=seconds,
    )


def _solve_exact(
    problem: Problem, config: SolverConfig
) -> Tuple[SolutionRecord, RunReport]:
    g, b = problem.graph, problem.demand
    start = time.perf_counter()
    result = exact_opt_congestion(g, b)
    elapsed = time.perf_counter() - start
    if result.witness_cut is None:
        raise ValueError("demand is zero, nothing to route")
    primal = max_congestion(g, result.witness_flow)
    dual = result.witness_cut.ratio
    value = 1.0 / primal if problem.is_st else None
    record = SolutionRecord(
        n=g.n,
        method="exact",
        flow=result.witness_flow.tolist(),
        side=result.witness_cut.side.tolist(),
        primal=primal,
        dual=dual,
        epsilon=config.epsilon,
        config=config.dict(),
        value=value,
        created=utc_timestamp(),
    )
    report = RunReport(
        instance=problem.info,
        approximator=_approximator_info("exact", None, 0.0),
        config=config.dict(),
        primal=primal,
        dual=dual,
        solve_seconds=elapsed,
        value=value,
    )
    return record, report


def _solve_descent(
    args: argparse.Namespace, problem: Problem, config: SolverConfig
) -> Tuple[SolutionRecord, RunReport]:
    g, b = problem.graph, problem.demand
    start = time.perf_counter()
    R = _approximator(args, g)
    built = time.perf_counter()
    solution = route(g, R, b, cfg=config)
    elapsed = time.perf_counter() - built
    value = 1.0 / solution.primal if problem.is_st else None
    record = SolutionRecord.from_solution(solution, config, value=value)
    kind = "hierarchy" if isinstance(R, HierarchyApproximator) else args.approx
    report = RunReport(
        instance=problem.info,
        approximator=_approximator_info(kind, R, built - start),
        config=config.dict(),
        primal=solution.primal,
        dual=solution.dual,
        iterations=solution.iterations,
        rounds=solution.rounds,
        round_iterations=solution.round_iterations,
        solve_seconds=elapsed,
        value=value,
    )
    return record, report


def cmd_solve(args: argparse.Namespace) -> int:
    """Route the demand, write the solution and print the run report."""
    io = FlowIO()
    problem = load_problem(args, io)
    config = SolverConfig(epsilon=args.eps, alpha=args.alpha)
    if SolveMethod(args.method) is SolveMethod.EXACT:
        record, report = _solve_exact(problem, config)
    else:
        record, report = _solve_descent(args, problem, config)

    certificate = certify_flow(
        problem.graph,
        problem.demand,
        record.flow,
        record.side,
        epsilon=config.epsilon,
        claimed_primal=record.primal,
        claimed_dual=record.dual,
    )
    report.attach_certificate(certificate)
    if args.out is not None:
        io.write_json(args.out, record.dict())
    if args.report is not None:
        io.write_json(args.report, report.dict())
    print(json.dumps(report.dict(), indent=2))
    if not certificate.passed:
        logger.warning(f"solution failed checks: {certificate.failures()}")
        return EXIT_GAP
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    """Re-check a solution file against its graph and demands."""
    io = FlowIO()
    problem = load_problem(args, io)
    record = io.read_json(args.solution)
    report = certify_record(problem.graph, problem.demand, record)
    print(json.dumps(report.dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_GAP


def cmd_gen(args: argparse.Namespace) -> int:
    """Write a generated instance."""
    params: Dict[str, object] = {
        _SIZE_PARAM[args.kind]: args.size,
        "capacities": args.capacities,
    }
    if args.p is not None:
        params["p"] = args.p
    if args.connect:
        params["connect"] = True
    if args.path is not None:
        params["path"] = args.path
    g = generate(args.kind, params, seed=args.seed)
    FlowIO().write_graph(args.out, g)
    logger.info(f"wrote {args.kind} graph with n={g.n}, m={g.m} to {args.out}")
    return EXIT_OK


def _bench_demand(args: argparse.Namespace, io: FlowIO) -> Tuple[Graph, DemandVector]:
    if args.demands is not None or args.source is not None:
        problem = load_problem(args, io)
        return problem.graph, problem.demand
    instance = io.read_instance(args.graph)
    g = instance.graph
    if instance.source is not None and instance.sink is not None:
        return g, unit_demand(g.n, instance.source, instance.sink)
    return g, random_demand(g.n, np.random.default_rng(args.seed))


def bench_rows(
    g: Graph,
    b: DemandVector,
    name: str,
    epsilons: Sequence[float] = BENCH_EPSILONS,
    kinds: Sequence[str] = ("degree", "tree", "hierarchy"),
    alpha: Optional[float] = None,
    branching: Optional[int] = None,
    seed: int = 0,
) -> List[BenchRow]:
    """One `BenchRow` per (ε, approximator); each approximator is built once."""
    rows = []
    for kind in kinds:
        start = time.perf_counter()
        R = make_approximator(
            g, ApproximatorKind(kind), alpha=alpha, t=branching, seed=seed
        )
        build_seconds = time.perf_counter() - start
        for eps in epsilons:
            config = SolverConfig(epsilon=eps)
            primal = dual = float("nan")
            iterations = rounds = 0
            start = time.perf_counter()
            try:
                solution = route(g, R, b, cfg=config)
            except IterationBudgetError:
                status = "budget"
            except DescentError:
                status = "descent"
            else:
                status = "ok" if solution.within_tolerance else "gap"
                primal, dual = solution.primal, solution.dual
                iterations, rounds = solution.iterations, solution.rounds
            rows.append(
                BenchRow(
                    instance=name,
                    n=g.n,
                    m=g.m,
                    epsilon=eps,
                    approximator=kind,
                    alpha=R.alpha_claimed,
                    rows=R.rows,
                    iterations=iterations,
                    rounds=rounds,
                    primal=primal,
                    dual=dual,
                    gap=primal / dual,
                    build_seconds=build_seconds,
                    solve_seconds=time.perf_counter() - start,
                    status=status,
                )
            )
            logger.info(f"bench {kind} eps={eps}: {status}, {iterations} iterations")
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    """Sweep ε and approximators; write a CSV or JSON table."""
    io = FlowIO()
    g, b = _bench_demand(args, io)
    rows = bench_rows(
        g,
        b,
        Path(args.graph).name,
        epsilons=args.eps,
        kinds=args.approx,
        alpha=args.alpha,
        branching=args.branching,
        seed=args.seed,
    )
    df = pd.DataFrame([row.dict() for row in rows])
    if args.out is None:
        print(df.to_string(index=False))
    elif Path(args.out).suffix.lower() == ".json":
        io.write_text(args.out, df.to_json(orient="records", indent=2) + "\n")
    else:
        io.write_text(args.out, df.to_csv(index=False))
    return EXIT_OK


def cmd_build(args: argparse.Namespace) -> int:
    """Build a forest hierarchy and save it for later `--hierarchy` runs."""
    io = FlowIO()
    g = io.read_graph(args.graph)
    config = HierarchyConfig(t=args.branching, seed=args.seed)
    R = HierarchyApproximator.build(g, config, alpha=args.alpha)
    io.write_hierarchy(args.out, R)
    logger.info(
        f"wrote hierarchy with {R.rows} rows, depth {R.hierarchy.depth}, "
        f"alpha {R.alpha_claimed:.4g} to {args.out}"
    )
    return EXIT_OK


def _add_endpoints(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--graph", required=True, help="Edge list or DIMACS file")
    parser.add_argument("--demands", help="Demand file, `vertex value` per line")
    parser.add_argument("--s", "--source", dest="source", type=int, help="Source")
    parser.add_argument("--t", "--sink", dest="sink", type=int, help="Sink")


def _add_approximator(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--alpha", type=float, help="Override of the approximator's claimed alpha"
    )
    parser.add_argument(
        "--branching", type=int, help="Hierarchy branching, ceil(sqrt(n)) if unset"
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
        help="Logging level (default warning)",
    )

    parser = argparse.ArgumentParser(
        prog="congestion-flow",
        description="Approximate minimum-congestion and maximum flows with "
        "certifying cuts.",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="Route a demand")
    _add_endpoints(solve)
    _add_approximator(solve)
    solve.add_argument("--eps", type=float, default=0.1, help="Accuracy (default 0.1)")
    solve.add_argument(
        "--approx",
        default="hierarchy",
        choices=[kind.value for kind in ApproximatorKind],
        help="Congestion approximator (default hierarchy)",
    )
    solve.add_argument("--hierarchy", help="Prebuilt hierarchy file, see `build`")
    solve.add_argument(
        "--method",
        default=SolveMethod.SHERMAN.value,
        choices=[method.value for method in SolveMethod] + ["gradient"],
        help="sherman (softmax descent, alias gradient) or exact (max flow oracle)",
    )
    solve.add_argument("--out", help="Solution JSON file")
    solve.add_argument("--report", help="Run report JSON file")
    solve.set_defaults(func=cmd_solve)

    check = commands.add_parser(
        "certify", parents=[common], help="Check a solution file"
    )
    _add_endpoints(check)
    check.add_argument("--solution", required=True, help="Solution JSON file")
    check.set_defaults(func=cmd_certify)

    gen = commands.add_parser("gen", parents=[common], help="Generate an instance")
    gen.add_argument("kind", choices=sorted(_SIZE_PARAM))
    gen.add_argument("size", type=int, help="n, or k for grid (k x k) and barbell")
    gen.add_argument("--p", type=float, help="Edge probability of gnp")
    gen.add_argument("--connect", action="store_true", help="Chain gnp components")
    gen.add_argument("--path", type=int, help="Barbell bridge path length")
    gen.add_argument(
        "--capacities",
        default="unit",
        choices=["unit", "uniform", "exponential"],
        help="Capacity law (default unit)",
    )
    gen.add_argument("--seed", type=int, default=0, help="Seed (default 0)")
    gen.add_argument("--out", required=True, help="Output graph file")
    gen.set_defaults(func=cmd_gen)

    bench = commands.add_parser(
        "bench", parents=[common], help="Sweep accuracies and approximators"
    )
    bench.add_argument("--graph", required=True, help="Edge list or DIMACS file")
    bench.add_argument("--demands", help="Demand file; random demand if unset")
    bench.add_argument("--s", "--source", dest="source", type=int, help="Source")
    bench.add_argument("--t", "--sink", dest="sink", type=int, help="Sink")
    _add_approximator(bench)
    bench.add_argument(
        "--eps",
        type=float,
        nargs="+",
        default=list(BENCH_EPSILONS),
        help="Accuracies (default 0.5 0.2 0.1 0.05)",
    )
    bench.add_argument(
        "--approx",
        nargs="+",
        default=[kind.value for kind in ApproximatorKind],
        choices=[kind.value for kind in ApproximatorKind],
        help="Approximators (default all)",
    )
    bench.add_argument("--out", help="CSV or JSON table, by suffix")
    bench.set_defaults(func=cmd_bench)

    build = commands.add_parser(
        "build", parents=[common], help="Build and save a forest hierarchy"
    )
    build.add_argument("--graph", required=True, help="Edge list or DIMACS file")
    _add_approximator(build)
    build.add_argument("--out", required=True, help="Hierarchy JSON file")
    build.set_defaults(func=cmd_build)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    command: Callable[[argparse.Namespace], int] = args.func
    try:
        return command(args)
    except SolverError as e:
        logger.error(str(e))
        return EXIT_SOLVER
    except (CongestionFlowError, ValueError, OSError) as e:
        logger.error(str(e))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
