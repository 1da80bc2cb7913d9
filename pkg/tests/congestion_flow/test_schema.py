from datetime import datetime, timedelta, timezone

import pytest

from congestion_flow.approximators import build_tree_approximator
from congestion_flow.certify import CertificateReport, Check
from congestion_flow.graph import Graph
from congestion_flow.schema import (
    SCHEMA_VERSION,
    ApproximatorInfo,
    BenchRow,
    InstanceInfo,
    RunReport,
    SolutionRecord,
    utc_timestamp,
)
from congestion_flow.solver import SolverConfig, route
from congestion_flow.utils import unit_demand


@pytest.fixture
def record() -> SolutionRecord:
    return SolutionRecord(
        n=3,
        method="sherman",
        flow=[1.0, 1.0],
        side=[2, 2],
        primal=1.0,
        dual=0.8,
        epsilon=0.5,
        config=SolverConfig(epsilon=0.5).dict(),
        created="2023-01-02T03:04:05Z",
    )


def test_utc_timestamp():
    dt = datetime(2023, 1, 2, 3, 4, 5, 678, tzinfo=timezone.utc)
    assert utc_timestamp(dt) == "2023-01-02T03:04:05Z"
    shifted = datetime(2023, 1, 2, 5, 4, 5, tzinfo=timezone(timedelta(hours=2)))
    assert utc_timestamp(shifted) == "2023-01-02T03:04:05Z"
    assert utc_timestamp().endswith("Z")


class TestSolutionRecord:
    def test_dict(self, record: SolutionRecord):
        out = record.dict()
        assert out["schema"] == SCHEMA_VERSION
        assert out["created"] == "2023-01-02T03:04:05Z"
        assert out["cut"] == {"side": [2]}
        assert out["gap"] == pytest.approx(1.25)
        assert out["config"]["epsilon"] == 0.5
        assert "value" not in out

    @pytest.mark.parametrize("side", [[], [0, 1, 2]])
    def test_improper_side(self, side):
        with pytest.raises(ValueError):
            SolutionRecord(
                n=3,
                method="exact",
                flow=[1.0, 1.0],
                side=side,
                primal=1.0,
                dual=1.0,
                epsilon=0.1,
                config={},
            )

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            SolutionRecord(
                n=3,
                method="simplex",
                flow=[],
                side=[0],
                primal=1.0,
                dual=1.0,
                epsilon=0.1,
                config={},
            )

    def test_from_solution(self):
        g = Graph.from_edges(3, [(0, 1, 2.0), (1, 2, 2.0)])
        cfg = SolverConfig(epsilon=0.5)
        solution = route(g, build_tree_approximator(g), unit_demand(3, 0, 2), cfg=cfg)
        value = 1.0 / solution.primal
        record = SolutionRecord.from_solution(solution, cfg, value)
        assert record.method == "sherman"
        assert record.value == pytest.approx(2.0)
        assert record.primal == pytest.approx(0.5)
        assert record.flow == pytest.approx([1.0, 1.0])
        assert record.side == solution.cut.side.tolist()
        assert record.created.endswith("Z")
        assert record.dict()["value"] == pytest.approx(2.0)


class TestRunReport:
    def test_dict(self):
        report = RunReport(
            instance=InstanceInfo(n=3, m=2, graph="path3.txt", source=0, sink=2),
            approximator=ApproximatorInfo(kind="tree", rows=2, alpha_claimed=2.0),
            config=SolverConfig().dict(),
            primal=1.0,
            dual=1.0,
            iterations=12,
            rounds=1,
            round_iterations=[10, 2],
        )
        report.attach_certificate(
            CertificateReport(checks=[Check(name="conservation", passed=True)])
        )
        out = report.dict()
        assert out["instance"]["graph"] == "path3.txt"
        assert out["instance"]["sink"] == 2
        assert out["approximator"]["kind"] == "tree"
        assert out["certified"] is True
        assert out["gap"] == 1.0
        assert out["round_iterations"] == [10, 2]
        assert out["schema"] == SCHEMA_VERSION

    def test_zero_dual(self):
        report = RunReport(
            instance=InstanceInfo(n=2, m=1),
            approximator=ApproximatorInfo(kind="exact"),
            config={},
            primal=0.0,
            dual=0.0,
        )
        assert report.gap == float("inf")


def test_bench_row():
    row = BenchRow(
        instance="path3",
        n=3,
        m=2,
        epsilon=0.5,
        approximator="degree",
        alpha=2.0,
        rows=3,
        iterations=40,
        rounds=1,
        primal=1.0,
        dual=1.0,
        gap=1.0,
        build_seconds=0.01,
        solve_seconds=0.2,
    )
    assert row.dict()["status"] == "ok"
    assert list(row.dict())[:3] == ["instance", "n", "m"]
    with pytest.raises(ValueError):
        BenchRow(**{**row.dict(), "status": "crashed"})
