import numpy as np
import pytest

from congestion_flow.approximators import build_tree_approximator
from congestion_flow.certify import Check, certify, certify_flow, certify_record
from congestion_flow.graph import Graph
from congestion_flow.solver import route
from congestion_flow.utils import unit_demand


@pytest.fixture
def path3() -> Graph:
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def two_paths() -> Graph:
    return Graph.from_edges(
        4, [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 2.0), (2, 3, 2.0)]
    )


def _names(report):
    return [check.name for check in report.checks]


class TestCertifyFlow:
    def test_optimal_pair(self, two_paths: Graph):
        b = unit_demand(4, 0, 3)
        # One third on the thin path, two thirds on the wide one
        flow = [1 / 3, 1 / 3, 2 / 3, 2 / 3]
        report = certify_flow(two_paths, b, flow, [3], epsilon=0.1)
        assert report.passed
        assert _names(report) == ["conservation", "cut", "weak_duality", "gap"]
        assert report.primal == pytest.approx(1 / 3)
        assert report.dual == pytest.approx(1 / 3)
        assert report.gap == pytest.approx(1.0)

    def test_gap_too_large(self, two_paths: Graph):
        b = unit_demand(4, 0, 3)
        report = certify_flow(two_paths, b, [1.0, 1.0, 0.0, 0.0], [3], epsilon=0.1)
        assert not report.passed
        assert report.failures() == ["gap"]
        assert report.gap == pytest.approx(3.0)

    def test_conservation(self, path3: Graph):
        report = certify_flow(path3, unit_demand(3, 0, 2), [1.0, 0.0], [2])
        assert report.failures() == ["conservation"]
        assert report.checks[0].value == pytest.approx(1.0)

    def test_flow_shape(self, path3: Graph):
        report = certify_flow(path3, unit_demand(3, 0, 2), [1.0, 1.0, 1.0], [2])
        assert report.failures() == ["flow_shape"]
        assert report.primal is None
        assert report.gap is None

    @pytest.mark.parametrize("side", [[], [0, 1, 2], [7], [-1]])
    def test_bad_cut(self, path3: Graph, side):
        report = certify_flow(path3, unit_demand(3, 0, 2), [1.0, 1.0], side)
        assert "cut" in report.failures()
        assert report.primal == pytest.approx(1.0)
        assert report.dual is None

    def test_cut_without_demand(self, path3: Graph):
        report = certify_flow(path3, unit_demand(3, 0, 2), [1.0, 1.0], [0, 2])
        assert report.failures() == ["weak_duality"]

    def test_claims(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        report = certify_flow(
            path3, b, [1.0, 1.0], [2], claimed_primal=0.5, claimed_dual=1.0
        )
        assert report.failures() == ["primal"]

    def test_dict(self, path3: Graph):
        report = certify_flow(path3, unit_demand(3, 0, 2), [1.0, 1.0], [2])
        record = report.dict()
        assert record["passed"] is True
        assert record["gap"] == pytest.approx(1.0)
        assert record["checks"][0]["name"] == "conservation"


class TestCertifySolution:
    def test_route(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        solution = route(path3, build_tree_approximator(path3), b, eps=0.5)
        report = certify(path3, b, solution)
        assert report.passed
        assert "primal" in _names(report) and "dual" in _names(report)

    def test_record(self, path3: Graph):
        record = {
            "flow": [1.0, 1.0],
            "cut": {"side": [2]},
            "primal": 1.0,
            "dual": 1.0,
            "epsilon": 0.1,
        }
        assert certify_record(path3, unit_demand(3, 0, 2), record).passed

    @pytest.mark.parametrize("record", [{"cut": {"side": [2]}}, {"flow": [1.0, 1.0]}])
    def test_record_missing_fields(self, path3: Graph, record):
        report = certify_record(path3, unit_demand(3, 0, 2), record)
        assert report.failures() == ["record"]
        assert "missing field" in report.checks[0].detail


def test_check_dict():
    check = Check(name="cut", passed=True, value=2.0)
    assert check.dict() == {"name": "cut", "passed": True, "value": 2.0, "detail": ""}
