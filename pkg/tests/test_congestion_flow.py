from pathlib import Path

import pytest

import congestion_flow

DATA_DIR = Path(__file__).parent / "data"


def test_congestion_flow_version():
    assert congestion_flow.__version__


def test_top_level_api():
    g = congestion_flow.load_graph(DATA_DIR / "path3.txt")
    R = congestion_flow.make_approximator(g, "degree")
    b = congestion_flow.unit_demand(g.n, 0, g.n - 1)
    solution = congestion_flow.route(g, R, b, eps=0.5)
    assert solution.primal == pytest.approx(1.0)
    assert congestion_flow.certify(g, b, solution).passed
