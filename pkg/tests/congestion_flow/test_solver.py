import tempfile
from dataclasses import FrozenInstanceError
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from congestion_flow.approximators import (
    DegreeApproximator,
    build_tree_approximator,
)
from congestion_flow.exceptions import (
    ApproximatorError,
    DegenerateCutError,
    DemandImbalanceError,
    DescentError,
    IterationBudgetError,
)
from congestion_flow.flow_io import FlowIO, format_dimacs
from congestion_flow.generators import generate
from congestion_flow.graph import (
    Graph,
    cut_quantities,
    divergence,
    max_congestion,
)
from congestion_flow.hierarchy import HierarchyApproximator, HierarchyConfig
from congestion_flow.oracle import CutTable, exact_max_flow
from congestion_flow.solver import (
    SolverConfig,
    almost_route,
    certificate_ratio,
    route,
    st_max_flow,
    threshold_cut,
)
from congestion_flow.utils import random_demand, unit_demand


@pytest.fixture
def path3() -> Graph:
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def two_paths() -> Graph:
    return Graph.from_edges(
        4, [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 2.0), (2, 3, 2.0)]
    )


@pytest.fixture
def grid() -> Graph:
    rng = np.random.default_rng(21)
    graph = nx.convert_node_labels_to_integers(nx.grid_2d_graph(3, 3))
    for u, v in graph.edges():
        graph[u][v]["capacity"] = float(rng.uniform(1, 3))
    return Graph.from_networkx(graph)


class _ScaledDegree(DegreeApproximator):
    """Rows blown up past the cut congestions, so steps overshoot."""

    def _apply(self, b):
        return 100.0 * super()._apply(b)

    def _adjoint(self, p):
        return 100.0 * super()._adjoint(p)


class _Blind(DegreeApproximator):
    def _apply(self, b):
        return np.zeros_like(b)


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.epsilon == 0.1
        assert cfg.scale_up == pytest.approx(17.0 / 16.0)
        assert cfg.dict()["method"] == "steepest"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": 0.0},
            {"epsilon": 0.6},
            {"alpha": 0.5},
            {"scale_up": 1.0},
            {"termination_coeff": 0.0},
            {"outer_rounds": -1},
            {"residual_epsilon": 1.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_frozen(self):
        cfg = SolverConfig()
        with pytest.raises(FrozenInstanceError):
            cfg.epsilon = 0.2
        assert cfg.with_epsilon(0.2).epsilon == 0.2
        assert cfg.epsilon == 0.1

    def test_rounds(self):
        assert SolverConfig().rounds_for(4) == 3
        assert SolverConfig().rounds_for(1) == 1
        assert SolverConfig(outer_rounds=0).rounds_for(100) == 0

    def test_iteration_budget(self):
        cfg = SolverConfig(epsilon=0.5)
        assert cfg.iteration_budget(3, 1.0) == 10000
        assert cfg.iteration_budget(1000, 50.0) > 10000


class TestThresholdCut:
    def test_path(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        cut = threshold_cut(path3, b, [0.0, 1.0, 2.0])
        assert cut.side.tolist() == [2]
        assert cut.b_S == 1.0
        assert cut.ratio == 1.0

    def test_orientation(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        cut = threshold_cut(path3, b, [2.0, 1.0, 0.0])
        assert cut.b_S == 1.0
        assert cut.side.tolist() == [1, 2]

    def test_ties(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        # Only {2} is a threshold set; {0, 2} and {1, 2} are not
        cut = threshold_cut(path3, b, [0.0, 0.0, 1.0])
        assert cut.side.tolist() == [2]

    def test_degenerate(self, path3: Graph):
        with pytest.raises(DegenerateCutError):
            threshold_cut(path3, unit_demand(3, 0, 2), [1.0, 1.0, 1.0])

    def test_not_finite(self, path3: Graph):
        with pytest.raises(ValueError):
            threshold_cut(path3, unit_demand(3, 0, 2), [0.0, np.nan, 1.0])

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_scan(self, grid: Graph, seed):
        rng = np.random.default_rng(seed)
        b = random_demand(grid.n, rng)
        v = np.round(rng.normal(size=grid.n), 1)
        best = 0.0
        for theta in np.unique(v)[1:]:
            cut = cut_quantities(grid, b, v >= theta)
            best = max(best, abs(cut.ratio))
        cut = threshold_cut(grid, b, v)
        assert cut.ratio == pytest.approx(best)
        assert cut.b_S >= 0

    def test_beats_certificate(self, grid: Graph):
        rng = np.random.default_rng(8)
        b = random_demand(grid.n, rng)
        v = rng.normal(size=grid.n)
        ratio = certificate_ratio(grid, b, v)
        assert threshold_cut(grid, b, v).ratio >= abs(ratio) - 1e-12


class TestAlmostRoute:
    def test_certificate(self, two_paths: Graph):
        R = DegreeApproximator(two_paths)
        b = unit_demand(4, 0, 3)
        result = almost_route(two_paths, R, b, eps=0.2)
        opt = float(CutTable(two_paths).opt(b))
        np.testing.assert_allclose(
            result.residual, b - divergence(two_paths, result.flow), atol=1e-12
        )
        assert result.certificate_ratio <= opt * (1 + 1e-9)
        assert result.objective <= 1.2 * result.certificate_ratio * (1 + 1e-9)
        assert result.alpha == R.alpha_claimed
        assert result.epsilon == 0.2

    @pytest.mark.parametrize("eps", [0.5, 0.2])
    def test_slack_within_epsilon(self, grid: Graph, eps):
        b = random_demand(grid.n, np.random.default_rng(3))
        R = DegreeApproximator(grid)
        result = almost_route(grid, R, b, eps=eps)
        slack = np.abs(R.apply(result.residual, check_balance=False)).max()
        assert slack == pytest.approx(result.slack_ratio * R.norm(b))
        assert result.slack_ratio <= eps + 1e-9

    def test_scale_invariant(self, path3: Graph):
        R = build_tree_approximator(path3)
        b = unit_demand(3, 0, 2)
        small = almost_route(path3, R, b, eps=0.5)
        large = almost_route(path3, R, 1000.0 * b, eps=0.5)
        assert large.objective == pytest.approx(1000.0 * small.objective)

    def test_zero_demand(self, path3: Graph):
        result = almost_route(path3, build_tree_approximator(path3), np.zeros(3))
        assert result.iterations == 0
        assert result.objective == 0.0
        assert not result.flow.any()

    def test_unbalanced(self, path3: Graph):
        with pytest.raises(DemandImbalanceError):
            almost_route(path3, build_tree_approximator(path3), [1.0, 0.0, 0.0])

    def test_blind_approximator(self, path3: Graph):
        with pytest.raises(ApproximatorError):
            almost_route(path3, _Blind(path3, alpha=1.0), unit_demand(3, 0, 2))

    def test_iteration_budget(self, path3: Graph):
        cfg = SolverConfig(max_iter_coeff=1e-9, min_iterations_budget=1)
        with pytest.raises(IterationBudgetError) as excinfo:
            R = build_tree_approximator(path3)
            almost_route(path3, R, unit_demand(3, 0, 2), cfg=cfg)
        assert "no convergence within 1 iterations" in str(excinfo.value)

    def test_descent_check(self, path3: Graph):
        R = _ScaledDegree(path3, alpha=1.0)
        with pytest.raises(DescentError):
            almost_route(path3, R, unit_demand(3, 0, 2))


class TestRoute:
    def test_path(self, path3: Graph):
        b = unit_demand(3, 0, 2)
        solution = route(path3, build_tree_approximator(path3), b, eps=0.5)
        np.testing.assert_allclose(divergence(path3, solution.flow), b, atol=1e-12)
        assert solution.primal == pytest.approx(1.0)
        assert solution.dual == pytest.approx(1.0)
        assert solution.gap <= 1.5
        assert solution.within_tolerance

    def test_two_paths(self, two_paths: Graph):
        b = unit_demand(4, 0, 3)
        solution = route(two_paths, DegreeApproximator(two_paths), b, eps=0.1)
        np.testing.assert_allclose(
            divergence(two_paths, solution.flow), b, atol=1e-12
        )
        assert solution.dual <= 1.0 / 3.0 + 1e-12
        assert solution.primal >= 1.0 / 3.0 - 1e-12
        assert solution.gap <= 1.1 + 1e-9
        record = solution.dict()
        assert record["cut"]["side"] == solution.cut.side.tolist()
        assert record["gap"] == solution.gap

    @pytest.mark.parametrize("seed", [0, 1])
    def test_weak_duality(self, grid: Graph, seed):
        b = random_demand(grid.n, np.random.default_rng(seed))
        solution = route(grid, build_tree_approximator(grid), b, eps=0.5)
        opt = float(CutTable(grid).opt(b))
        np.testing.assert_allclose(divergence(grid, solution.flow), b, atol=1e-9)
        assert solution.dual <= opt * (1 + 1e-9)
        assert opt <= solution.primal * (1 + 1e-9)
        assert solution.primal == pytest.approx(max_congestion(grid, solution.flow))
        assert solution.gap <= 1.5 + 1e-9
        assert solution.slack_ratio <= 0.5 + 1e-9

    def test_round_iterations(self, grid: Graph):
        b = random_demand(grid.n, np.random.default_rng(4))
        R = build_tree_approximator(grid)
        solution = route(grid, R, b, eps=0.5)
        first = almost_route(grid, R, b, eps=0.5)
        assert solution.round_iterations[0] == first.iterations
        assert len(solution.round_iterations) == solution.rounds + 1
        assert sum(solution.round_iterations) == solution.iterations
        assert solution.dict()["round_iterations"] == solution.round_iterations

    def test_zero_demand(self, path3: Graph):
        with pytest.raises(ValueError) as excinfo:
            route(path3, build_tree_approximator(path3), np.zeros(3))
        assert "nonzero demand" in str(excinfo.value)

    def test_no_residual_rounds(self, path3: Graph):
        cfg = SolverConfig(epsilon=0.5, outer_rounds=0)
        b = unit_demand(3, 0, 2)
        solution = route(path3, build_tree_approximator(path3), b, cfg=cfg)
        assert solution.rounds == 0
        np.testing.assert_allclose(divergence(path3, solution.flow), b, atol=1e-12)


class TestMaxFlow:
    def test_two_paths(self, two_paths: Graph):
        R = DegreeApproximator(two_paths)
        value, flow, cut = st_max_flow(two_paths, 0, 3, eps=0.1, R=R)
        assert 3.0 / 1.1 - 1e-9 <= value <= 3.0 + 1e-9
        assert max_congestion(two_paths, flow) == pytest.approx(1.0)
        np.testing.assert_allclose(
            divergence(two_paths, flow), value * unit_demand(4, 0, 3), atol=1e-9
        )
        assert cut.c_S >= 3.0 - 1e-9
        assert 3 in cut.side.tolist() and 0 not in cut.side.tolist()

    def test_same_endpoints(self, two_paths: Graph):
        with pytest.raises(ValueError):
            st_max_flow(two_paths, 1, 1, R=DegreeApproximator(two_paths))


@pytest.mark.slow
@pytest.mark.parametrize("eps", [0.5, 0.2])
@pytest.mark.parametrize("seed", range(5))
def test_random_instances(eps, seed):
    params = {"n": 8, "p": 0.6, "connect": True, "capacities": "uniform"}
    g = generate("gnp", params, seed)
    b = random_demand(g.n, np.random.default_rng(seed))
    solution = route(g, DegreeApproximator(g), b, eps=eps)
    opt = float(CutTable(g).opt(b))
    np.testing.assert_allclose(divergence(g, solution.flow), b, atol=1e-9)
    assert solution.dual <= opt * (1 + 1e-9) <= solution.primal * (1 + 2e-9)
    assert solution.certificate_ratio <= opt * (1 + 1e-9)
    assert solution.gap <= 1 + eps + 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_random_instances_tight(seed):
    params = {"n": 8, "p": 0.6, "connect": True, "capacities": "uniform"}
    g = generate("gnp", params, seed)
    b = random_demand(g.n, np.random.default_rng(seed))
    solution = route(g, DegreeApproximator(g), b, eps=0.1)
    opt = float(CutTable(g).opt(b))
    np.testing.assert_allclose(divergence(g, solution.flow), b, atol=1e-9)
    assert solution.dual <= opt * (1 + 1e-9)
    assert solution.primal <= 1.1 * opt * (1 + 1e-9)
    assert solution.slack_ratio <= 0.1 + 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("eps", [0.5, 0.1])
@pytest.mark.parametrize("seed", range(3))
def test_hierarchy_routing(eps, seed):
    params = {"n": 10, "p": 0.4, "connect": True, "capacities": "uniform"}
    g = generate("gnp", params, seed)
    R = HierarchyApproximator.build(g, HierarchyConfig(seed=seed))
    b = random_demand(g.n, np.random.default_rng(seed))
    solution = route(g, R, b, eps=eps)
    opt = float(CutTable(g).opt(b))
    np.testing.assert_allclose(divergence(g, solution.flow), b, atol=1e-9)
    assert solution.dual <= opt * (1 + 1e-9) <= solution.primal * (1 + 2e-9)
    assert solution.primal <= (1 + eps) * opt * (1 + 1e-9)
    assert solution.within_tolerance


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_max_flow_on_dimacs_instances(seed):
    params = {"n": 16, "p": 0.3, "connect": True, "capacities": "uniform"}
    generated = generate("gnp", params, seed)
    with tempfile.TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "instance.dimacs"
        FlowIO().write_text(path, format_dimacs(generated, 0, generated.n - 1))
        g, s, t = FlowIO().read_instance(path)
    expected, _ = exact_max_flow(g, s, t)
    value, flow, cut = st_max_flow(g, s, t, eps=0.2, R=DegreeApproximator(g))
    assert expected / 1.2 * (1 - 1e-9) <= value <= expected * (1 + 1e-9)
    assert max_congestion(g, flow) <= 1.0 + 1e-9
    np.testing.assert_allclose(
        divergence(g, flow), value * unit_demand(g.n, s, t), atol=1e-9
    )
    assert cut.c_S >= expected * (1 - 1e-9)
    assert t in cut.side.tolist() and s not in cut.side.tolist()
