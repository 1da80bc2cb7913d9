import networkx as nx
import numpy as np
import pytest

from congestion_flow.exceptions import DisconnectedGraphError
from congestion_flow.generators import GeneratorSpec, generate


class TestFamilies:
    @pytest.mark.parametrize(
        "kind,params,n,m",
        [
            ("path", {"n": 5}, 5, 4),
            ("cycle", {"n": 5}, 5, 5),
            ("complete", {"n": 5}, 5, 10),
            ("grid", {"k": 10}, 100, 180),
            ("grid", {"rows": 2, "cols": 3}, 6, 7),
            ("barbell", {"k": 4}, 8, 13),
            ("barbell", {"k": 4, "path": 2}, 10, 15),
        ],
    )
    def test_sizes(self, kind, params, n, m):
        g = generate(kind, params)
        assert (g.n, g.m) == (n, m)
        assert nx.is_connected(g.to_networkx())

    def test_unit_capacities(self):
        g = generate("grid", {"k": 3})
        assert np.all(g.capacities == 1.0)

    def test_barbell_capacities(self):
        g = generate("barbell", {"k": 4, "path": 2})
        # Three bridge edges of capacity 1, twelve clique edges of capacity 4
        assert sorted(g.capacities.tolist()) == [1.0] * 3 + [4.0] * 12
        g = generate("barbell", {"k": 3, "bridge_capacity": 0.5})
        assert g.capacities.min() == 0.5

    def test_gnp(self):
        g = generate("gnp", {"n": 30, "p": 0.3, "connect": True}, seed=4)
        assert g.n == 30
        assert nx.is_connected(g.to_networkx())

    def test_gnp_disconnected(self):
        with pytest.raises(DisconnectedGraphError) as excinfo:
            generate("gnp", {"n": 10, "p": 0.0})
        assert "connect=True" in str(excinfo.value)
        g = generate("gnp", {"n": 10, "p": 0.0, "connect": True})
        assert (g.n, g.m) == (10, 9)


class TestCapacities:
    def test_uniform(self):
        params = {"n": 20, "capacities": "uniform", "low": 2.0, "high": 3.0}
        g = generate("cycle", params, seed=1)
        assert np.all((g.capacities >= 2.0) & (g.capacities <= 3.0))

    def test_exponential(self):
        g = generate("complete", {"n": 6, "capacities": "exponential"}, seed=1)
        assert np.all(g.capacities > 0)

    def test_seeded(self):
        params = {"k": 4, "capacities": "uniform"}
        first = generate("grid", params, seed=3)
        second = generate("grid", params, seed=3)
        other = generate("grid", params, seed=4)
        np.testing.assert_array_equal(first.capacities, second.capacities)
        assert not np.array_equal(first.capacities, other.capacities)

    def test_bad_uniform_range(self):
        params = {"n": 4, "capacities": "uniform", "low": 3.0, "high": 1.0}
        with pytest.raises(ValueError) as excinfo:
            generate("path", params)
        assert "0 < low <= high" in str(excinfo.value)


class TestErrors:
    def test_unknown_kind(self):
        with pytest.raises(ValueError) as excinfo:
            generate("torus", {"n": 4})
        assert "unknown generator torus" in str(excinfo.value)

    def test_missing_parameter(self):
        with pytest.raises(ValueError) as excinfo:
            generate("path", {})
        assert "generator path needs parameter 'n'" in str(excinfo.value)


class TestGeneratorSpec:
    def test_build(self):
        spec = GeneratorSpec(kind="grid", params={"k": 3}, seed=2)
        g = spec.build()
        assert (g.n, g.m) == (9, 12)
        assert spec.dict() == {"kind": "grid", "params": {"k": 3}, "seed": 2}

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "torus", "params": {}},
            {"kind": "path", "params": {"n": 3, "capacities": "normal"}},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GeneratorSpec(**kwargs)
