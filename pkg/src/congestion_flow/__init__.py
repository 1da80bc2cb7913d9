# read version from installed package
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version(__name__)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

# populate package namespace
from congestion_flow.approximators import make_approximator  # noqa: E402
from congestion_flow.certify import certify  # noqa: E402
from congestion_flow.flow_io import FlowIO, load_demands, load_graph  # noqa: E402
from congestion_flow.graph import Cut, Graph  # noqa: E402
from congestion_flow.solver import (  # noqa: E402
    FlowSolution,
    SolverConfig,
    almost_route,
    route,
    st_max_flow,
)
from congestion_flow.utils import unit_demand  # noqa: E402

__all__ = [
    "Cut",
    "FlowIO",
    "FlowSolution",
    "Graph",
    "SolverConfig",
    "almost_route",
    "certify",
    "load_demands",
    "load_graph",
    "make_approximator",
    "route",
    "st_max_flow",
    "unit_demand",
]
