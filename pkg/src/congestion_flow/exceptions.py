class CongestionFlowError(Exception):
    """Base class for all errors raised by congestion_flow"""


class GraphFormatError(CongestionFlowError, ValueError):
    """Raised when a graph, demand or solution file cannot be parsed"""


class InvalidCapacityError(CongestionFlowError, ValueError):
    """Raised when an edge capacity is not a positive finite number"""


class DisconnectedGraphError(CongestionFlowError, ValueError):
    """Raised when a graph is not connected"""


class DimensionMismatchError(CongestionFlowError, ValueError):
    """Raised when a vector does not match the graph or operator size"""


class DemandImbalanceError(CongestionFlowError, ValueError):
    """Raised when a demand vector does not sum to zero"""


class DegenerateCutError(CongestionFlowError, ValueError):
    """Raised when a cut side is empty or the whole vertex set"""


class ApproximatorError(CongestionFlowError):
    """Raised when a congestion-approximator cannot be built or applied"""


class HierarchyFormatError(ApproximatorError, ValueError):
    """Raised when a serialized hierarchy is malformed or has a wrong version"""


class SolverError(CongestionFlowError):
    """Raised when the descent solver fails"""


class IterationBudgetError(SolverError):
    """Raised when the descent exceeds its iteration budget"""


class DescentError(SolverError):
    """Raised when a descent step fails to decrease the potential as required"""


class OracleError(CongestionFlowError):
    """Raised when an exact oracle cannot answer"""
