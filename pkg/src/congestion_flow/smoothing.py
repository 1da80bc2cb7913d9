"""Symmetric softmax and the congestion potential built from it.

lmax(x) = log Σᵢ (exp(xᵢ) + exp(-xᵢ)) overestimates ‖x‖∞ by at most log(2d).
Its gradient has ℓ₁ norm at most 1 and is 1-Lipschitz from ℓ∞ to ℓ₁, which
is what makes fixed-size descent steps safe.
"""
from typing import TYPE_CHECKING, NamedTuple, Tuple

import numpy as np
from scipy.special import logsumexp

from congestion_flow.exceptions import DimensionMismatchError
from congestion_flow.graph import Graph, adjoint_divergence, divergence
from congestion_flow.types import EdgeVector, Potentials, Vector, VectorLike

if TYPE_CHECKING:
    from congestion_flow.approximators import CongestionApproximator


def lmax_and_grad(x: VectorLike) -> Tuple[float, Vector]:
    """Value and gradient of lmax in one overflow-safe pass.

    Args:
        x (VectorLike): Finite, nonempty vector.

    Raises:
        DimensionMismatchError: If `x` is empty.
        ValueError: If `x` has non-finite entries.

    Returns:
        Tuple[float, Vector]: lmax(x) and ∇lmax(x), with
        ∇lmax(x)ᵢ = (exp(xᵢ) - exp(-xᵢ)) / Σⱼ (exp(xⱼ) + exp(-xⱼ)).
    """
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatchError("lmax of an empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("lmax needs finite entries")
    value = float(logsumexp(np.concatenate([arr, -arr])))
    # Every exponent is <= 0 once the log-partition is subtracted
    grad = np.exp(arr - value) - np.exp(-arr - value)
    return value, grad


def lmax(x: VectorLike) -> float:
    """Symmetric softmax, between ‖x‖∞ and ‖x‖∞ + log(2d)."""
    return lmax_and_grad(x)[0]


def grad_lmax(x: VectorLike) -> Vector:
    """Gradient of `lmax`."""
    return lmax_and_grad(x)[1]


class PotentialParts(NamedTuple):
    """Both halves of φ(f) = lmax(C⁻¹f) + lmax(2αR(b - Bf)) at one point.

    Arguments:
        x1 (EdgeVector) -- Edge congestions C⁻¹f.
        x2 (Vector) -- Scaled residual congestions 2αR(b - Bf).
        p1 (EdgeVector) -- ∇lmax(x1).
        p2 (Vector) -- ∇lmax(x2).
        phi (float) -- Potential value.
        residual (Vector) -- Residual demand b - Bf.
    """

    x1: EdgeVector
    x2: Vector
    p1: EdgeVector
    p2: Vector
    phi: float
    residual: Vector

    @property
    def objective(self) -> float:
        """The quantity φ smooths: ‖x1‖∞ + ‖x2‖∞"""
        return float(np.max(np.abs(self.x1)) + np.max(np.abs(self.x2)))


def potential(
    g: Graph,
    R: "CongestionApproximator",
    alpha: float,
    b: VectorLike,
    f: VectorLike,
    scale: float = 1.0,
) -> PotentialParts:
    """Evaluate the potential of `scale·f` against demands `scale·b`.

    Applies R exactly once.

    Args:
        g (Graph): The graph.
        R (CongestionApproximator): Approximator whose rows bound the residual.
        alpha (float): Approximation factor used in the residual weight.
        b (VectorLike): Demands.
        f (VectorLike): Flow.
        scale (float): Common multiplier of `b` and `f`.

    Returns:
        PotentialParts: Arguments, gradients and value of both softmax terms.
    """
    flow = np.asarray(f, dtype=np.float64)
    residual = np.asarray(b, dtype=np.float64) - divergence(g, flow)
    x1 = scale * flow / g.capacities
    x2 = (2.0 * alpha * scale) * R.apply(residual, check_balance=False)
    val1, p1 = lmax_and_grad(x1)
    val2, p2 = lmax_and_grad(x2)
    return PotentialParts(x1, x2, p1, p2, val1 + val2, residual)


def gradient_and_potentials(
    parts: PotentialParts, g: Graph, R: "CongestionApproximator", alpha: float
) -> Tuple[EdgeVector, Potentials]:
    """∇φ(f) = C⁻¹p1 - 2αBᵀv together with the potentials v = Rᵀp2.

    Applies Rᵀ exactly once.
    """
    v = R.adjoint(parts.p2)
    grad = parts.p1 / g.capacities - 2.0 * alpha * adjoint_divergence(g, v)
    return grad, v


def potential_gradient(
    parts: PotentialParts, g: Graph, R: "CongestionApproximator", alpha: float
) -> EdgeVector:
    """Gradient of the potential with respect to the (scaled) flow."""
    return gradient_and_potentials(parts, g, R, alpha)[0]
