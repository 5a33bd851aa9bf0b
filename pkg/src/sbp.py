"""
Diagonal-norm summation-by-parts operators on Legendre-Gauss-Lobatto nodes.

Element arrays are indexed [i1, i2, i3, ...] with array axis l-1 holding the
computational coordinate xi_l. Flattened vectors (used for the Kronecker
operators) run xi_1 fastest, i.e. numpy Fortran order.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from constants import MAX_DEGREE
from errors import ConfigError, ContractViolation, SolverError


@dataclass(frozen=True)
class SbpOperator1D:
    """Degree-p LGL operator: D = P^-1 Q, Q + Q^T = E."""

    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    E: np.ndarray

    @property
    def size(self):
        return self.degree + 1

    @property
    def P(self):
        return np.diag(self.weights)


@dataclass(frozen=True)
class InterpolationPair:
    """SBP-preserving interpolation between degrees p_low < p_high."""

    p_low: int
    p_high: int
    low_to_high: np.ndarray
    high_to_low: np.ndarray


def _check_degree(p):
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
        raise ConfigError(f"degree must be an integer, got {p!r}")
    if p < 1 or p > MAX_DEGREE:
        raise ConfigError(f"degree {p} outside supported range 1..{MAX_DEGREE}")


def lgl_nodes_weights(p, tol=1e-15, max_iter=100):
    """
    Legendre-Gauss-Lobatto nodes and weights for degree p.

    The nodes are the zeros of (1 - x^2) P_p'(x), found by Newton iteration
    from the Chebyshev-Gauss-Lobatto points.

    Args:
        p: Polynomial degree (1..12).

    Returns:
        (nodes, weights): increasing nodes on [-1, 1] and positive weights
        summing to 2.
    """
    _check_degree(p)
    n = p + 1
    nodes = np.cos(np.pi * np.arange(n) / p)
    vand = np.zeros((n, n))
    for _ in range(max_iter):
        vand[:, 0] = 1.0
        vand[:, 1] = nodes
        for k in range(1, p):
            vand[:, k + 1] = ((2 * k + 1) * nodes * vand[:, k] - k * vand[:, k - 1]) / (k + 1)
        previous = nodes
        nodes = previous - (nodes * vand[:, p] - vand[:, p - 1]) / (n * vand[:, p])
        if np.max(np.abs(nodes - previous)) < tol:
            break
    else:
        raise SolverError(f"LGL Newton iteration did not converge for p={p}")

    # Legendre values at the converged nodes
    vand[:, 0] = 1.0
    vand[:, 1] = nodes
    for k in range(1, p):
        vand[:, k + 1] = ((2 * k + 1) * nodes * vand[:, k] - k * vand[:, k - 1]) / (k + 1)
    weights = 2.0 / (p * n * vand[:, p] ** 2)

    order = np.argsort(nodes)
    nodes = nodes[order]
    weights = weights[order]
    # symmetric about zero with exact endpoints
    nodes = 0.5 * (nodes - nodes[::-1])
    nodes[0], nodes[-1] = -1.0, 1.0
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def differentiation_matrix(nodes):
    """Lagrange-basis differentiation matrix on distinct nodes (barycentric form)."""
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -np.sum(D, axis=1))
    return D


def lagrange_basis(nodes, points):
    """
    Values and first derivatives of the Lagrange basis on `nodes` at `points`.

    Returns:
        (B, dB) with B[i, a] = l_a(points[i]) and dB[i, a] = l_a'(points[i]).
    """
    nodes = np.asarray(nodes, dtype=float)
    points = np.asarray(points, dtype=float)
    n = nodes.size
    B = np.ones((points.size, n))
    dB = np.zeros((points.size, n))
    for a in range(n):
        others = [b for b in range(n) if b != a]
        denom = np.prod(nodes[a] - nodes[others])
        B[:, a] = np.prod(points[:, None] - nodes[None, others], axis=1) / denom
        for c in others:
            rest = [b for b in others if b != c]
            term = np.prod(points[:, None] - nodes[None, rest], axis=1) if rest else np.ones(points.size)
            dB[:, a] += term / denom
    return B, dB


@lru_cache(maxsize=None)
def build_sbp_1d(p):
    """Build the degree-p LGL SBP operator (cached per degree)."""
    nodes, weights = lgl_nodes_weights(p)
    D = differentiation_matrix(nodes)
    Q = weights[:, None] * D
    E = np.zeros((p + 1, p + 1))
    E[0, 0], E[-1, -1] = -1.0, 1.0
    for array in (nodes, weights, D, Q, E):
        array.setflags(write=False)
    return SbpOperator1D(degree=p, nodes=nodes, weights=weights, D=D, Q=Q, E=E)


@lru_cache(maxsize=None)
def build_interpolation_pair(p_low, p_high):
    """
    Interpolation pair between LGL nodes of degree p_low and p_high.

    low_to_high is the monomial-Vandermonde interpolant, exact to degree
    p_low; high_to_low follows from the SBP-preserving relation
    I_HtoL = P_L^-1 I_LtoH^T P_H.
    """
    if p_high < p_low:
        raise ContractViolation(f"interpolation pair needs p_high >= p_low, got ({p_low}, {p_high})")
    low = build_sbp_1d(p_low)
    if p_high == p_low:
        identity = np.eye(p_low + 1)
        identity.setflags(write=False)
        return InterpolationPair(p_low, p_high, identity, identity)
    high = build_sbp_1d(p_high)
    powers = np.arange(p_low + 1)
    vand_low = low.nodes[:, None] ** powers[None, :]
    vand_high = high.nodes[:, None] ** powers[None, :]
    try:
        low_to_high = np.linalg.solve(vand_low.T, vand_high.T).T
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular Vandermonde for degrees ({p_low}, {p_high})") from exc
    high_to_low = (low_to_high.T * high.weights[None, :]) / low.weights[:, None]
    low_to_high.setflags(write=False)
    high_to_low.setflags(write=False)
    return InterpolationPair(p_low, p_high, low_to_high, high_to_low)


def interpolation_matrix(p_from, p_to):
    """1D matrix taking nodal values at degree p_from to nodes of degree p_to."""
    if p_from <= p_to:
        return build_interpolation_pair(p_from, p_to).low_to_high
    return build_interpolation_pair(p_to, p_from).high_to_low


def interpolate_face(values, matrix):
    """Apply a 1D interpolation matrix along both axes of a face array (N, N, ...)."""
    return np.einsum('ia,jb,ab...->ij...', matrix, matrix, values)


def apply_derivative(field, axis, op):
    """
    Apply D along computational axis 1, 2 or 3 of an element field.

    Args:
        field: (N, N, N) or (N, N, N, k) nodal array, or a flat vector of
            N^3 entries with xi_1 fastest.
        axis: Computational axis (1, 2 or 3).
        op: SbpOperator1D of matching size.

    Returns:
        Array of the same shape as `field`.
    """
    if axis not in (1, 2, 3):
        raise ContractViolation(f"axis must be 1, 2 or 3, got {axis}")
    field = np.asarray(field)
    n = op.size
    flat = field.ndim == 1
    if flat:
        if field.size != n ** 3:
            raise ContractViolation(f"expected {n ** 3} nodal values, got {field.size}")
        field = field.reshape((n, n, n), order='F')
    if field.ndim < 3 or field.shape[:3] != (n, n, n):
        raise ContractViolation(f"field shape {field.shape} does not match degree {op.degree}")
    result = np.moveaxis(np.tensordot(op.D, field, axes=([1], [axis - 1])), 0, axis - 1)
    if flat:
        return result.reshape(-1, order='F')
    return result


def volume_weights(op):
    """Tensor-product quadrature weights on the volume nodes, shape (N, N, N)."""
    w = op.weights
    return w[:, None, None] * w[None, :, None] * w[None, None, :]


def face_weights(op):
    """Tensor-product quadrature weights on face nodes, shape (N, N)."""
    return np.outer(op.weights, op.weights)


@lru_cache(maxsize=None)
def kron_q_operators(p):
    """
    Three-dimensional Q_l = P x P x Q (Kronecker) matrices, xi_1 fastest.

    Returns:
        Tuple (Q_1, Q_2, Q_3) of (N^3, N^3) arrays.
    """
    op = build_sbp_1d(p)
    P = op.P
    q1 = np.kron(P, np.kron(P, op.Q))
    q2 = np.kron(P, np.kron(op.Q, P))
    q3 = np.kron(op.Q, np.kron(P, P))
    for array in (q1, q2, q3):
        array.setflags(write=False)
    return q1, q2, q3


def face_index(axis, side):
    """Index tuple selecting the xi_axis = side face of an (N, N, N, ...) array."""
    index = [slice(None)] * 3
    index[axis - 1] = -1 if side > 0 else 0
    return tuple(index)


def extract_face(values, axis, side):
    """Restrict an element array to one face; remaining axes keep their order."""
    return values[face_index(axis, side)]
