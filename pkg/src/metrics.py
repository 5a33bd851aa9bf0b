"""
Metric terms and the per-element discrete GCL.

Volume metric terms Ja_lm = J d(xi_l)/d(x_m) are stored as (N, N, N, 3, 3)
arrays indexed [..., l, m]. Face data are the Ja_{l m} of the face-normal
axis l on that face, shape (N, N, 3).

With Q_l the three-dimensional Kronecker SBP matrices, the discrete GCL of
one element reads

    sum_l Q_l^T a_lm = c_m,   m = 1, 2, 3,

where c_m gathers the specified surface metrics of the element and of its
neighbours (interpolated onto this element's face nodes). Each element is
solved independently by a minimum-norm correction of its target metrics.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import linalg

from errors import ContractViolation, GclInfeasibleError, GeometryError
from mesh import element_lgl_coordinates, map_derivatives
from sbp import (apply_derivative, build_sbp_1d, face_index, face_weights,
                 interpolate_face, interpolation_matrix, kron_q_operators)

SVD_TRUNCATION = 1e-12
INTEGRAL_TOLERANCE = 1e-12

METRIC_SOURCES = ("analytic", "thomas_lombard")


def face_slot(axis, side):
    return 2 * (axis - 1) + (1 if side > 0 else 0)


@dataclass(frozen=True)
class ElementMetrics:
    element: int
    degree: int
    jacobian: np.ndarray
    metric: np.ndarray
    target: np.ndarray
    face_metrics: Tuple[np.ndarray, ...]
    forcing: np.ndarray

    def face_metric(self, axis, side):
        return self.face_metrics[face_slot(axis, side)]

    @property
    def scale(self):
        return float(np.max(np.abs(self.target)))


def _cyclic(l):
    return (l % 3) + 1, ((l + 1) % 3) + 1


def analytic_metrics(element, p):
    """
    Exact metric terms of the geometric map at the LGL nodes, in the
    cross-product form Ja_l = x_{xi_a} x x_{xi_b} with (l, a, b) cyclic.

    Returns:
        (J, a) with J of shape (N, N, N) and a of shape (N, N, N, 3, 3).
    """
    d = map_derivatives(element, p)
    a = np.empty_like(d)
    for l in (1, 2, 3):
        ia, ib = _cyclic(l)
        a[..., l - 1, :] = np.cross(d[..., ia - 1, :], d[..., ib - 1, :])
    J = np.einsum('...m,...m->...', d[..., 0, :], a[..., 0, :])
    if np.min(J) <= 0:
        raise GeometryError(f"non-positive Jacobian {np.min(J):.3e}", element=element.index)
    return J, a


def thomas_lombard_metrics(element, p):
    """
    Curl-form (Thomas-Lombard) metric terms from discrete derivatives of the
    nodal coordinates:

        Ja_lm = D_b (x_k D_a x_j) - D_a (x_k D_b x_j)

    with (l, a, b) and (m, j, k) cyclic. J is the determinant of the
    discrete coordinate-derivative matrix.
    """
    op = build_sbp_1d(p)
    x = element_lgl_coordinates(element, p)
    dx = [apply_derivative(x, axis, op) for axis in (1, 2, 3)]
    a = np.empty(x.shape[:3] + (3, 3))
    for l in (1, 2, 3):
        ia, ib = _cyclic(l)
        for m in (1, 2, 3):
            j, k = _cyclic(m)
            first = apply_derivative(x[..., k - 1] * dx[ia - 1][..., j - 1], ib, op)
            second = apply_derivative(x[..., k - 1] * dx[ib - 1][..., j - 1], ia, op)
            a[..., l - 1, m - 1] = first - second
    J = np.linalg.det(np.stack(dx, axis=-2))
    if np.min(J) <= 0:
        raise GeometryError(f"non-positive discrete Jacobian {np.min(J):.3e}", element=element.index)
    return J, a


def face_metrics_from_volume(a):
    """Restrict volume metrics to the six faces (face-normal rows only)."""
    return tuple(a[face_index(axis, side)][..., axis - 1, :]
                 for axis in (1, 2, 3) for side in (-1, +1))


def assemble_gcl_rhs(index, mesh, face_data):
    """
    Surface forcing c_m of one element.

    Every face adds 1/2 * side * W_f (a_own + I a_partner) on its nodes.
    Domain-boundary faces use their own data on both sides.

    Args:
        index: Element number.
        mesh: Mesh.
        face_data: Per-element tuples of six face metric arrays (see face_slot).

    Returns:
        (N, N, N, 3) array.
    """
    p = mesh.degrees[index]
    n = p + 1
    weights = face_weights(build_sbp_1d(p))[..., None]
    c = np.zeros((n, n, n, 3))
    for axis in (1, 2, 3):
        for side in (-1, +1):
            own = face_data[index][face_slot(axis, side)]
            _, partner = mesh.face_partner(index, axis, side)
            if partner is None:
                other = own
            else:
                if face_data[partner] is None:
                    raise ContractViolation(f"missing face metrics of element {partner}")
                matrix = interpolation_matrix(mesh.degrees[partner], p)
                other = interpolate_face(face_data[partner][face_slot(axis, -side)], matrix)
            c[face_index(axis, side)] += 0.5 * side * weights * (own + other)
    return c


@lru_cache(maxsize=None)
def constraint_svd(p):
    """
    Thin SVD of the GCL constraint matrix M = [Q_1^T, Q_2^T, Q_3^T].

    Returns:
        (U, S, Vt, rank) where rank counts singular values above
        SVD_TRUNCATION * sigma_max.

    Raises:
        GclInfeasibleError: M does not have exactly one null direction, or
            the SVD does not converge.
    """
    q1, q2, q3 = kron_q_operators(p)
    M = np.hstack([q1.T, q2.T, q3.T])
    try:
        U, S, Vt = linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise GclInfeasibleError(f"SVD of the constraint matrix for p={p} failed: {e}") from e
    rank = int(np.sum(S > SVD_TRUNCATION * S[0]))
    if M.shape[0] - rank != 1:
        raise GclInfeasibleError(
            f"constraint matrix for p={p} has {M.shape[0] - rank} near-zero singular values, expected 1")
    for array in (U, S, Vt):
        array.setflags(write=False)
    return U, S, Vt, rank


def _stack_unknowns(metric, m):
    return np.concatenate([metric[..., l, m].reshape(-1, order='F') for l in range(3)])


def constraint_residual(metric, forcing, p):
    """sum_l Q_l^T a_lm - c_m for m = 1..3, shape (N, N, N, 3)."""
    n = p + 1
    qs = kron_q_operators(p)
    residual = np.empty((n, n, n, 3))
    for m in range(3):
        total = sum(q.T @ metric[..., l, m].reshape(-1, order='F') for l, q in enumerate(qs))
        residual[..., m] = (total - forcing[..., m].reshape(-1, order='F')).reshape((n, n, n), order='F')
    return residual


def optimize_metrics(target, forcing, p, element=None):
    """
    Minimum 2-norm correction of the target metrics onto the discrete GCL:

        a_m = a_target - M^+ (M a_target - c_m)

    Args:
        target: (N, N, N, 3, 3) target metric terms.
        forcing: (N, N, N, 3) surface forcing from assemble_gcl_rhs.
        p: Element degree.
        element: Element number, used in error messages.

    Raises:
        GclInfeasibleError: the forcing violates the integral constraint 1^T c_m = 0.
    """
    U, S, Vt, rank = constraint_svd(p)
    n = p + 1
    for m in range(3):
        c = forcing[..., m]
        total = abs(np.sum(c))
        if total > INTEGRAL_TOLERANCE * np.sum(np.abs(c)):
            raise GclInfeasibleError(
                f"surface data violate the integral constraint for m={m + 1}: |1^T c| = {total:.3e}",
                element=element)
    residual = constraint_residual(target, forcing, p)
    result = np.array(target, dtype=float)
    for m in range(3):
        r = residual[..., m].reshape(-1, order='F')
        correction = Vt[:rank].T @ ((U[:, :rank].T @ r) / S[:rank])
        unknowns = _stack_unknowns(target, m) - correction
        for l in range(3):
            block = unknowns[l * n ** 3:(l + 1) * n ** 3]
            result[..., l, m] = block.reshape((n, n, n), order='F')
    return result


def gcl_residual(element_metrics):
    """
    GCL residual of the stored metrics.

    Returns:
        (residual, max_norm) with residual of shape (N, N, N, 3).
    """
    residual = constraint_residual(element_metrics.metric, element_metrics.forcing,
                                   element_metrics.degree)
    return residual, float(np.max(np.abs(residual)))


def _metric_source(element, p, source):
    if source == "analytic":
        return analytic_metrics(element, p)[1]
    if source == "thomas_lombard":
        return thomas_lombard_metrics(element, p)[1]
    raise ContractViolation(f"unknown metric source '{source}', expected one of {METRIC_SOURCES}")


def setup_metrics(mesh, target="analytic", face_seed="analytic", optimize=True, threads=1):
    """
    Metric terms of every element of a mesh.

    Face data are exchanged first, then each element's forcing is assembled
    and its optimization problem solved independently.

    Args:
        mesh: Mesh.
        target: Volume metric targets, "analytic" or "thomas_lombard".
        face_seed: Specified surface metrics, "analytic" or "thomas_lombard".
        optimize: Apply the GCL correction (otherwise the targets are kept).
        threads: Worker threads for the per-element solves.

    Returns:
        List of ElementMetrics in element order.
    """
    jacobians, targets, face_data = [], [], []
    for element in mesh.elements:
        p = mesh.degrees[element.index]
        J, exact = analytic_metrics(element, p)
        jacobians.append(J)
        targets.append(exact if target == "analytic" else _metric_source(element, p, target))
        seed = exact if face_seed == "analytic" else _metric_source(element, p, face_seed)
        face_data.append(face_metrics_from_volume(seed))

    def solve(index):
        p = mesh.degrees[index]
        forcing = assemble_gcl_rhs(index, mesh, face_data)
        metric = optimize_metrics(targets[index], forcing, p, element=index) if optimize else targets[index]
        return ElementMetrics(element=index, degree=p, jacobian=jacobians[index],
                              metric=metric, target=targets[index],
                              face_metrics=face_data[index], forcing=forcing)

    indices = range(mesh.n_elements)
    if threads and threads > 1:
        for p in sorted(set(mesh.degrees)):
            constraint_svd(p)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve, indices))
    return [solve(index) for index in indices]
