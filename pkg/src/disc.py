"""
Semi-discrete right-hand side of the entropy-stable SBP scheme.

Per element (M the volume quadrature, J the metric Jacobian):

    M J dq/dt = -M sum_{l,m} (D_l A_lm + A_lm D_l) o F_m(q, q) 1
                + own-face terms + interface couplings + dissipation

Everything is accumulated in the M-scaled form and divided by M J at the
end. Face arrays are flattened in C order to (n_face_nodes, nvar).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from errors import ContractViolation, StateError
from mesh import element_lgl_coordinates
from sbp import build_sbp_1d, extract_face, face_index, face_weights, interpolation_matrix, volume_weights


@dataclass(frozen=True)
class FaceCoupling:
    """Precomputed data of one face. Interpolation matrices act on flattened face arrays."""

    face: object
    p_owner: int
    p_neighbor: Optional[int]
    weights_owner: np.ndarray
    weights_neighbor: Optional[np.ndarray]
    metric_owner: np.ndarray
    metric_neighbor: Optional[np.ndarray]
    to_owner: Optional[np.ndarray] = None
    to_neighbor: Optional[np.ndarray] = None
    coordinates: Optional[np.ndarray] = None

    @property
    def conforming(self):
        return self.to_owner is None


@dataclass
class Residual:
    dqdt: List[np.ndarray]
    scaled: List[np.ndarray]
    assembled: Dict[str, bool] = field(default_factory=dict)


class StateLayout:
    """Packs per-element (N, N, N, nvar) arrays into one flat vector."""

    def __init__(self, degrees, nvar):
        self.nvar = nvar
        self.shapes = [(p + 1, p + 1, p + 1, nvar) for p in degrees]
        sizes = [int(np.prod(shape)) for shape in self.shapes]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    @property
    def size(self):
        return int(self.offsets[-1])

    def pack(self, arrays):
        return np.concatenate([np.asarray(a, dtype=float).reshape(-1) for a in arrays])

    def unpack(self, y):
        y = np.asarray(y)
        if y.shape != (self.size,):
            raise ContractViolation(f"state vector of length {y.size}, expected {self.size}")
        return [y[self.offsets[e]:self.offsets[e + 1]].reshape(shape)
                for e, shape in enumerate(self.shapes)]

    def element_of(self, index):
        return int(np.searchsorted(self.offsets, index, side='right') - 1)


def _flat(face_array):
    return face_array.reshape(-1, face_array.shape[-1])


def _normal_flux(metric, flux):
    return np.einsum('...m,...mk->...k', metric, flux)


class Discretization:
    """
    Right-hand side operator for one mesh, its metrics and a physics object.

    Args:
        mesh: Mesh.
        metrics: List of ElementMetrics from setup_metrics.
        physics: EulerPhysics, ConvectionPhysics or BurgersPhysics.
        dissipation: Add entropy-variable interface dissipation.
        exact: Callable (x, t) -> q for Dirichlet ghost states.
        threads: Worker threads for the volume terms.
        dense_faces: Use the dense face path on conforming faces too.
    """

    def __init__(self, mesh, metrics, physics, dissipation=True, exact=None, threads=1,
                 dense_faces=False):
        if len(metrics) != mesh.n_elements:
            raise ContractViolation("one ElementMetrics per element is required")
        if mesh.boundary_faces and exact is None:
            raise ContractViolation("Dirichlet boundaries need an exact-state provider")
        self.mesh = mesh
        self.metrics = metrics
        self.physics = physics
        self.dissipation = bool(dissipation)
        self.exact = exact
        self.threads = max(1, int(threads or 1))
        self.dense_faces = bool(dense_faces)
        self.layout = StateLayout(mesh.degrees, physics.nvar)
        self.mass = [volume_weights(build_sbp_1d(p)) for p in mesh.degrees]
        self.scale = [m * em.jacobian for m, em in zip(self.mass, metrics)]
        self.couplings = [self._build_coupling(face) for face in mesh.faces]

    def _build_coupling(self, face):
        owner = self.metrics[face.owner]
        w_owner = face_weights(build_sbp_1d(owner.degree)).reshape(-1)
        if face.boundary:
            coords = extract_face(element_lgl_coordinates(self.mesh.elements[face.owner], owner.degree),
                                  face.axis, face.side)
            return FaceCoupling(face=face, p_owner=owner.degree, p_neighbor=None,
                                weights_owner=w_owner, weights_neighbor=None,
                                metric_owner=_flat(owner.face_metric(face.axis, face.side)),
                                metric_neighbor=None, coordinates=_flat(coords))
        neighbor = self.metrics[face.neighbor]
        to_owner = to_neighbor = None
        if owner.degree != neighbor.degree or self.dense_faces:
            i_up = interpolation_matrix(neighbor.degree, owner.degree)
            i_down = interpolation_matrix(owner.degree, neighbor.degree)
            to_owner = np.kron(i_up, i_up)
            to_neighbor = np.kron(i_down, i_down)
        return FaceCoupling(face=face, p_owner=owner.degree, p_neighbor=neighbor.degree,
                            weights_owner=w_owner,
                            weights_neighbor=face_weights(build_sbp_1d(neighbor.degree)).reshape(-1),
                            metric_owner=_flat(owner.face_metric(face.axis, +1)),
                            metric_neighbor=_flat(neighbor.face_metric(face.axis, -1)),
                            to_owner=to_owner, to_neighbor=to_neighbor)

    # Element terms

    def volume_terms(self, element, q):
        """
        sum_{l,m} (D_l A_lm + A_lm D_l) o F_m(q, q) 1 for one element, evaluated
        line by line along each computational axis.
        """
        em = self.metrics[element]
        D = build_sbp_1d(em.degree).D
        result = np.zeros(q.shape)
        for l in (1, 2, 3):
            line = np.moveaxis(q, l - 1, 0)
            a = np.moveaxis(em.metric[..., l - 1, :], l - 1, 0)
            F = self.physics.two_point_flux(line[:, None], line[None, :])
            pair_metric = a[:, None] + a[None, :]
            part = np.einsum('ij,ij...m,ij...mk->i...k', D, pair_metric, F)
            result += np.moveaxis(part, 0, l - 1)
        return result

    def own_face_term(self, element, axis, side, q_face):
        """side * W * sum_m Ja_{axis,m} f_m(q) on one face (flattened)."""
        em = self.metrics[element]
        a = _flat(extract_face(em.metric, axis, side)[..., axis - 1, :])
        weights = face_weights(build_sbp_1d(em.degree)).reshape(-1)
        return side * weights[:, None] * _normal_flux(a, self.physics.flux(q_face))

    # Face terms

    def coupling(self, fc, q_owner, q_neighbor):
        """
        Entropy-conservative coupling on an interior face.

        Returns:
            (owner_part, neighbor_part), flattened face arrays whose node sums
            cancel.
        """
        if fc.conforming:
            F = self.physics.two_point_flux(q_owner, q_neighbor)
            G = 0.5 * fc.weights_owner[:, None] * _normal_flux(fc.metric_owner + fc.metric_neighbor, F)
            return -G, G
        F = self.physics.two_point_flux(q_owner[:, None], q_neighbor[None, :])
        pair_metric = fc.metric_owner[:, None] + fc.metric_neighbor[None, :]
        G = 0.5 * (fc.weights_owner[:, None] * fc.to_owner)[..., None] * _normal_flux(pair_metric, F)
        return -np.sum(G, axis=1), np.sum(G, axis=0)

    def interface_sat(self, fc, q_owner, q_neighbor):
        """Own-face terms plus the entropy-conservative coupling of both sides."""
        c_owner, c_neighbor = self.coupling(fc, q_owner, q_neighbor)
        face = fc.face
        return (self.own_face_term(face.owner, face.axis, +1, q_owner) + c_owner,
                self.own_face_term(face.neighbor, face.axis, -1, q_neighbor) + c_neighbor)

    def interface_dissipation(self, fc, q_owner, q_neighbor):
        """
        Entropy-variable dissipation on an interior face, with the jump
        formed on each side after interpolating the other side's w.
        """
        physics = self.physics
        face = fc.face
        w_owner = physics.entropy_variables(q_owner)
        w_neighbor = physics.entropy_variables(q_neighbor)
        if fc.conforming:
            w_at_owner, q_at_owner = w_neighbor, q_neighbor
            w_at_neighbor, q_at_neighbor = w_owner, q_owner
        else:
            w_at_owner = fc.to_owner @ w_neighbor
            w_at_neighbor = fc.to_neighbor @ w_owner
            q_at_owner = physics.entropy_to_conservative(w_at_owner, element=face.owner)
            q_at_neighbor = physics.entropy_to_conservative(w_at_neighbor, element=face.neighbor)
        lam_owner = physics.dissipation_matrix(q_owner, q_at_owner, fc.metric_owner)
        lam_neighbor = physics.dissipation_matrix(q_neighbor, q_at_neighbor, fc.metric_neighbor)
        jump_owner = np.einsum('nij,nj->ni', lam_owner, w_owner - w_at_owner)
        jump_neighbor = np.einsum('nij,nj->ni', lam_neighbor, w_neighbor - w_at_neighbor)
        if fc.conforming:
            back_owner, back_neighbor = jump_neighbor, jump_owner
        else:
            back_owner = fc.to_owner @ jump_neighbor
            back_neighbor = fc.to_neighbor @ jump_owner
        return (-0.5 * fc.weights_owner[:, None] * (jump_owner - back_owner),
                -0.5 * fc.weights_neighbor[:, None] * (jump_neighbor - back_neighbor))

    def ghost_state(self, fc, t):
        try:
            ghost = np.asarray(self.exact(fc.coordinates, t), dtype=float)
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise StateError(f"boundary state provider failed on face {fc.face.index}: {e}",
                             element=fc.face.owner) from e
        if ghost.shape != (len(fc.coordinates), self.physics.nvar):
            raise ContractViolation(f"boundary state of shape {ghost.shape} on face {fc.face.index}")
        return ghost

    def boundary_coupling(self, fc, q_face, t):
        """Coupling plus optional dissipation against the exact ghost state; node sums give g_f."""
        face = fc.face
        ghost = self.ghost_state(fc, t)
        self.physics.check_state(ghost, element=face.owner)
        F = self.physics.two_point_flux(q_face, ghost)
        part = -face.side * fc.weights_owner[:, None] * _normal_flux(fc.metric_owner, F)
        if self.dissipation:
            lam = self.physics.dissipation_matrix(q_face, ghost, fc.metric_owner)
            jump = self.physics.entropy_variables(q_face) - self.physics.entropy_variables(ghost)
            part = part - fc.weights_owner[:, None] * np.einsum('nij,nj->ni', lam, jump)
        return part

    def boundary_sat(self, fc, q_face, t):
        face = fc.face
        return self.own_face_term(face.owner, face.axis, face.side, q_face) + self.boundary_coupling(fc, q_face, t)

    # Assembly

    def face_states(self, fc, state):
        face = fc.face
        q_owner = _flat(extract_face(state[face.owner], face.axis, face.side))
        if face.boundary:
            return q_owner, None
        return q_owner, _flat(extract_face(state[face.neighbor], face.axis, -1))

    def _add_face(self, target, element, axis, side, values):
        n = self.metrics[element].degree + 1
        target[element][face_index(axis, side)] += values.reshape(n, n, -1)

    def residual(self, state, t=0.0):
        """
        Assemble the residual for a list of element states.

        Returns:
            Residual with dq/dt and the M J-scaled right-hand side per element.

        Raises:
            StateError: non-physical or non-finite data, located by element and node.
        """
        if len(state) != self.mesh.n_elements:
            raise ContractViolation(f"{len(state)} element states for {self.mesh.n_elements} elements")
        for e, q in enumerate(state):
            self.physics.check_state(q, element=e)

        def volume(e):
            return -self.mass[e][..., None] * self.volume_terms(e, state[e])

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                scaled = list(pool.map(volume, range(self.mesh.n_elements)))
        else:
            scaled = [volume(e) for e in range(self.mesh.n_elements)]

        for fc in self.couplings:
            face = fc.face
            q_owner, q_neighbor = self.face_states(fc, state)
            if face.boundary:
                self._add_face(scaled, face.owner, face.axis, face.side, self.boundary_sat(fc, q_owner, t))
                continue
            sat_owner, sat_neighbor = self.interface_sat(fc, q_owner, q_neighbor)
            self._add_face(scaled, face.owner, face.axis, +1, sat_owner)
            self._add_face(scaled, face.neighbor, face.axis, -1, sat_neighbor)
            if self.dissipation:
                diss_owner, diss_neighbor = self.interface_dissipation(fc, q_owner, q_neighbor)
                self._add_face(scaled, face.owner, face.axis, +1, diss_owner)
                self._add_face(scaled, face.neighbor, face.axis, -1, diss_neighbor)

        dqdt = []
        for e, part in enumerate(scaled):
            rate = part / self.scale[e][..., None]
            bad = ~np.isfinite(rate)
            if np.any(bad):
                node = tuple(np.argwhere(bad)[0][:3])
                raise StateError("non-finite residual", element=e, node=node)
            dqdt.append(rate)
        assembled = {"volume": True, "interface": bool(self.mesh.interior_faces),
                     "dissipation": self.dissipation, "boundary": bool(self.mesh.boundary_faces)}
        return Residual(dqdt=dqdt, scaled=scaled, assembled=assembled)

    def rhs(self, t, y):
        """Flat-vector right-hand side for the time integrator."""
        return self.layout.pack(self.residual(self.layout.unpack(y), t).dqdt)

    def face_fluxes(self, state, t=0.0):
        """
        Telescoping flux of every face: node sums of the coupling and
        dissipation contributions per side.

        Returns:
            Dict face index -> (g_owner, g_neighbor); g_neighbor is None on
            boundary faces.
        """
        fluxes = {}
        for fc in self.couplings:
            q_owner, q_neighbor = self.face_states(fc, state)
            if fc.face.boundary:
                fluxes[fc.face.index] = (np.sum(self.boundary_coupling(fc, q_owner, t), axis=0), None)
                continue
            c_owner, c_neighbor = self.coupling(fc, q_owner, q_neighbor)
            if self.dissipation:
                d_owner, d_neighbor = self.interface_dissipation(fc, q_owner, q_neighbor)
                c_owner, c_neighbor = c_owner + d_owner, c_neighbor + d_neighbor
            fluxes[fc.face.index] = (np.sum(c_owner, axis=0), np.sum(c_neighbor, axis=0))
        return fluxes

    def nodal_coordinates(self):
        return [element_lgl_coordinates(element, p) for element, p in zip(self.mesh.elements, self.mesh.degrees)]

    def project(self, function: Callable, t=0.0):
        """Evaluate function(x, t) -> q at every element's LGL nodes."""
        return [np.asarray(function(x, t), dtype=float) for x in self.nodal_coordinates()]
