"""
Structured hexahedral block meshes with tensor Lagrange geometry.

Each element carries a (p_g+1)^3 control net on equispaced reference nodes,
cut from one global control grid so neighbouring elements share their face
nodes exactly. Solution degrees are drawn per element from a seeded
generator.
"""

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from constants import MAX_PERTURBATION
from errors import ConfigError, GeometryError
from sbp import build_sbp_1d, lagrange_basis


@dataclass(frozen=True)
class GeometricElement:
    index: int
    block_index: Tuple[int, int, int]
    control_nodes: np.ndarray

    @property
    def geometry_degree(self):
        return self.control_nodes.shape[0] - 1


@dataclass(frozen=True)
class FaceRecord:
    """
    One face of the block. Interior faces join the owner's xi_axis = +1 face
    to the neighbour's xi_axis = -1 face; boundary faces have no neighbour
    and `side` tells which face of the owner they are.
    """

    index: int
    owner: int
    neighbor: Optional[int]
    axis: int
    side: int
    conforming: bool
    periodic: bool

    @property
    def boundary(self):
        return self.neighbor is None


@dataclass(frozen=True)
class Mesh:
    shape: Tuple[int, int, int]
    bounds: Tuple[Tuple[float, float], ...]
    geometry_degree: int
    control_grid: np.ndarray
    elements: Tuple[GeometricElement, ...]
    degrees: Tuple[int, ...]
    faces: Tuple[FaceRecord, ...]
    element_faces: np.ndarray
    seed: int
    boundary: str
    amplitude: float = 0.0
    degree_set: Tuple[int, ...] = ()

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def interior_faces(self):
        return [face for face in self.faces if not face.boundary]

    @property
    def boundary_faces(self):
        return [face for face in self.faces if face.boundary]

    def face_partner(self, element, axis, side):
        """
        Face record and partner element for one face of `element`.

        Returns:
            (face, partner) where partner is None on a domain boundary.
        """
        face = self.faces[self.element_faces[element, axis - 1, 1 if side > 0 else 0]]
        if face.boundary:
            return face, None
        if side > 0:
            return face, face.neighbor
        return face, face.owner


def element_number(shape, e1, e2, e3):
    return e1 + shape[0] * (e2 + shape[1] * e3)


def _validate_block(n_per_axis, bounds, degree_set):
    if len(n_per_axis) != 3 or any(int(n) < 1 for n in n_per_axis):
        raise ConfigError(f"element counts must be three integers >= 1, got {n_per_axis}")
    if len(bounds) != 3:
        raise ConfigError("bounds must hold one interval per axis")
    for lo, hi in bounds:
        if not hi > lo:
            raise ConfigError(f"non-positive extent in bounds {bounds}")
    if not degree_set:
        raise ConfigError("degree set is empty")
    for p in degree_set:
        build_sbp_1d(int(p))


def _cut_elements(grid, shape, geometry_degree):
    pg = geometry_degree
    elements = []
    for e3 in range(shape[2]):
        for e2 in range(shape[1]):
            for e1 in range(shape[0]):
                nodes = grid[pg * e1:pg * e1 + pg + 1,
                             pg * e2:pg * e2 + pg + 1,
                             pg * e3:pg * e3 + pg + 1].copy()
                nodes.setflags(write=False)
                elements.append(GeometricElement(
                    index=element_number(shape, e1, e2, e3),
                    block_index=(e1, e2, e3),
                    control_nodes=nodes))
    return tuple(elements)


def _build_faces(shape, degrees, periodic):
    faces = []
    n_el = shape[0] * shape[1] * shape[2]
    element_faces = np.full((n_el, 3, 2), -1, dtype=int)
    for axis in (1, 2, 3):
        for e3 in range(shape[2]):
            for e2 in range(shape[1]):
                for e1 in range(shape[0]):
                    idx = [e1, e2, e3]
                    owner = element_number(shape, *idx)
                    position = idx[axis - 1]
                    if position == 0 and not periodic:
                        face = FaceRecord(len(faces), owner, None, axis, -1, True, False)
                        element_faces[owner, axis - 1, 0] = face.index
                        faces.append(face)
                    upper = list(idx)
                    wraps = position == shape[axis - 1] - 1
                    if wraps and not periodic:
                        face = FaceRecord(len(faces), owner, None, axis, +1, True, False)
                        element_faces[owner, axis - 1, 1] = face.index
                        faces.append(face)
                        continue
                    upper[axis - 1] = 0 if wraps else position + 1
                    neighbor = element_number(shape, *upper)
                    face = FaceRecord(len(faces), owner, neighbor, axis, +1,
                                      degrees[owner] == degrees[neighbor], wraps)
                    element_faces[owner, axis - 1, 1] = face.index
                    element_faces[neighbor, axis - 1, 0] = face.index
                    faces.append(face)
    element_faces.setflags(write=False)
    return tuple(faces), element_faces


def build_block_mesh(n_per_axis, bounds, degree_set, seed=0, boundary="periodic",
                     geometry_degree=None):
    """
    Build an unperturbed block of n1 x n2 x n3 hexahedra.

    Args:
        n_per_axis: Element counts per axis.
        bounds: ((x1_lo, x1_hi), (x2_lo, x2_hi), (x3_lo, x3_hi)).
        degree_set: Admissible solution degrees; each element draws one uniformly.
        seed: Seed for the degree draws.
        boundary: "periodic" or "dirichlet".
        geometry_degree: Degree of the geometric map; defaults to
            min(2, min(degree_set)) so face quadrature resolves surface metrics.

    Returns:
        Mesh
    """
    n_per_axis = tuple(int(n) for n in n_per_axis)
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    degree_set = sorted({int(p) for p in degree_set})
    _validate_block(n_per_axis, bounds, degree_set)
    if boundary not in ("periodic", "dirichlet"):
        raise ConfigError(f"unknown boundary type '{boundary}'")
    if geometry_degree is None or geometry_degree == 0:
        geometry_degree = min(2, degree_set[0])
    if geometry_degree not in (1, 2):
        raise ConfigError(f"geometry degree must be 1 or 2, got {geometry_degree}")

    rng = np.random.default_rng(seed)
    n_el = n_per_axis[0] * n_per_axis[1] * n_per_axis[2]
    draws = rng.integers(0, len(degree_set), size=n_el)
    degrees = tuple(int(degree_set[k]) for k in draws)

    axes = [np.linspace(lo, hi, geometry_degree * n + 1) for (lo, hi), n in zip(bounds, n_per_axis)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    grid.setflags(write=False)

    faces, element_faces = _build_faces(n_per_axis, degrees, boundary == "periodic")
    return Mesh(shape=n_per_axis, bounds=bounds, geometry_degree=geometry_degree,
                control_grid=grid, elements=_cut_elements(grid, n_per_axis, geometry_degree),
                degrees=degrees, faces=faces, element_faces=element_faces,
                seed=int(seed), boundary=boundary, degree_set=tuple(degree_set))


def perturbation_displacement(points, bounds, amplitude):
    """Trigonometric control-node displacement; vanishes on the domain boundary."""
    center = np.array([(lo + hi) / 2 for lo, hi in bounds])
    length = np.array([hi - lo for lo, hi in bounds])
    a, b, c = [np.pi * (points[..., m] - center[m]) / length[m] for m in range(3)]
    shift = np.empty_like(points)
    shift[..., 0] = amplitude * length[0] * np.cos(a) * np.cos(3 * b) * np.sin(4 * c)
    shift[..., 1] = amplitude * length[1] * np.sin(4 * a) * np.cos(b) * np.cos(3 * c)
    shift[..., 2] = amplitude * length[2] * np.cos(3 * a) * np.sin(4 * b) * np.cos(c)
    return shift


def perturb_control_nodes(mesh, amplitude):
    """
    Move every control node of the global grid by the trigonometric
    displacement, then re-cut the element control nets.

    Raises:
        ConfigError: amplitude outside [0, 1/15].
        GeometryError: an element Jacobian is non-positive at the LGL nodes of
            some admissible degree.
    """
    if amplitude < 0 or amplitude > MAX_PERTURBATION * (1 + 1e-12):
        raise ConfigError(f"perturbation amplitude {amplitude} outside [0, 1/15]")
    if amplitude == 0:
        return mesh
    grid = np.array(mesh.control_grid)
    shift = perturbation_displacement(grid, mesh.bounds, amplitude)
    # analytically zero on the boundary planes; keep periodic faces identical
    for axis in range(3):
        index = [slice(None)] * 3
        for end in (0, -1):
            index[axis] = end
            shift[tuple(index)] = 0.0
    grid = grid + shift
    grid.setflags(write=False)
    elements = _cut_elements(grid, mesh.shape, mesh.geometry_degree)
    perturbed = dataclasses.replace(mesh, control_grid=grid, elements=elements,
                                    amplitude=float(amplitude))
    degree_set = mesh.degree_set or tuple(sorted(set(mesh.degrees)))
    for element in elements:
        for p in degree_set:
            jac = map_jacobian(element, p)
            if np.min(jac) <= 0:
                raise GeometryError(f"non-positive Jacobian {np.min(jac):.3e} at degree {p} after perturbation",
                                    element=element.index)
    return perturbed


@lru_cache(maxsize=None)
def geometry_basis(geometry_degree, p):
    """Lagrange basis of the geometric map evaluated at the degree-p LGL nodes."""
    control = np.linspace(-1.0, 1.0, geometry_degree + 1)
    B, dB = lagrange_basis(control, build_sbp_1d(p).nodes)
    B.setflags(write=False)
    dB.setflags(write=False)
    return B, dB


def element_lgl_coordinates(element, p):
    """Physical coordinates of the (p+1)^3 LGL nodes, shape (N, N, N, 3)."""
    B, _ = geometry_basis(element.geometry_degree, p)
    return np.einsum('ia,jb,kc,abcm->ijkm', B, B, B, element.control_nodes)


def map_derivatives(element, p):
    """
    Exact derivatives of the geometric map at the LGL nodes.

    Returns:
        (N, N, N, 3, 3) array; [..., l, m] = d x_m / d xi_l.
    """
    B, dB = geometry_basis(element.geometry_degree, p)
    X = element.control_nodes
    return np.stack([
        np.einsum('ia,jb,kc,abcm->ijkm', dB, B, B, X),
        np.einsum('ia,jb,kc,abcm->ijkm', B, dB, B, X),
        np.einsum('ia,jb,kc,abcm->ijkm', B, B, dB, X),
    ], axis=3)


def map_jacobian(element, p):
    """Determinant of the map derivative at the LGL nodes, shape (N, N, N)."""
    d = map_derivatives(element, p)
    return np.einsum('...m,...m->...', d[..., 0, :], np.cross(d[..., 1, :], d[..., 2, :]))


def dump_mesh(mesh, path):
    """Write a plain-text debug dump: control nets, degrees and the face table."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"shape {mesh.shape[0]} {mesh.shape[1]} {mesh.shape[2]}\n")
        f.write(f"bounds {' '.join(f'{lo:.17g} {hi:.17g}' for lo, hi in mesh.bounds)}\n")
        f.write(f"geometry_degree {mesh.geometry_degree}\n")
        f.write(f"seed {mesh.seed} boundary {mesh.boundary} amplitude {mesh.amplitude:.17g}\n")
        for element in mesh.elements:
            f.write(f"element {element.index} block {element.block_index} "
                    f"degree {mesh.degrees[element.index]}\n")
            for point in element.control_nodes.reshape(-1, 3, order='F'):
                f.write(f"  {point[0]:.17g} {point[1]:.17g} {point[2]:.17g}\n")
        for face in mesh.faces:
            neighbor = "boundary" if face.boundary else face.neighbor
            f.write(f"face {face.index} owner {face.owner} neighbor {neighbor} axis {face.axis} "
                    f"side {face.side} conforming {int(face.conforming)} periodic {int(face.periodic)}\n")
