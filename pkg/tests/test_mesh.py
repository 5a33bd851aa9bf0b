import unittest
from unittest.mock import patch
import os
import sys
import tempfile
from collections import Counter

import numpy as np

sys.path.insert(0, os.path.abspath(
    os.path.join(os.path.dirname(__file__), '..', 'src')))

from errors import ConfigError, GeometryError
from mesh import (build_block_mesh, dump_mesh, element_lgl_coordinates, map_jacobian,
                  perturb_control_nodes, perturbation_displacement)
from sbp import build_sbp_1d, extract_face

CUBE = ((-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0))


class TestBlockMesh(unittest.TestCase):

    def test_single_element_dirichlet(self):
        mesh = build_block_mesh((1, 1, 1), ((0, 1), (0, 1), (0, 1)), {2}, boundary="dirichlet")
        self.assertEqual(mesh.n_elements, 1)
        self.assertEqual(len(mesh.boundary_faces), 6)
        self.assertEqual(len(mesh.interior_faces), 0)
        self.assertEqual(sorted((f.axis, f.side) for f in mesh.faces),
                         [(1, -1), (1, 1), (2, -1), (2, 1), (3, -1), (3, 1)])

    def test_two_elements_periodic(self):
        mesh = build_block_mesh((2, 1, 1), CUBE, {2}, boundary="periodic")
        self.assertEqual(len(mesh.boundary_faces), 0)
        axis1 = [f for f in mesh.faces if f.axis == 1]
        self.assertEqual(len(axis1), 2)
        self.assertEqual(sum(f.periodic for f in axis1), 1)
        for axis in (2, 3):
            wraps = [f for f in mesh.faces if f.axis == axis]
            self.assertEqual(len(wraps), 2)
            self.assertTrue(all(f.periodic and f.owner == f.neighbor for f in wraps))

    def test_every_face_slot_filled(self):
        mesh = build_block_mesh((3, 2, 2), CUBE, {1, 2}, boundary="dirichlet")
        self.assertTrue(np.all(mesh.element_faces >= 0))
        interior = mesh.interior_faces
        self.assertEqual(len(interior), 2 * 2 * 2 + 3 * 1 * 2 + 3 * 2 * 1)
        for face in interior:
            self.assertEqual(face.conforming, mesh.degrees[face.owner] == mesh.degrees[face.neighbor])

    def test_face_partner(self):
        mesh = build_block_mesh((2, 1, 1), CUBE, {2}, boundary="dirichlet")
        face, partner = mesh.face_partner(0, 1, +1)
        self.assertEqual(partner, 1)
        self.assertIs(mesh.face_partner(1, 1, -1)[0], face)
        self.assertEqual(mesh.face_partner(1, 1, -1)[1], 0)
        self.assertIsNone(mesh.face_partner(0, 1, -1)[1])

    def test_degree_histogram(self):
        mesh = build_block_mesh((10, 10, 10), CUBE, {2, 3, 4, 5}, seed=2024)
        counts = Counter(mesh.degrees)
        self.assertEqual(set(counts), {2, 3, 4, 5})
        for degree in (2, 3, 4, 5):
            self.assertLessEqual(abs(counts[degree] - 250), 0.15 * 250)

    def test_deterministic_for_seed(self):
        first = build_block_mesh((4, 4, 4), CUBE, {2, 3, 4}, seed=7)
        second = build_block_mesh((4, 4, 4), CUBE, {2, 3, 4}, seed=7)
        self.assertEqual(first.degrees, second.degrees)
        first = perturb_control_nodes(first, 1 / 15)
        second = perturb_control_nodes(second, 1 / 15)
        np.testing.assert_array_equal(first.control_grid, second.control_grid)

    def test_default_geometry_degree(self):
        self.assertEqual(build_block_mesh((1, 1, 1), CUBE, {1, 2}).geometry_degree, 1)
        self.assertEqual(build_block_mesh((1, 1, 1), CUBE, {2, 3}).geometry_degree, 2)

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigError):
            build_block_mesh((1, 1, 1), CUBE, set())
        with self.assertRaises(ConfigError):
            build_block_mesh((1, 1, 1), ((0, 1), (1, 1), (0, 1)), {2})
        with self.assertRaises(ConfigError):
            build_block_mesh((0, 1, 1), CUBE, {2})


class TestPerturbation(unittest.TestCase):

    def test_zero_amplitude_is_identity(self):
        mesh = build_block_mesh((2, 2, 2), CUBE, {2})
        self.assertIs(perturb_control_nodes(mesh, 0.0), mesh)

    def test_center_not_displaced(self):
        shift = perturbation_displacement(np.zeros((1, 3)), CUBE, 1 / 15)
        np.testing.assert_allclose(shift, 0.0, atol=1e-15)

    def test_boundary_nodes_fixed(self):
        mesh = perturb_control_nodes(build_block_mesh((4, 4, 4), CUBE, {2}), 1 / 15)
        base = build_block_mesh((4, 4, 4), CUBE, {2})
        for axis in range(3):
            for end in (0, -1):
                index = [slice(None)] * 3
                index[axis] = end
                np.testing.assert_array_equal(mesh.control_grid[tuple(index)],
                                              base.control_grid[tuple(index)])
        self.assertGreater(np.max(np.abs(mesh.control_grid - base.control_grid)), 1e-2)

    def test_positive_jacobian(self):
        mesh = perturb_control_nodes(build_block_mesh((4, 4, 4), CUBE, {2, 3, 4}, seed=1), 1 / 15)
        for element in mesh.elements:
            self.assertGreater(np.min(map_jacobian(element, mesh.degrees[element.index])), 0.0)
            for p in mesh.degree_set:
                self.assertGreater(np.min(map_jacobian(element, p)), 0.0)

    def test_degree_set_recorded(self):
        mesh = build_block_mesh((4, 4, 4), CUBE, {4, 2, 3})
        self.assertEqual(mesh.degree_set, (2, 3, 4))
        self.assertEqual(perturb_control_nodes(mesh, 1 / 15).degree_set, (2, 3, 4))

    def test_jacobian_checked_at_every_admissible_degree(self):
        base = build_block_mesh((2, 2, 2), CUBE, {2, 4}, seed=3)

        def jacobian(element, p):
            sign = 1.0 if p == base.degrees[element.index] else -1.0
            return np.full((p + 1, p + 1, p + 1), sign)

        with patch("mesh.map_jacobian", side_effect=jacobian):
            with self.assertRaises(GeometryError) as ctx:
                perturb_control_nodes(base, 1 / 15)
        self.assertEqual(ctx.exception.element, 0)
        self.assertIn("at degree", str(ctx.exception))

    def test_amplitude_range(self):
        mesh = build_block_mesh((2, 2, 2), CUBE, {2})
        with self.assertRaises(ConfigError):
            perturb_control_nodes(mesh, 0.1)


class TestCoordinates(unittest.TestCase):

    def test_affine_element(self):
        mesh = build_block_mesh((1, 1, 1), ((0, 2), (1, 2), (-1, 3)), {3})
        coords = element_lgl_coordinates(mesh.elements[0], 3)
        xi = build_sbp_1d(3).nodes
        expected = [lo + (xi + 1) * (hi - lo) / 2 for lo, hi in mesh.bounds]
        np.testing.assert_allclose(coords[:, 0, 0, 0], expected[0], atol=1e-14)
        np.testing.assert_allclose(coords[0, :, 0, 1], expected[1], atol=1e-14)
        np.testing.assert_allclose(coords[0, 0, :, 2], expected[2], atol=1e-14)

    def test_corner_is_control_node(self):
        mesh = perturb_control_nodes(build_block_mesh((4, 4, 4), CUBE, {2, 3}), 1 / 15)
        element = mesh.elements[3]
        coords = element_lgl_coordinates(element, mesh.degrees[3])
        np.testing.assert_allclose(coords[0, 0, 0], element.control_nodes[0, 0, 0], atol=1e-14)

    def test_water_tight_faces(self):
        mesh = perturb_control_nodes(build_block_mesh((4, 4, 4), CUBE, {2, 3, 4}, seed=3), 1 / 15)
        for face in mesh.interior_faces:
            if face.periodic:
                continue
            for p in {mesh.degrees[face.owner], mesh.degrees[face.neighbor]}:
                own = extract_face(element_lgl_coordinates(mesh.elements[face.owner], p), face.axis, +1)
                other = extract_face(element_lgl_coordinates(mesh.elements[face.neighbor], p), face.axis, -1)
                np.testing.assert_allclose(own, other, atol=1e-13)

    def test_dump_mesh(self):
        mesh = build_block_mesh((2, 1, 1), CUBE, {2}, boundary="dirichlet")
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "mesh.txt")
            dump_mesh(mesh, path)
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        self.assertIn("element 1", text)
        self.assertEqual(text.count("\nface "), len(mesh.faces))


if __name__ == '__main__':
    unittest.main()
