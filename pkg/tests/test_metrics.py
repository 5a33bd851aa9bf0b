import unittest
from unittest.mock import patch
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(
    os.path.join(os.path.dirname(__file__), '..', 'src')))

from constants import EXIT_GCL_INFEASIBLE
from errors import GclInfeasibleError
from mesh import build_block_mesh, perturb_control_nodes
from metrics import (analytic_metrics, assemble_gcl_rhs, constraint_residual, constraint_svd,
                     face_metrics_from_volume, gcl_residual, kron_q_operators,
                     optimize_metrics, setup_metrics, thomas_lombard_metrics)

CUBE = ((-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0))


def perturbed_mesh(degrees=(2, 3, 4), seed=11, boundary="periodic"):
    return perturb_control_nodes(build_block_mesh((4, 4, 4), CUBE, set(degrees), seed=seed,
                                                  boundary=boundary), 1 / 15)


class TestVolumeMetrics(unittest.TestCase):

    def test_affine_element(self):
        mesh = build_block_mesh((1, 1, 1), ((0, 2), (0, 1), (0, 4)), {3})
        for compute in (analytic_metrics, thomas_lombard_metrics):
            J, a = compute(mesh.elements[0], 3)
            np.testing.assert_allclose(J, 1.0, atol=1e-13)
            expected = np.diag([1.0 * 4 / 4, 2.0 * 4 / 4, 2.0 * 1 / 4])
            np.testing.assert_allclose(a, np.broadcast_to(expected, a.shape), atol=1e-13)

    def test_identity_map(self):
        mesh = build_block_mesh((1, 1, 1), ((-1, 1), (-1, 1), (-1, 1)), {2})
        J, a = analytic_metrics(mesh.elements[0], 2)
        np.testing.assert_allclose(J, 1.0, atol=1e-15)
        np.testing.assert_allclose(a, np.broadcast_to(np.eye(3), a.shape), atol=1e-15)

    def test_thomas_lombard_matches_analytic_when_resolved(self):
        mesh = perturbed_mesh(degrees=(4,))
        for element in mesh.elements[:8]:
            for p in (4, 5):
                _, exact = analytic_metrics(element, p)
                _, curl = thomas_lombard_metrics(element, p)
                np.testing.assert_allclose(curl, exact, atol=1e-12 * np.max(np.abs(exact)))

    def test_cartesian_divergence_free(self):
        mesh = build_block_mesh((1, 1, 1), ((0, 1), (0, 1), (0, 1)), {3}, boundary="dirichlet")
        metrics = setup_metrics(mesh, optimize=False)
        _, worst = gcl_residual(metrics[0])
        self.assertLessEqual(worst, 1e-13)


class TestGclForcing(unittest.TestCase):

    def test_cartesian_forcing_integrates_to_zero(self):
        mesh = build_block_mesh((2, 2, 2), ((0, 1), (0, 1), (0, 1)), {2}, boundary="dirichlet")
        face_data = [face_metrics_from_volume(analytic_metrics(e, 2)[1]) for e in mesh.elements]
        for index in range(mesh.n_elements):
            c = assemble_gcl_rhs(index, mesh, face_data)
            np.testing.assert_allclose(np.sum(c, axis=(0, 1, 2)), 0.0, atol=1e-15)

    def test_periodic_self_coupling_matches_boundary(self):
        bounds = ((0, 1), (0, 2), (0, 3))
        periodic = build_block_mesh((1, 1, 1), bounds, {3}, boundary="periodic")
        bounded = build_block_mesh((1, 1, 1), bounds, {3}, boundary="dirichlet")
        face_data = [face_metrics_from_volume(analytic_metrics(periodic.elements[0], 3)[1])]
        np.testing.assert_allclose(assemble_gcl_rhs(0, periodic, face_data),
                                   assemble_gcl_rhs(0, bounded, face_data), atol=1e-15)

    def test_integral_constraint_on_perturbed_mesh(self):
        mesh = perturbed_mesh()
        for face_seed in ("analytic", "thomas_lombard"):
            for em in setup_metrics(mesh, face_seed=face_seed, optimize=False):
                for m in range(3):
                    c = em.forcing[..., m]
                    self.assertLessEqual(abs(np.sum(c)), 1e-12 * np.sum(np.abs(c)))


class TestOptimization(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = perturbed_mesh()
        cls.metrics = setup_metrics(cls.mesh)

    def test_residual_after_optimization(self):
        for em in self.metrics:
            _, worst = gcl_residual(em)
            self.assertLessEqual(worst, 1e-12 * em.scale)

    def test_optimization_does_work(self):
        before = [np.max(np.abs(constraint_residual(em.target, em.forcing, em.degree))) / em.scale
                  for em in self.metrics]
        self.assertGreater(max(before), 1e-8)

    def test_jacobian_not_optimized(self):
        for em in self.metrics[:4]:
            J, _ = analytic_metrics(self.mesh.elements[em.element], em.degree)
            np.testing.assert_array_equal(em.jacobian, J)

    def test_idempotent(self):
        for em in self.metrics[:6]:
            again = optimize_metrics(em.metric, em.forcing, em.degree)
            np.testing.assert_allclose(again, em.metric, atol=1e-13 * em.scale)

    def test_feasible_targets_unchanged(self):
        mesh = build_block_mesh((2, 2, 2), ((0, 1), (0, 1), (0, 1)), {2, 3}, seed=4)
        for em in setup_metrics(mesh):
            np.testing.assert_allclose(em.metric, em.target, atol=1e-13)

    def test_minimum_norm_correction(self):
        rng = np.random.default_rng(0)
        em = self.metrics[0]
        n3 = (em.degree + 1) ** 3
        q1, q2, q3 = kron_q_operators(em.degree)
        M = np.hstack([q1.T, q2.T, q3.T])
        _, _, Vt, rank = constraint_svd(em.degree)
        correction = np.concatenate([(em.metric - em.target)[..., l, 0].reshape(-1, order='F')
                                     for l in range(3)])
        for _ in range(5):
            delta = rng.standard_normal(3 * n3)
            delta -= Vt[:rank].T @ (Vt[:rank] @ delta)
            np.testing.assert_allclose(M @ delta, 0.0, atol=1e-10)
            self.assertLessEqual(np.linalg.norm(correction), np.linalg.norm(correction + delta))

    def test_infeasible_forcing(self):
        em = self.metrics[0]
        forcing = np.array(em.forcing)
        forcing[..., 1] += 1.0
        with self.assertRaises(GclInfeasibleError):
            optimize_metrics(em.target, forcing, em.degree, element=0)

    def test_threaded_setup_is_identical(self):
        threaded = setup_metrics(self.mesh, threads=3)
        for first, second in zip(self.metrics, threaded):
            np.testing.assert_array_equal(first.metric, second.metric)


class TestConstraintMatrix(unittest.TestCase):

    def test_single_null_direction(self):
        for p in (1, 2, 3, 4):
            U, S, _, rank = constraint_svd(p)
            n3 = (p + 1) ** 3
            self.assertEqual(rank, n3 - 1)
            self.assertLessEqual(S[-1] / S[0], 1e-12)
            self.assertLessEqual(abs(abs(np.sum(U[:, -1])) - np.sqrt(n3)) / np.sqrt(n3), 1e-10)

    def test_svd_failure_is_reported(self):
        with patch("metrics.linalg") as mock_linalg:
            mock_linalg.svd.side_effect = np.linalg.LinAlgError("SVD did not converge")
            with self.assertRaises(GclInfeasibleError) as ctx:
                constraint_svd.__wrapped__(3)
        self.assertEqual(ctx.exception.exit_code, EXIT_GCL_INFEASIBLE)
        self.assertIn("p=3", str(ctx.exception))


class TestRefinement(unittest.TestCase):

    @staticmethod
    def relative_correction(n):
        mesh = perturb_control_nodes(build_block_mesh((n, n, n), CUBE, {2}, seed=5), 1 / 15)
        metrics = setup_metrics(mesh)
        correction = max(np.max(np.abs(em.metric - em.target)) for em in metrics)
        return correction / max(np.max(np.abs(em.target)) for em in metrics)

    def test_correction_shrinks_with_element_size(self):
        coarse = self.relative_correction(4)
        fine = self.relative_correction(8)
        self.assertGreater(coarse, 1e-10)
        self.assertLess(fine, 0.5 * coarse)


if __name__ == '__main__':
    unittest.main()
