import csv
import math
import os
import sys
import tempfile
import unittest
from unittest.mock import MagicMock

import numpy as np

sys.path.insert(0, os.path.abspath(
    os.path.join(os.path.dirname(__file__), '..', 'src')))

from cases import freestream, isentropic_vortex, scalar_profile
from disc import Discretization, StateLayout
from errors import ConfigError, IntegrationError, StateError
from integrator import IntegratorConfig, error_norm, integrate, write_steps_csv
from mesh import build_block_mesh
from metrics import setup_metrics
from physics import ConvectionPhysics, EulerPhysics

CUBE = ((-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0))
TOL = 1e-8


def small_disc(physics, **kwargs):
    mesh = build_block_mesh((2, 2, 2), CUBE, {2})
    return Discretization(mesh, setup_metrics(mesh), physics, **kwargs)


def decay(t, y):
    return -y


class TestScalarOde(unittest.TestCase):

    def test_exponential_decay(self):
        config = IntegratorConfig(t_end=1.0, atol=TOL, rtol=TOL)
        result = integrate(decay, [1.0], config, log_callback=MagicMock())
        self.assertEqual(result.t, 1.0)
        self.assertLessEqual(abs(result.y[0] - math.exp(-1.0)), 10 * TOL)
        self.assertGreater(result.accepted, 1)

    def test_rk4_matches_exact(self):
        config = IntegratorConfig(method="rk4", t_end=1.0, dt=0.01)
        result = integrate(decay, [1.0], config, log_callback=MagicMock())
        self.assertEqual(result.accepted, 100)
        self.assertAlmostEqual(result.t, 1.0, places=14)
        self.assertLessEqual(abs(result.y[0] - math.exp(-1.0)), 1e-9)

    def test_observers_see_every_accepted_step(self):
        seen = []

        def observer(t, y, dydt):
            seen.append(t)
            return {"value": float(y[0]), "rate": float(dydt[0])}

        config = IntegratorConfig(t_end=1.0, atol=1e-6, rtol=1e-6)
        result = integrate(decay, [2.0], config, observers=[observer], log_callback=MagicMock())
        accepted = result.accepted_records
        self.assertEqual(len(accepted), result.accepted + 1)
        self.assertEqual(seen[0], 0.0)
        self.assertEqual(seen[-1], 1.0)
        for record in accepted:
            self.assertAlmostEqual(record.observations["rate"], -record.observations["value"], places=12)

    def test_progress_logged(self):
        log_mock = MagicMock()
        config = IntegratorConfig(t_end=1.0, atol=1e-6, rtol=1e-6, log_every=1)
        result = integrate(decay, [1.0], config, log_callback=log_mock)
        self.assertEqual(log_mock.call_count, result.accepted)
        self.assertIn("accepted=1", log_mock.call_args_list[0][0][0])

    def test_harmonic_oscillator_rk4_and_dopri_agree(self):
        def oscillator(t, y):
            return np.array([y[1], -y[0]])

        tol = 1e-7
        dopri = integrate(oscillator, [1.0, 0.0], IntegratorConfig(t_end=2.0, atol=tol, rtol=tol),
                          log_callback=MagicMock())
        rk4 = integrate(oscillator, [1.0, 0.0], IntegratorConfig(method="rk4", t_end=2.0, dt=1e-3),
                        log_callback=MagicMock())
        self.assertLessEqual(np.max(np.abs(dopri.y - rk4.y)), 5 * tol)
        self.assertLessEqual(abs(rk4.y[0] - math.cos(2.0)), 1e-10)


class TestErrorNorm(unittest.TestCase):

    def test_weighted_rms(self):
        y = np.zeros(4)
        self.assertAlmostEqual(error_norm(np.full(4, 1e-8), y, y, 1e-8, 1e-8), 1.0)

    def test_scale_uses_larger_state(self):
        y = np.array([0.0, 1.0])
        y_new = np.array([3.0, 0.0])
        e = np.array([4e-8, 2e-8])
        self.assertAlmostEqual(error_norm(e, y, y_new, 1e-8, 1e-8), 1.0)


class TestFailures(unittest.TestCase):

    def test_step_underflow(self):
        def stiff(t, y):
            return -1e6 * y

        config = IntegratorConfig(t_end=1.0, atol=TOL, rtol=TOL, min_step=1e-3)
        with self.assertRaises(IntegrationError) as ctx:
            integrate(stiff, [1.0], config, log_callback=MagicMock())
        self.assertIn("below minimum", str(ctx.exception))
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_nan_stage_names_element(self):
        layout = StateLayout([1, 1], 1)
        calls = []

        def broken(t, y):
            calls.append(t)
            out = -y
            if len(calls) == 4:
                out[10] = np.nan
            return out

        with self.assertRaises(IntegrationError) as ctx:
            integrate(broken, np.ones(layout.size), IntegratorConfig(t_end=1.0),
                      log_callback=MagicMock(), locate=layout.element_of)
        self.assertEqual(ctx.exception.stage, 3)
        self.assertEqual(ctx.exception.element, 1)
        self.assertIn("stage 3", str(ctx.exception))
        self.assertIn("element 1", str(ctx.exception))

    def test_state_error_is_wrapped(self):
        def unphysical(t, y):
            raise StateError("negative density", element=2, node=(0, 1, 0))

        with self.assertRaises(IntegrationError) as ctx:
            integrate(unphysical, [1.0], IntegratorConfig(), log_callback=MagicMock())
        self.assertEqual(ctx.exception.element, 2)
        self.assertEqual(ctx.exception.stage, 1)
        self.assertIsInstance(ctx.exception.__cause__, StateError)

    def test_invalid_configuration(self):
        for config in (IntegratorConfig(method="euler"), IntegratorConfig(t_end=0.0),
                       IntegratorConfig(atol=0.0), IntegratorConfig(safety=1.5)):
            with self.assertRaises(ConfigError):
                integrate(decay, [1.0], config, log_callback=MagicMock())


class TestWithDiscretization(unittest.TestCase):

    def test_freestream_preserved_and_steps_grow(self):
        disc = small_disc(EulerPhysics(1.4), exact=None)
        y0 = disc.layout.pack(disc.project(
            lambda x, t: freestream(x, t, velocity=(0.3, -0.2, 0.1), pressure=1 / 1.4)))
        config = IntegratorConfig(t_end=1.0, atol=TOL, rtol=TOL, max_step=0.1)
        result = integrate(disc.rhs, y0, config, log_callback=MagicMock(), locate=disc.layout.element_of)
        self.assertLessEqual(np.max(np.abs(result.y - y0)), 1e-12)
        steps = [r.dt for r in result.accepted_records[1:]]
        self.assertGreaterEqual(max(steps), 0.05)
        self.assertGreater(max(steps), 100 * steps[0])
        self.assertEqual(result.rejected, 0)

    def test_vortex_rk4_and_dopri_agree(self):
        disc = small_disc(EulerPhysics(1.4))
        y0 = disc.layout.pack(disc.project(lambda x, t: isentropic_vortex(x, t, bounds=CUBE)))
        tol = 1e-7
        dopri = integrate(disc.rhs, y0, IntegratorConfig(t_end=0.05, atol=tol, rtol=tol),
                          log_callback=MagicMock())
        rk4 = integrate(disc.rhs, y0, IntegratorConfig(method="rk4", t_end=0.05, dt=0.005),
                        log_callback=MagicMock())
        self.assertLessEqual(np.max(np.abs(dopri.y - rk4.y)), 5 * tol * (1.0 + np.max(np.abs(y0))))

    def test_reversibility(self):
        disc = small_disc(ConvectionPhysics((1.0, 0.5, 0.25)), dissipation=False)
        y0 = disc.layout.pack(disc.project(lambda x, t: scalar_profile(x, "sine", CUBE)))
        config = IntegratorConfig(t_end=0.5, atol=TOL, rtol=TOL)
        forward = integrate(disc.rhs, y0, config, log_callback=MagicMock())
        backward = integrate(lambda t, y: -disc.rhs(t, y), forward.y, config, log_callback=MagicMock())
        self.assertGreater(np.max(np.abs(forward.y - y0)), 1e-4)
        self.assertLessEqual(np.max(np.abs(backward.y - y0)), 100 * TOL * (1.0 + np.max(np.abs(y0))))


class TestStepLog(unittest.TestCase):

    def test_csv_columns(self):
        def observer(t, y, dydt):
            return {"value": float(y[0])}

        config = IntegratorConfig(t_end=1.0, atol=1e-6, rtol=1e-6)
        result = integrate(decay, [1.0], config, observers=[observer], log_callback=MagicMock())
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "steps.csv")
            write_steps_csv(result.records, path)
            with open(path, newline='', encoding='utf-8') as f:
                rows = list(csv.DictReader(f))
        self.assertEqual(list(rows[0].keys()), ["step", "t", "dt", "error", "accepted", "value"])
        self.assertEqual(len(rows), len(result.records))
        self.assertEqual(float(rows[-1]["t"]), 1.0)
        self.assertAlmostEqual(float(rows[-1]["value"]), math.exp(-1.0), places=5)


if __name__ == '__main__':
    unittest.main()
