import math
import warnings
from unittest import TestCase, mock

import numpy as np

from calabilab import (
    ConformalMetric,
    Surface,
    InvalidArgument,
    convergence_conditions,
    kazdan_warner_floor,
    kazdan_warner_residual,
    lambda_first_band,
    low_spectrum,
    round_bubble,
)
from calabilab.spectral import SpectrumReport, kazdan_warner_projection
from tests.test_fields import random_torus_metric, sphere, synthetic_samples, torus


def quadrupole(surface, amplitude):
    z = surface.grid.vertices[:, 2]
    return ConformalMetric.from_values(surface, amplitude * 0.5 * (3 * z * z - 1)).area_normalized()


class TestLowSpectrum(TestCase):
    def test_flat_torus(self):
        spectrum = low_spectrum(ConformalMetric.background(torus(16)), 6)
        first = 0.5 * (2 * math.pi) ** 2
        np.testing.assert_allclose(spectrum.eigenvalues[:4], first, rtol=1e-8)
        np.testing.assert_allclose(spectrum.eigenvalues[4:], 2 * first, rtol=1e-8)
        self.assertAlmostEqual(first, spectrum.lambda1, delta=1e-6)

    def test_eigenvalues_ascend(self):
        spectrum = low_spectrum(random_torus_metric(torus(16), seed=0), 6)
        self.assertTrue(np.all(np.diff(spectrum.eigenvalues) >= 0))

    def test_eigenfields_are_orthonormal(self):
        metric = random_torus_metric(torus(16), seed=1)
        spectrum = low_spectrum(metric, 5)
        b = metric.surface.weights * metric.density
        gram = spectrum.eigenfields @ (b[:, None] * spectrum.eigenfields.T)
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-8)

    def test_eigenfields_have_zero_mean(self):
        metric = random_torus_metric(torus(16), seed=1)
        spectrum = low_spectrum(metric, 3)
        b = metric.surface.weights * metric.density
        np.testing.assert_allclose(spectrum.eigenfields @ b, 0.0, atol=1e-8)

    def test_residual_is_small(self):
        self.assertLess(low_spectrum(random_torus_metric(torus(16), seed=2), 4).residual, 1e-8)

    def test_constant_shift_rescales_eigenvalues(self):
        metric = random_torus_metric(torus(16), seed=3)
        base = low_spectrum(metric, 3).eigenvalues
        shifted = low_spectrum(metric.shifted(0.5), 3).eigenvalues
        np.testing.assert_allclose(shifted, base * math.exp(-1.0), rtol=1e-8)

    def test_constant_torus_metric_in_closed_form(self):
        metric = ConformalMetric.background(torus(16)).shifted(0.25)
        with mock.patch("calabilab.spectral.splinalg.eigsh") as eigsh:
            spectrum = low_spectrum(metric, 8)
        eigsh.assert_not_called()
        first = 0.5 * (2 * math.pi) ** 2 * math.exp(-0.5)
        np.testing.assert_allclose(spectrum.eigenvalues[:4], first, rtol=1e-12)
        np.testing.assert_allclose(spectrum.eigenvalues[4:], 2 * first, rtol=1e-12)
        b = metric.surface.weights * metric.density
        gram = spectrum.eigenfields @ (b[:, None] * spectrum.eigenfields.T)
        np.testing.assert_allclose(gram, np.eye(8), atol=1e-12)
        self.assertLess(spectrum.residual, 1e-10)

    def test_rectangular_torus_in_closed_form(self):
        metric = ConformalMetric.background(Surface.torus(lx=2.0, ly=1.0, nx=32, ny=16))
        spectrum = low_spectrum(metric, 3)
        np.testing.assert_allclose(spectrum.eigenvalues, 0.5 * math.pi ** 2 * np.array([1, 1, 4]), rtol=1e-12)

    def test_round_sphere(self):
        spectrum = low_spectrum(ConformalMetric.background(sphere(5)), 8)
        np.testing.assert_allclose(spectrum.eigenvalues[:3], 1.0, rtol=0.01)
        np.testing.assert_allclose(spectrum.eigenvalues[3:], 3.0, rtol=0.01)

    def test_count_must_fit_the_grid(self):
        with self.assertRaises(InvalidArgument):
            low_spectrum(ConformalMetric.background(sphere(0)), 10)
        with self.assertRaises(InvalidArgument):
            low_spectrum(ConformalMetric.background(sphere(0)), 0)


class TestFirstBand(TestCase):
    def test_round_sphere_band(self):
        report = lambda_first_band(ConformalMetric.background(sphere(3)), 0.1, 8).summary()
        self.assertEqual(3, report.band_dimension)
        self.assertTrue(report.gap_ok)
        self.assertEqual(8, len(report.eigenvalues))

    def test_torus_has_no_band(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            spectrum = lambda_first_band(ConformalMetric.background(torus(16)), 0.1, 4)
        self.assertEqual(0, len(spectrum.band))
        self.assertTrue(spectrum.gap_ok)

    def test_reuses_a_spectrum_with_another_epsilon(self):
        spectrum = SpectrumReport(np.array([0.95, 1.05, 1.5, 2.5]), np.eye(4), 0.0, epsilon=0.1)
        self.assertEqual(2, len(spectrum.band))
        self.assertFalse(spectrum.gap_ok)
        wider = lambda_first_band(ConformalMetric.background(sphere(0)), 0.6, spectrum=spectrum)
        self.assertEqual(3, len(wider.band))
        self.assertTrue(wider.gap_ok)

    def test_warns_on_an_empty_band_on_the_sphere(self):
        spectrum = SpectrumReport(np.array([2.5, 3.0]), np.eye(2), 0.0)
        with self.assertWarnsRegex(RuntimeWarning, "no eigenvalue"):
            lambda_first_band(ConformalMetric.background(sphere(0)), 0.1, spectrum=spectrum)


class TestKazdanWarner(TestCase):
    def test_zero_on_the_torus(self):
        self.assertEqual(0.0, kazdan_warner_residual(random_torus_metric(torus(16), seed=4)))

    def test_zero_at_the_round_metric(self):
        self.assertEqual(0.0, kazdan_warner_residual(ConformalMetric.background(sphere(2))))

    def test_symmetric_metric_has_no_band_component(self):
        metric = quadrupole(sphere(3), 0.02)
        projection = kazdan_warner_projection(metric, 0.1, 8)
        self.assertGreater(projection.excess_norm, 1e-4)
        self.assertLess(kazdan_warner_residual(metric, 0.1, count=8), 1e-6)

    def test_residual_is_a_relative_projection(self):
        surface = sphere(3)
        x, y, z = surface.grid.vertices.T
        values = 0.02 * 0.5 * (3 * z * z - 1) + 0.05 * z ** 3
        metric = ConformalMetric.from_values(surface, values).area_normalized()
        projection = kazdan_warner_projection(metric, 0.1, 8)
        residual = kazdan_warner_residual(metric, 0.1, count=8)
        self.assertEqual(3, projection.band_dimension)
        denominator = max(projection.excess_norm, kazdan_warner_floor(metric))
        self.assertAlmostEqual(projection.projection_norm / denominator, residual, places=10)
        self.assertLessEqual(residual, 1.0 + 1e-9)

    def test_floor_follows_the_mesh(self):
        coarse, fine = (ConformalMetric.background(sphere(level)) for level in (2, 3))
        for metric in (coarse, fine):
            expected = metric.surface.grid.mesh_size ** 2 * math.sqrt(4 * math.pi)
            self.assertAlmostEqual(expected, kazdan_warner_floor(metric), delta=1e-9 * expected)
        self.assertLess(kazdan_warner_floor(fine), 0.3 * kazdan_warner_floor(coarse))
        self.assertEqual(1e-8, kazdan_warner_floor(ConformalMetric.background(torus(16))))

    def test_mobius_pullback(self):
        metric = round_bubble(sphere(3), 1.005).area_normalized()
        self.assertGreater(kazdan_warner_projection(metric, 0.1, 8).excess_norm, 1e-8)
        self.assertLess(kazdan_warner_residual(metric, 0.1, count=8), 0.05)


class TestConvergenceConditions(TestCase):
    def test_decaying_trace(self):
        t = np.linspace(0.0, 1.0, 11)
        report = convergence_conditions(synthetic_samples(t, np.exp(-t)))
        self.assertTrue(report.converging)
        self.assertEqual(0, report.poincare_samples)
        self.assertTrue(report.poincare_ok)
        self.assertEqual(0.5, report.tail_start)

    def test_growing_trace(self):
        t = np.linspace(0.0, 1.0, 11)
        self.assertFalse(convergence_conditions(synthetic_samples(t, np.exp(t))).converging)

    def test_empty_trace(self):
        with self.assertRaises(InvalidArgument):
            convergence_conditions([])
