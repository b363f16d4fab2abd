import math
from unittest import TestCase

import numpy as np

from calabilab import (
    ConformalMetric,
    ContractViolation,
    ScalarField,
    UnsupportedOperation,
    gauss_curvature,
    grad_inner,
    grad_norm_sq,
    integrate,
    laplace0,
    laplace_g,
    lichnerowicz,
    lichnerowicz_norm_sq,
)
from tests.test_fields import cos_field, mode_metric, random_torus_metric, sphere, torus, x_coordinate


def lichnerowicz_identity(metric: ConformalMetric, f: ScalarField):
    """Both sides of ``int |L f|^2 = int (lap_g f)^2 - 1/2 int K |grad f|^2``."""
    left = integrate(metric, lichnerowicz_norm_sq(metric, lichnerowicz(metric, f)))
    k = gauss_curvature(metric)
    right = integrate(metric, ScalarField(metric.surface, laplace_g(metric, f).values ** 2)) - 0.5 * integrate(
        metric, ScalarField(metric.surface, k.values * grad_norm_sq(metric, f).values)
    )
    return left, right


class TestCurvature(TestCase):
    def test_flat_torus(self):
        np.testing.assert_allclose(gauss_curvature(ConformalMetric.background(torus(16))).values, 0.0, atol=1e-12)

    def test_round_sphere(self):
        np.testing.assert_allclose(gauss_curvature(ConformalMetric.background(sphere(2))).values, 1.0, atol=1e-12)

    def test_torus_mode(self):
        surface = torus(32)
        u = cos_field(surface, 0.01)
        expected = (2 * math.pi) ** 2 * u * np.exp(-2 * u)
        np.testing.assert_allclose(gauss_curvature(mode_metric(surface)).values, expected, atol=1e-10)

    def test_constant_shift_rescales_curvature(self):
        metric = ConformalMetric.background(sphere(2)).shifted(math.log(2.0))
        np.testing.assert_allclose(gauss_curvature(metric).values, 0.25, atol=1e-12)


class TestLaplacians(TestCase):
    def test_laplace_g_divides_by_density(self):
        surface = torus(32)
        metric = mode_metric(surface, 0.2)
        f = ScalarField(surface, np.sin(2 * math.pi * x_coordinate(surface)))
        np.testing.assert_allclose(
            laplace_g(metric, f).values, laplace0(surface, f).values * np.exp(-2 * metric.u.values), atol=1e-12
        )

    def test_rejects_fields_of_other_surfaces(self):
        metric = ConformalMetric.background(torus(16))
        with self.assertRaises(ContractViolation):
            laplace_g(metric, torus(32).zeros())

    def test_rejects_raw_arrays(self):
        with self.assertRaises(ContractViolation):
            laplace0(torus(16), np.zeros(256))


class TestGradients(TestCase):
    def test_dirichlet_energy_is_conformally_invariant(self):
        surface = torus(32)
        metric = random_torus_metric(surface, seed=2, amplitude=0.3)
        f = ScalarField(surface, np.sin(2 * math.pi * x_coordinate(surface)))
        flat = ConformalMetric.background(surface)
        self.assertAlmostEqual(
            integrate(flat, grad_norm_sq(flat, f)), integrate(metric, grad_norm_sq(metric, f)), places=10
        )
        self.assertAlmostEqual(2 * math.pi ** 2, integrate(flat, grad_norm_sq(flat, f)), places=10)

    def test_grad_inner_is_symmetric(self):
        surface = sphere(2)
        x, y, z = surface.grid.vertices.T
        metric = ConformalMetric.from_values(surface, 0.1 * z)
        f, h = surface.field(x * y), surface.field(z)
        np.testing.assert_allclose(grad_inner(metric, f, h).values, grad_inner(metric, h, f).values)

    def test_integrate_constant_is_area(self):
        metric = mode_metric(torus(32), 0.3)
        self.assertAlmostEqual(metric.area, integrate(metric), places=12)
        self.assertAlmostEqual(2 * metric.area, integrate(metric, 2.0), places=12)


class TestLichnerowicz(TestCase):
    def test_flat_mode(self):
        surface = torus(32)
        metric = ConformalMetric.background(surface)
        f = np.sin(2 * math.pi * x_coordinate(surface))
        tensor = lichnerowicz(metric, surface.field(f))
        np.testing.assert_allclose(tensor.values.real, -math.pi ** 2 * f, atol=1e-9)
        np.testing.assert_allclose(tensor.values.imag, 0.0, atol=1e-9)

    def test_kills_constants(self):
        metric = random_torus_metric(torus(32), seed=5)
        tensor = lichnerowicz(metric, metric.surface.constant(3.0))
        np.testing.assert_allclose(np.abs(tensor.values), 0.0, atol=1e-10)

    def test_integral_identity_on_curvature(self):
        surface = torus(64)
        for seed in range(10):
            metric = random_torus_metric(surface, seed=seed)
            left, right = lichnerowicz_identity(metric, gauss_curvature(metric))
            self.assertGreater(left, 0.0)
            self.assertLess(abs(left - right), 1e-6 * abs(left))

    def test_norm_of_flat_mode(self):
        surface = torus(32)
        metric = ConformalMetric.background(surface)
        f = surface.field(np.sin(2 * math.pi * x_coordinate(surface)))
        total = integrate(metric, lichnerowicz_norm_sq(metric, lichnerowicz(metric, f)))
        self.assertAlmostEqual(2 * math.pi ** 4, total, places=8)

    def test_torus_only(self):
        metric = ConformalMetric.background(sphere(1))
        with self.assertRaises(UnsupportedOperation):
            lichnerowicz(metric, metric.u)
