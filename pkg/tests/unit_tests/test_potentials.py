import math
from unittest import TestCase

import numpy as np

from calabilab import (
    ConformalMetric,
    ContractViolation,
    DegeneratePlane,
    InvalidPotential,
    Potential,
    PotentialPath,
    ScalarField,
    UnsupportedOperation,
    covariant_derivative,
    flow_curve_tail,
    geodesic_residual,
    poisson_bracket,
    sectional_curvature,
    tangent_norm,
)
from calabilab.energy import DecayFit
from calabilab.potentials import path_energy, path_length, tangent_inner
from tests.test_fields import mode_metric, sphere, synthetic_samples, torus, x_coordinate, y_coordinate


class TestPotential(TestCase):
    def test_field_must_have_zero_mean(self):
        with self.assertRaises(ContractViolation):
            Potential(torus(16).constant(1.0))

    def test_from_values_splits_the_mean(self):
        surface = torus(16)
        potential = Potential.from_values(surface, 0.01 * np.cos(2 * math.pi * x_coordinate(surface)) + 2.0)
        self.assertAlmostEqual(2.0, potential.offset, places=12)
        self.assertAlmostEqual(0.0, surface.mean0(potential.phi.values), places=12)
        np.testing.assert_allclose(potential.values, 0.01 * np.cos(2 * math.pi * x_coordinate(surface)) + 2.0)

    def test_density_must_be_positive(self):
        surface = torus(32)
        with self.assertRaises(InvalidPotential):
            Potential.from_values(surface, 1.5 / (2 * math.pi ** 2) * np.cos(2 * math.pi * x_coordinate(surface)))

    def test_metric_round_trip(self):
        metric = mode_metric(torus(32), 0.1, normalized=True)
        back = Potential.from_metric(metric).to_metric()
        np.testing.assert_allclose(back.u.values, metric.u.values, atol=1e-10)

    def test_round_trip_on_the_sphere(self):
        surface = sphere(3)
        z = surface.grid.vertices[:, 2]
        metric = ConformalMetric.from_values(surface, 0.1 * z).area_normalized()
        back = Potential.from_metric(metric).to_metric()
        np.testing.assert_allclose(back.u.values, metric.u.values, atol=1e-9)

    def test_from_metric_needs_matching_area(self):
        with self.assertRaises(ContractViolation):
            Potential.from_metric(ConformalMetric.background(torus(16)).shifted(0.1))


class TestTangentSpace(TestCase):
    def test_norm_of_a_constant(self):
        potential = Potential.zero(sphere(2))
        self.assertAlmostEqual(4 * 4 * math.pi, tangent_norm(potential, np.full(sphere(2).node_count, 2.0)), places=10)

    def test_norm_uses_the_potential_measure(self):
        surface = torus(32)
        potential = Potential.from_metric(mode_metric(surface, 0.1, normalized=True))
        psi = surface.field(np.cos(2 * math.pi * x_coordinate(surface)))
        expected = float(np.dot(surface.weights * potential.density, psi.values ** 2))
        self.assertAlmostEqual(expected, tangent_norm(potential, psi), places=12)
        self.assertAlmostEqual(expected, tangent_inner(potential, psi, psi), places=12)

    def test_rejects_wrong_shape(self):
        with self.assertRaises(ContractViolation):
            tangent_norm(Potential.zero(torus(16)), np.zeros(3))

    def test_poisson_bracket_of_coordinate_modes(self):
        surface = torus(32)
        x, y = x_coordinate(surface), y_coordinate(surface)
        bracket = poisson_bracket(Potential.zero(surface), np.sin(2 * math.pi * x), np.sin(2 * math.pi * y))
        expected = (2 * math.pi) ** 2 * np.cos(2 * math.pi * x) * np.cos(2 * math.pi * y)
        np.testing.assert_allclose(bracket.values, expected, atol=1e-9)

    def test_poisson_bracket_is_antisymmetric(self):
        surface = torus(32)
        x, y = x_coordinate(surface), y_coordinate(surface)
        potential = Potential.from_metric(mode_metric(surface, 0.1, normalized=True))
        f, h = np.sin(2 * math.pi * (x + y)), np.cos(4 * math.pi * y)
        np.testing.assert_allclose(
            poisson_bracket(potential, f, h).values, -poisson_bracket(potential, h, f).values, atol=1e-12
        )

    def test_poisson_bracket_is_torus_only(self):
        surface = sphere(1)
        with self.assertRaises(UnsupportedOperation):
            poisson_bracket(Potential.zero(surface), surface.grid.vertices[:, 0], surface.grid.vertices[:, 1])

    def test_sectional_curvature_of_the_flat_plane(self):
        surface = torus(32)
        x, y = x_coordinate(surface), y_coordinate(surface)
        curvature = sectional_curvature(Potential.zero(surface), np.cos(2 * math.pi * x), np.cos(2 * math.pi * y))
        self.assertAlmostEqual(-((2 * math.pi) ** 4) / 4, curvature, delta=1e-6)
        self.assertAlmostEqual(-389.6, curvature, delta=0.1)

    def test_sectional_curvature_ignores_scaling(self):
        surface = torus(32)
        x, y = x_coordinate(surface), y_coordinate(surface)
        potential = Potential.zero(surface)
        first, second = np.cos(2 * math.pi * x), np.cos(2 * math.pi * y)
        self.assertAlmostEqual(
            sectional_curvature(potential, first, second),
            sectional_curvature(potential, 3 * first, first - 0.5 * second),
            places=8,
        )

    def test_degenerate_planes(self):
        surface = torus(32)
        x = x_coordinate(surface)
        potential = Potential.zero(surface)
        with self.assertRaises(DegeneratePlane):
            sectional_curvature(potential, np.cos(2 * math.pi * x), 2 * np.cos(2 * math.pi * x))
        with self.assertRaises(DegeneratePlane):
            sectional_curvature(potential, np.zeros(surface.node_count), np.cos(2 * math.pi * x))


class TestPaths(TestCase):
    def test_constant_shift_on_the_sphere(self):
        surface = sphere(3)
        path = PotentialPath.linear(Potential.zero(surface), Potential.zero(surface, 2.0), 16)
        self.assertAlmostEqual(2 * math.sqrt(4 * math.pi), path_length(path), places=9)
        self.assertAlmostEqual(7.0898, path_length(path), delta=1e-4)
        self.assertAlmostEqual(16 * math.pi, path_energy(path), places=8)
        self.assertAlmostEqual(0.0, geodesic_residual(path), places=12)

    def test_covariant_derivative_of_the_velocity_vanishes_on_a_shift(self):
        surface = torus(16)
        path = PotentialPath.linear(Potential.zero(surface), Potential.zero(surface, 1.0), 8)
        velocity = np.gradient(path.values, path.step, axis=0)
        np.testing.assert_allclose(covariant_derivative(path, velocity), 0.0, atol=1e-9)

    def test_covariant_derivative_needs_a_sample_per_node(self):
        surface = torus(16)
        path = PotentialPath.linear(Potential.zero(surface), Potential.zero(surface, 1.0), 8)
        with self.assertRaises(ContractViolation):
            covariant_derivative(path, path.values[:3])

    def test_geodesic_residual_of_a_bent_path(self):
        surface = torus(32)
        bump = 0.01 * np.cos(2 * math.pi * x_coordinate(surface))
        start, end = Potential.zero(surface), Potential.from_values(surface, bump)
        path = PotentialPath.linear(start, end, 8)
        self.assertGreater(geodesic_residual(path), 0.0)
        self.assertEqual(8, path.nodes)
        np.testing.assert_allclose(path.parameters, np.linspace(0, 1, 9))

    def test_path_shape_is_checked(self):
        with self.assertRaises(ContractViolation):
            PotentialPath(torus(16), np.zeros((1, 256)))

    def test_path_nodes_must_be_admissible(self):
        surface = torus(32)
        bad = 1.5 / (2 * math.pi ** 2) * np.cos(2 * math.pi * x_coordinate(surface))
        with self.assertRaises(InvalidPotential):
            PotentialPath(surface, np.stack([np.zeros(surface.node_count), bad]))

    def test_from_potentials(self):
        surface = torus(16)
        path = PotentialPath.from_potentials([Potential.zero(surface, k) for k in range(3)])
        self.assertEqual(2, path.nodes)
        self.assertAlmostEqual(1.0, path.potential(1).offset)
        self.assertIsInstance(path.potential(1).phi, ScalarField)


class TestFlowCurveTail(TestCase):
    def setUp(self):
        self.times = np.linspace(0.0, 1.0, 401)
        self.samples = synthetic_samples(self.times, 4.0 * np.exp(-2.0 * self.times))
        self.fit = DecayFit(alpha=2.0, prefactor=4.0, t_start=0.0, t_end=1.0, residual=0.0, samples=401)

    def test_length_matches_the_square_root_bound(self):
        tail = flow_curve_tail(self.samples, 0.5, 1.0, self.fit)
        exact = 2 * (math.exp(-0.5) - math.exp(-1.0))
        self.assertAlmostEqual(exact, tail.length, places=5)
        self.assertAlmostEqual(exact, tail.sqrt_bound, places=12)
        self.assertAlmostEqual(2 * (math.exp(-1.0) - math.exp(-2.0)), tail.literal_bound, places=12)

    def test_window_between_samples(self):
        tail = flow_curve_tail(self.samples, 0.3001, 0.7003)
        exact = 2 * (math.exp(-0.3001) - math.exp(-0.7003))
        self.assertAlmostEqual(exact, tail.length, places=5)
        self.assertIsNone(tail.sqrt_bound)

    def test_empty_window(self):
        self.assertEqual(0.0, flow_curve_tail(self.samples, 0.5, 0.5).length)

    def test_window_outside_the_trace(self):
        with self.assertRaises(ContractViolation):
            flow_curve_tail(self.samples, 0.5, 2.0)
