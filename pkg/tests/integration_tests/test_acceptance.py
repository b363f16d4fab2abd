import math
from unittest import TestCase

import numpy as np

from calabilab import (
    GeodesicSettings,
    concentration_scan,
    kazdan_warner_residual,
    lambda_first_band,
    round_bubble,
    run,
    verify_distance_decrease,
)
from calabilab.config import preset_metric
from calabilab.constants import SHARP_CONCENTRATION_THRESHOLD
from tests.test_fields import quick_flow, sphere, torus


class TestDistanceDecrease(TestCase):
    def test_flow_brings_two_modes_closer(self):
        surface = torus(16)
        first = preset_metric(surface, "torus_mode 1 0.01")
        second = preset_metric(surface, "torus_mode 2 0.005")
        report = verify_distance_decrease(first, second, 2e-4, quick_flow(), GeodesicSettings(nodes=8))
        self.assertFalse(report.violated)
        self.assertGreater(report.initial_distance, 0.0)
        self.assertLess(report.ratio, 1.0)

    def test_random_pairs(self):
        surface = torus(16)
        for pair in range(5):
            first = preset_metric(surface, "random_smooth 0.005", seed=2 * pair)
            second = preset_metric(surface, "random_smooth 0.005", seed=2 * pair + 1)
            report = verify_distance_decrease(first, second, 1e-4, quick_flow(), GeodesicSettings(nodes=8))
            self.assertFalse(report.violated, pair)
            self.assertGreater(report.initial_distance, 0.0)
            self.assertLessEqual(report.ratio, 1.0 + report.tolerance / report.initial_distance)


class TestSphereBand(TestCase):
    def test_quadrupole_band_and_residual(self):
        metric = preset_metric(sphere(3), "sphere_quadrupole 0.02")
        band = lambda_first_band(metric, 0.1, 8).summary()
        self.assertEqual(3, band.band_dimension)
        self.assertTrue(band.gap_ok)
        self.assertLess(kazdan_warner_residual(metric, 0.1, count=8), 1e-6)

    def test_band_flow_ends_with_a_small_residual(self):
        metric = preset_metric(sphere(2), "sphere_band 0.05")
        config = quick_flow(
            t_end=0.5, sample_interval=0.1, dt_init=1e-5, dt_max=1e-2, spectrum_every=1, snapshot_every=0
        )
        trace = run(config, metric)
        self.assertTrue(trace.completed)
        residuals = [s.kw_residual for s in trace.samples]
        self.assertEqual(6, len(residuals))
        self.assertLessEqual(residuals[-1], 0.05)
        band = lambda_first_band(trace.final_state.metric, 0.1, 8).summary()
        self.assertEqual(3, band.band_dimension)
        self.assertTrue(band.gap_ok)


class TestBubbleConcentration(TestCase):
    def test_bubble_reaches_the_sharp_threshold(self):
        surface = sphere(7)
        south = int(np.argmin(surface.grid.vertices[:, 2]))
        for factor in (20.0, 50.0):
            metric = round_bubble(surface, factor)
            report = concentration_scan(metric, 1.0, centers=[south])
            self.assertTrue(report.flagged, factor)
            self.assertAlmostEqual(1.0, report.max_product / SHARP_CONCENTRATION_THRESHOLD, delta=0.05)
        self.assertAlmostEqual(16 * math.pi ** 2, SHARP_CONCENTRATION_THRESHOLD)
