import math
from unittest import TestCase, mock

import attr
import numpy as np

from calabilab import (
    ConformalMetric,
    ContractViolation,
    FlowConfig,
    FlowState,
    InvalidArgument,
    MonotonicityViolation,
    StiffnessFailure,
    run,
    step,
)
from calabilab.flow import _rejection, flow_rate, sample
from tests.test_fields import mode_amplitude, mode_metric, quick_flow, torus


class TestFlowConfig(TestCase):
    def test_defaults(self):
        config = FlowConfig()
        self.assertIsNone(config.checkpoint_interval)
        self.assertEqual(0, config.spectrum_every)

    def test_rejects_non_positive_steps(self):
        with self.assertRaises(InvalidArgument):
            FlowConfig(dt_init=0.0)
        with self.assertRaises(InvalidArgument):
            FlowConfig(step_tolerance=-1e-8)
        with self.assertRaises(InvalidArgument):
            FlowConfig(checkpoint_interval=0.0)

    def test_rejects_negative_end_time(self):
        with self.assertRaises(InvalidArgument):
            FlowConfig(t_end=-1.0)

    def test_with_end_time(self):
        config = quick_flow().with_end_time(2e-4)
        self.assertEqual(2e-4, config.t_end)
        self.assertEqual(quick_flow().dt_init, config.dt_init)


class TestStep(TestCase):
    def test_flat_torus_is_stationary(self):
        state = FlowState.initial(ConformalMetric.background(torus(16)), 1e-6)
        candidate = step(state, 1e-6)
        np.testing.assert_array_equal(candidate.metric.u.values, 0.0)
        self.assertEqual(0.0, candidate.last_error)
        self.assertEqual(1e-6, candidate.t)
        self.assertEqual(1, candidate.step_count)

    def test_mode_decays(self):
        surface = torus(16)
        state = FlowState.initial(mode_metric(surface, 0.01, normalized=True), 1e-7)
        candidate = step(state, 1e-6)
        before = mode_amplitude(surface, state.metric.u.values)
        after = mode_amplitude(surface, candidate.metric.u.values)
        self.assertLess(after, before)
        self.assertGreater(candidate.last_error, 0.0)
        self.assertGreater(candidate.calabi_integral, 0.0)
        self.assertGreater(candidate.curve_length, 0.0)

    def test_rejects_non_positive_step(self):
        state = FlowState.initial(ConformalMetric.background(torus(16)), 1e-6)
        with self.assertRaises(ContractViolation):
            step(state, 0.0)

    def test_rate_of_the_flat_torus(self):
        np.testing.assert_array_equal(flow_rate(torus(16), np.zeros(256)), 0.0)


class TestRun(TestCase):
    def test_flat_torus(self):
        trace = run(quick_flow(), ConformalMetric.background(torus(16)))
        self.assertTrue(trace.completed)
        self.assertIsNone(trace.failure_time)
        np.testing.assert_array_equal(trace.final_state.metric.u.values, 0.0)
        self.assertEqual(1e-4, trace.final_state.t)
        self.assertEqual([], trace.monotonicity_violations)
        for sample in trace.samples:
            self.assertEqual(0.0, sample.calabi)
            self.assertAlmostEqual(1.0, sample.area, places=12)

    def test_samples_at_the_interval(self):
        trace = run(quick_flow(), ConformalMetric.background(torus(16)))
        times = [s.t for s in trace.samples]
        np.testing.assert_allclose(times, np.arange(6) * 2e-5, atol=1e-18)
        self.assertEqual(6, len(trace.snapshots))

    def test_snapshot_stride(self):
        trace = run(quick_flow(snapshot_every=2), ConformalMetric.background(torus(16)))
        self.assertEqual([0.0, 4e-5, 8e-5], [s.t for s in trace.snapshots])

    def test_initial_area_must_be_normalized(self):
        with self.assertRaises(ContractViolation):
            run(quick_flow(), mode_metric(torus(16), 0.1))

    def test_torus_mode_decays(self):
        surface = torus(16)
        metric = mode_metric(surface, 0.01, normalized=True)
        trace = run(quick_flow(), metric)
        calabi = [s.calabi for s in trace.samples]
        self.assertTrue(all(b < a for a, b in zip(calabi, calabi[1:])))
        self.assertEqual([], trace.monotonicity_violations)
        ratio = mode_amplitude(surface, trace.final_state.metric.u.values) / mode_amplitude(
            surface, metric.u.values
        )
        rate = 0.25 * (2 * math.pi) ** 4
        self.assertAlmostEqual(math.exp(-rate * 1e-4), ratio, delta=2e-3)
        self.assertLess(trace.final_state.area_drift, 1e-6)

    def test_mabuchi_variants_agree(self):
        trace = run(quick_flow(), mode_metric(torus(16), 0.01, normalized=True))
        for sample in trace.samples:
            self.assertAlmostEqual(sample.mabuchi_closed, sample.mabuchi_integrated, delta=1e-7)

    def test_checkpoint_callback(self):
        saved = []
        config = quick_flow(checkpoint_interval=4e-5)
        run(config, mode_metric(torus(16), 0.01, normalized=True), on_checkpoint=saved.append)
        self.assertEqual([4e-5, 8e-5], [state.t for state in saved])

    def test_step_budget(self):
        config = quick_flow(max_steps=1)
        with self.assertRaises(StiffnessFailure) as context:
            run(config, mode_metric(torus(16), 0.01, normalized=True))
        trace = context.exception.trace
        self.assertFalse(trace.completed)
        self.assertEqual(1, len(trace.samples))
        self.assertGreater(trace.failure_time, 0.0)

    def test_resumes_from_a_state(self):
        config = quick_flow()
        first = run(config.with_end_time(4e-5), mode_metric(torus(16), 0.01, normalized=True))
        resumed = run(config, first.final_state)
        self.assertAlmostEqual(4e-5, resumed.samples[0].t, places=18)
        self.assertEqual(1e-4, resumed.final_state.t)

    def test_calabi_increase_fails_the_run(self):
        calls = []

        def inflated(state, config, index, previous_length):
            entry = sample(state, config, index, previous_length)
            calls.append(entry)
            if len(calls) == 3:
                return attr.evolve(entry, calabi=entry.calabi + 1.0)
            return entry

        with mock.patch("calabilab.flow.sample", side_effect=inflated):
            with self.assertRaises(MonotonicityViolation) as context:
                run(quick_flow(), mode_metric(torus(16), 0.01, normalized=True))
        trace = context.exception.trace
        self.assertFalse(trace.completed)
        self.assertEqual(3, len(trace.samples))
        self.assertEqual([trace.samples[-1].t], trace.monotonicity_violations)
        self.assertAlmostEqual(4e-5, trace.failure_time, places=18)
        self.assertIn("Calabi energy increased", trace.failure)

    def test_increase_within_the_slack_is_tolerated(self):
        def nudged(state, config, index, previous_length):
            entry = sample(state, config, index, previous_length)
            return attr.evolve(entry, calabi=entry.calabi + index * 5 * config.step_tolerance)

        flat = ConformalMetric.background(torus(16))
        with mock.patch("calabilab.flow.sample", side_effect=nudged):
            trace = run(quick_flow(), flat)
        self.assertTrue(trace.completed)
        self.assertEqual([], trace.monotonicity_violations)


class TestRejection(TestCase):
    def setUp(self):
        self.surface = torus(16)
        self.state = FlowState.initial(ConformalMetric.background(self.surface), 1e-6)
        self.config = quick_flow(area_tolerance=1e-6)

    def candidate(self, area_change, error=0.0):
        values = np.full(self.surface.node_count, 0.5 * math.log1p(area_change))
        return attr.evolve(
            self.state, metric=ConformalMetric.from_values(self.surface, values), last_error=error
        )

    def test_area_allowance_scales_with_the_step(self):
        # allowance is area_tolerance * h / t_end, 1e-2 * h here
        candidate = self.candidate(1e-9)
        self.assertEqual("", _rejection(self.state, candidate, 1e-6, self.config))
        self.assertIn("area change", _rejection(self.state, candidate, 1e-8, self.config))

    def test_roundoff_floor(self):
        candidate = self.candidate(1e-15)
        self.assertEqual("", _rejection(self.state, candidate, 1e-16, self.config))

    def test_step_error(self):
        reason = _rejection(self.state, self.candidate(0.0, error=1e-6), 1e-6, self.config)
        self.assertIn("error", reason)
