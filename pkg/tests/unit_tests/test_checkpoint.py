import json
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np

from calabilab import CheckpointError, ConformalMetric, FlowState, checkpoint_load, checkpoint_save, step
from tests.test_fields import mode_metric, sphere, torus


def advanced_state() -> FlowState:
    state = FlowState.initial(mode_metric(torus(16), 0.01, normalized=True), 1e-7)
    return step(step(state, 1e-7), 2e-7)


class TestCheckpoint(TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.stem = Path(self.directory.name) / "checkpoint"

    def tearDown(self):
        self.directory.cleanup()

    def test_round_trip(self):
        state = advanced_state()
        checkpoint_save(state, self.stem, config_hash="abc")
        loaded = checkpoint_load(self.stem)
        np.testing.assert_array_equal(state.metric.u.values, loaded.metric.u.values)
        self.assertEqual(state.surface, loaded.surface)
        for name in (
            "t",
            "dt",
            "step_count",
            "offset",
            "last_error",
            "rejects",
            "calabi_integral",
            "gradk_integral",
            "curve_length",
            "initial_area",
            "initial_mabuchi",
        ):
            self.assertEqual(getattr(state, name), getattr(loaded, name), name)

    def test_round_trip_on_the_sphere(self):
        state = FlowState.initial(ConformalMetric.background(sphere(2)), 1e-6)
        checkpoint_save(state, self.stem)
        self.assertEqual(162, checkpoint_load(self.stem).surface.node_count)

    def test_manifest_names_the_hash_and_surface(self):
        manifest_path = checkpoint_save(advanced_state(), self.stem, config_hash="abc")
        data = json.loads(manifest_path.read_text())
        self.assertEqual("abc", data["config_hash"])
        self.assertEqual(1, data["format_version"])
        self.assertEqual(256, data["count"])
        self.assertTrue(Path(f"{self.stem}.f64").exists())

    def test_truncated_payload(self):
        checkpoint_save(advanced_state(), self.stem)
        payload = Path(f"{self.stem}.f64")
        payload.write_bytes(payload.read_bytes()[:-8])
        with self.assertRaisesRegex(CheckpointError, "corrupt"):
            checkpoint_load(self.stem)

    def test_altered_payload(self):
        checkpoint_save(advanced_state(), self.stem)
        payload = Path(f"{self.stem}.f64")
        data = bytearray(payload.read_bytes())
        data[3] ^= 0xFF
        payload.write_bytes(bytes(data))
        with self.assertRaisesRegex(CheckpointError, "checksum"):
            checkpoint_load(self.stem)

    def test_other_format_version(self):
        manifest_path = checkpoint_save(advanced_state(), self.stem)
        data = json.loads(manifest_path.read_text())
        data["format_version"] = 2
        manifest_path.write_text(json.dumps(data))
        with self.assertRaisesRegex(CheckpointError, "format version"):
            checkpoint_load(self.stem)

    def test_missing_checkpoint(self):
        with self.assertRaises(CheckpointError):
            checkpoint_load(self.stem)
