"""Flow checkpoints: a manifest with the integrator state next to the raw ``u`` payload."""
import logging
from pathlib import Path
from typing import Union

from attr import attrib, attrs

from .codec import serialize
from .constants import FIELD_DTYPE, FORMAT_VERSION
from .errors import CheckpointError
from .field_io import field_paths, read_manifest, read_payload, write_json, write_payload
from .flow import FlowState
from .surface import ConformalMetric, Surface, SurfaceSpec

logger = logging.getLogger(__name__)


@attrs(frozen=True)
class CheckpointManifest:
    format_version: int = attrib()
    surface: SurfaceSpec = attrib()
    t: float = attrib()
    dt: float = attrib()
    step_count: int = attrib()
    offset: float = attrib()
    last_error: float = attrib()
    rejects: int = attrib()
    calabi_integral: float = attrib()
    gradk_integral: float = attrib()
    curve_length: float = attrib()
    initial_area: float = attrib()
    initial_mabuchi: float = attrib()
    count: int = attrib()
    dtype: str = attrib(default=FIELD_DTYPE)
    sha256: str = attrib(default="")
    config_hash: str = attrib(default="")


def checkpoint_save(state: FlowState, stem: Union[str, Path], config_hash: str = "") -> Path:
    digest = write_payload(stem, state.metric.u.values)
    manifest = CheckpointManifest(
        format_version=FORMAT_VERSION,
        surface=state.surface.spec,
        t=state.t,
        dt=state.dt,
        step_count=state.step_count,
        offset=state.offset,
        last_error=state.last_error,
        rejects=state.rejects,
        calabi_integral=state.calabi_integral,
        gradk_integral=state.gradk_integral,
        curve_length=state.curve_length,
        initial_area=state.initial_area,
        initial_mabuchi=state.initial_mabuchi,
        count=state.surface.node_count,
        sha256=digest,
        config_hash=config_hash,
    )
    manifest_path, _ = field_paths(stem)
    write_json(manifest_path, serialize(manifest))
    logger.debug("saved checkpoint t=%.6e to %s", state.t, manifest_path)
    return manifest_path


def checkpoint_load(stem: Union[str, Path]) -> FlowState:
    manifest_path, _ = field_paths(stem)
    manifest: CheckpointManifest = read_manifest(manifest_path, CheckpointManifest)
    if manifest.dtype != FIELD_DTYPE:
        raise CheckpointError(f"unsupported dtype {manifest.dtype!r} in {manifest_path}")
    surface = Surface.from_spec(manifest.surface)
    if manifest.count != surface.node_count:
        raise CheckpointError(
            f"{manifest_path} declares {manifest.count} values, surface has {surface.node_count}"
        )
    u = read_payload(stem, manifest.count, manifest.sha256)
    return FlowState(
        metric=ConformalMetric.from_values(surface, u),
        dt=manifest.dt,
        t=manifest.t,
        step_count=manifest.step_count,
        offset=manifest.offset,
        last_error=manifest.last_error,
        rejects=manifest.rejects,
        calabi_integral=manifest.calabi_integral,
        gradk_integral=manifest.gradk_integral,
        curve_length=manifest.curve_length,
        initial_area=manifest.initial_area,
        initial_mabuchi=manifest.initial_mabuchi,
    )
