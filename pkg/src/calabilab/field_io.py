"""
Field files: a JSON manifest next to a raw little-endian float64 payload.

``write_field("out/u", field)`` produces ``out/u.json`` and ``out/u.f64``; the surface is rebuilt from the
manifest alone.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from attr import attrib, attrs

from .codec import loads, serialize
from .constants import FIELD_DTYPE, FORMAT_VERSION, MANIFEST_SUFFIX, PAYLOAD_SUFFIX
from .errors import CheckpointError, ConfigError
from .surface import ScalarField, Surface, SurfaceSpec, Topology

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@attrs(frozen=True)
class FieldManifest:
    format_version: int = attrib()
    topology: Topology = attrib()
    resolution: str = attrib()
    surface: SurfaceSpec = attrib()
    field_name: str = attrib()
    count: int = attrib()
    dtype: str = attrib(default=FIELD_DTYPE)
    sha256: str = attrib(default="")


def _resolution_label(spec: SurfaceSpec) -> str:
    if spec.topology is Topology.TORUS:
        return f"{spec.resolution[0]}x{spec.resolution[1]}"
    return f"level{spec.level}"


def field_paths(stem: PathLike) -> Tuple[Path, Path]:
    stem = Path(stem)
    return Path(f"{stem}{MANIFEST_SUFFIX}"), Path(f"{stem}{PAYLOAD_SUFFIX}")


def payload_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def payload_hash(values: np.ndarray) -> str:
    return hashlib.sha256(payload_bytes(values)).hexdigest()


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_payload(stem: PathLike, values: np.ndarray) -> str:
    _, payload_path = field_paths(stem)
    payload_path.parent.mkdir(parents=True, exist_ok=True)
    data = payload_bytes(values)
    payload_path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_payload(stem: PathLike, count: int, sha256: str = "") -> np.ndarray:
    _, payload_path = field_paths(stem)
    try:
        data = payload_path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read payload {payload_path}: {e}") from e
    if len(data) != 8 * count:
        raise CheckpointError(
            f"corrupt payload {payload_path}: {len(data)} bytes, expected {8 * count}"
        )
    if sha256 and hashlib.sha256(data).hexdigest() != sha256:
        raise CheckpointError(f"corrupt payload {payload_path}: checksum mismatch")
    return np.frombuffer(data, dtype="<f8").astype(float)


def read_manifest(path: Path, manifest_type):
    try:
        text = path.read_text()
    except OSError as e:
        raise CheckpointError(f"cannot read manifest {path}: {e}") from e
    try:
        manifest = loads(text, manifest_type)
    except ConfigError as e:
        raise CheckpointError(f"invalid manifest {path}: {e}") from e
    if manifest.format_version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {manifest.format_version}, expected {FORMAT_VERSION}"
        )
    return manifest


def write_field(stem: PathLike, field: ScalarField, name: str = "u") -> Path:
    spec = field.surface.spec
    digest = write_payload(stem, field.values)
    manifest = FieldManifest(
        format_version=FORMAT_VERSION,
        topology=spec.topology,
        resolution=_resolution_label(spec),
        surface=spec,
        field_name=name,
        count=len(field),
        sha256=digest,
    )
    manifest_path, _ = field_paths(stem)
    write_json(manifest_path, serialize(manifest))
    logger.debug("wrote field %s to %s", name, manifest_path)
    return manifest_path


def read_field(stem: PathLike) -> Tuple[ScalarField, str]:
    manifest_path, _ = field_paths(stem)
    manifest = read_manifest(manifest_path, FieldManifest)
    if manifest.dtype != FIELD_DTYPE:
        raise CheckpointError(f"unsupported dtype {manifest.dtype!r} in {manifest_path}")
    surface = Surface.from_spec(manifest.surface)
    if manifest.count != surface.node_count:
        raise CheckpointError(
            f"{manifest_path} declares {manifest.count} values, surface has {surface.node_count}"
        )
    values = read_payload(stem, manifest.count, manifest.sha256)
    return ScalarField(surface, values), manifest.field_name
