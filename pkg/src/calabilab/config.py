"""
Experiment configuration files and the named initial conditions.

Configs are JSON documents read strictly into the records below: unknown keys, missing mandatory keys,
wrong types and failed validators all raise :class:`ConfigError` naming the dotted path of the field.
"""
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple, Type, TypeVar, Union

import attr
import numpy as np
from attr import attrib, attrs

from .codec import loads, serialize
from .constants import FORMAT_VERSION
from .errors import ConfigError, InvalidArgument
from .field_io import read_field
from .flow import FlowConfig
from .geodesic import GeodesicSettings
from .mobius import round_bubble
from .potentials import Potential
from .surface import ConformalMetric, Surface, SurfaceSpec, Topology
from .utils import config_hash

logger = logging.getLogger(__name__)

T = TypeVar("T")

PRESET_ARITY = {
    "flat": 0,
    "round": 0,
    "torus_mode": 2,
    "sphere_band": 1,
    "sphere_quadrupole": 1,
    "sphere_bubble": 1,
    "random_smooth": 1,
}
PRESET_TOPOLOGY = {
    "flat": Topology.TORUS,
    "torus_mode": Topology.TORUS,
    "round": Topology.SPHERE,
    "sphere_band": Topology.SPHERE,
    "sphere_quadrupole": Topology.SPHERE,
    "sphere_bubble": Topology.SPHERE,
}
RANDOM_MODES = 3


def parse_preset(preset: str) -> Tuple[str, List[float]]:
    """``"torus_mode 1 0.01"`` -> ``("torus_mode", [1.0, 0.01])``."""
    name, *arguments = preset.split()
    if name not in PRESET_ARITY:
        raise InvalidArgument(f"unknown preset {name!r}; expected one of {', '.join(PRESET_ARITY)}")
    if len(arguments) != PRESET_ARITY[name]:
        raise InvalidArgument(f"preset {name!r} takes {PRESET_ARITY[name]} argument(s), got {len(arguments)}")
    try:
        values = [float(a) for a in arguments]
    except ValueError as e:
        raise InvalidArgument(f"preset {preset!r}: {e}") from e
    if not all(math.isfinite(v) for v in values):
        raise InvalidArgument(f"preset {preset!r} has non-finite arguments")
    if name == "torus_mode" and not values[0].is_integer():
        raise InvalidArgument(f"torus mode number must be an integer, got {values[0]}")
    if name == "sphere_bubble" and not values[0] > 0:
        raise InvalidArgument(f"bubble factor must be positive, got {values[0]}")
    return name, values


def _preset_or_file(instance, attribute, value):
    if (instance.preset is None) == (instance.field_file is None):
        raise InvalidArgument("exactly one of preset and field_file must be given")
    if instance.preset is not None:
        parse_preset(instance.preset)


@attrs(frozen=True)
class InitialSpec:
    preset: Optional[str] = attrib(default=None)
    field_file: Optional[Path] = attrib(default=None, validator=_preset_or_file)


@attrs(frozen=True)
class EndpointSpec:
    """An endpoint of a geodesic: a metric plus the constant part of its potential."""

    preset: Optional[str] = attrib(default=None)
    field_file: Optional[Path] = attrib(default=None, validator=_preset_or_file)
    offset: float = attrib(default=0.0)


@attrs(frozen=True)
class DiagnosticsSettings:
    spectrum_count: int = attrib(default=8)
    band_epsilon: float = attrib(default=0.1)
    kw_floor: float = attrib(default=1e-8)
    concentration_epsilon: Optional[float] = attrib(default=None)
    concentration_every: int = attrib(default=0)
    holder_center: Optional[int] = attrib(default=None)
    decay_window: Optional[Tuple[float, float]] = attrib(default=None)
    geodesic_pairs: List[EndpointSpec] = attrib(factory=list)
    geodesic: GeodesicSettings = attrib(factory=GeodesicSettings)
    dump_eigenfields: bool = attrib(default=False)
    plots: bool = attrib(default=True)


def _check_topology(topology: Topology, preset: Optional[str]) -> None:
    if preset is None:
        return
    name, _ = parse_preset(preset)
    expected = PRESET_TOPOLOGY.get(name)
    if expected is not None and expected is not topology:
        raise InvalidArgument(f"preset {name!r} needs a {expected.value}, got a {topology.value}")


def _known_version(instance, attribute, value):
    if value != FORMAT_VERSION:
        raise InvalidArgument(f"unsupported format version {value}, expected {FORMAT_VERSION}")


@attrs(frozen=True)
class ExperimentConfig:
    surface: SurfaceSpec = attrib()
    initial: InitialSpec = attrib()
    flow: FlowConfig = attrib(factory=FlowConfig)
    diagnostics: DiagnosticsSettings = attrib(factory=DiagnosticsSettings)
    output_dir: Path = attrib(default=Path("runs/default"))
    seed: int = attrib(default=0)
    format_version: int = attrib(default=FORMAT_VERSION, validator=_known_version)

    def __attrs_post_init__(self):
        _check_topology(self.surface.topology, self.initial.preset)

    def with_overrides(self, output_dir: Optional[Path] = None, seed: Optional[int] = None) -> "ExperimentConfig":
        changes = {}
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if seed is not None:
            changes["seed"] = seed
        return attr.evolve(self, **changes)


@attrs(frozen=True)
class GeodesicConfig:
    surface: SurfaceSpec = attrib()
    start: EndpointSpec = attrib()
    end: EndpointSpec = attrib()
    settings: GeodesicSettings = attrib(factory=GeodesicSettings)
    output_dir: Path = attrib(default=Path("runs/geodesic"))
    seed: int = attrib(default=0)
    format_version: int = attrib(default=FORMAT_VERSION, validator=_known_version)

    def __attrs_post_init__(self):
        _check_topology(self.surface.topology, self.start.preset)
        _check_topology(self.surface.topology, self.end.preset)

    def with_overrides(self, output_dir: Optional[Path] = None, seed: Optional[int] = None) -> "GeodesicConfig":
        changes = {}
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if seed is not None:
            changes["seed"] = seed
        return attr.evolve(self, **changes)


def load_config(path: Union[str, Path], config_type: Type[T] = ExperimentConfig) -> T:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    config = loads(text, config_type)
    logger.debug("loaded %s from %s", config_type.__name__, path)
    return config


def hash_of(config) -> str:
    return config_hash(serialize(config))


def _random_smooth(surface: Surface, amplitude: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if surface.topology is Topology.TORUS:
        x, y = surface.grid.coordinates
        lx, ly = surface.spec.lengths
        values = np.zeros(surface.node_count)
        for kx in range(-RANDOM_MODES, RANDOM_MODES + 1):
            for ky in range(0, RANDOM_MODES + 1):
                if ky == 0 and kx <= 0:
                    continue
                phase = 2 * math.pi * (kx * x / lx + ky * y / ly)
                a, b = rng.standard_normal(2) / (1 + kx * kx + ky * ky)
                values += a * np.cos(phase) + b * np.sin(phase)
    else:
        x, y, z = surface.grid.vertices.T
        monomials = [x, y, z, x * y, y * z, z * x, x * x - y * y, 3 * z * z - 1, x * y * z, z ** 3, x ** 3, y ** 3]
        values = sum(c * m for c, m in zip(rng.standard_normal(len(monomials)), monomials))
    values = values - surface.mean0(values)
    return amplitude * values / np.max(np.abs(values))


def preset_metric(surface: Surface, preset: str, seed: int = 0) -> ConformalMetric:
    """Builds a named initial metric, shifted to the background area."""
    _check_topology(surface.topology, preset)
    name, args = parse_preset(preset)
    if name in ("flat", "round"):
        return ConformalMetric.background(surface)
    if name == "torus_mode":
        k, a = int(args[0]), args[1]
        x, _ = surface.grid.coordinates
        values = a * np.cos(2 * math.pi * k * x / surface.spec.lengths[0])
    elif name == "sphere_band":
        values = args[0] * surface.grid.vertices.sum(axis=1) / math.sqrt(3.0)
    elif name == "sphere_quadrupole":
        z = surface.grid.vertices[:, 2]
        values = args[0] * 0.5 * (3 * z * z - 1)
    elif name == "sphere_bubble":
        return round_bubble(surface, args[0]).area_normalized()
    else:
        values = _random_smooth(surface, args[0], seed)
    return ConformalMetric.from_values(surface, values).area_normalized()


def _field_stem(path: Path) -> Path:
    return path.with_suffix("") if path.suffix == ".json" else path


def initial_metric(surface: Surface, spec: Union[InitialSpec, EndpointSpec], seed: int = 0) -> ConformalMetric:
    if spec.preset is not None:
        return preset_metric(surface, spec.preset, seed)
    field, _ = read_field(_field_stem(Path(spec.field_file)))
    surface.check_same(field.surface)
    return ConformalMetric(field).area_normalized()


def endpoint_potential(surface: Surface, spec: EndpointSpec, seed: int = 0) -> Potential:
    return Potential.from_metric(initial_metric(surface, spec, seed), spec.offset)
