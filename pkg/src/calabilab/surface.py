import math
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from attr import attrib, attrs, validators

from .errors import ContractViolation
from .sphere import SphereMesh
from .torus import TorusGrid


class Topology(Enum):
    TORUS = "torus"
    SPHERE = "sphere"

    @property
    def euler_characteristic(self) -> int:
        return 0 if self is Topology.TORUS else 2

    @property
    def background_curvature(self) -> float:
        return 0.0 if self is Topology.TORUS else 1.0


def _pair(instance, attribute, value):
    if not isinstance(value, tuple) or len(value) != 2:
        raise ValueError(f"{attribute.name} must be a pair, got {value!r}")


@attrs(frozen=True)
class SurfaceSpec:
    """Everything needed to rebuild a surface; written into every manifest."""

    topology: Topology = attrib(validator=validators.instance_of(Topology))
    lengths: Tuple[float, float] = attrib(default=(1.0, 1.0), validator=_pair)
    resolution: Tuple[int, int] = attrib(default=(64, 64), validator=_pair)
    level: int = attrib(default=3)
    dealias: bool = attrib(default=False)

    @classmethod
    def torus(cls, lx=1.0, ly=1.0, nx=64, ny=64, dealias=False) -> "SurfaceSpec":
        return cls(Topology.TORUS, (float(lx), float(ly)), (nx, ny), dealias=dealias)

    @classmethod
    def sphere(cls, level=3) -> "SurfaceSpec":
        return cls(Topology.SPHERE, level=level)


GridType = Union[TorusGrid, SphereMesh]


@attrs(frozen=True)
class Surface:
    spec: SurfaceSpec = attrib()
    grid: GridType = attrib(eq=False, repr=False)

    @classmethod
    def from_spec(cls, spec: SurfaceSpec) -> "Surface":
        return _build_surface(spec)

    @classmethod
    def torus(cls, lx=1.0, ly=1.0, nx=64, ny=64, dealias=False) -> "Surface":
        return cls.from_spec(SurfaceSpec.torus(lx, ly, nx, ny, dealias))

    @classmethod
    def sphere(cls, level=3) -> "Surface":
        return cls.from_spec(SurfaceSpec.sphere(level))

    @property
    def topology(self) -> Topology:
        return self.spec.topology

    @property
    def is_torus(self) -> bool:
        return self.topology is Topology.TORUS

    @property
    def node_count(self) -> int:
        return self.grid.node_count

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @property
    def background_area(self) -> float:
        return float(self.grid.area)

    @property
    def background_curvature(self) -> float:
        return self.topology.background_curvature

    @property
    def euler_characteristic(self) -> int:
        return self.topology.euler_characteristic

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.node_count))

    def constant(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.node_count, float(value)))

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def mean0(self, values: np.ndarray) -> float:
        """Background-area average."""
        return float(np.dot(self.weights, values) / self.background_area)

    def check_same(self, other: "Surface") -> None:
        if other is not self and other != self:
            raise ContractViolation(f"field lives on {other.spec}, expected {self.spec}")


@lru_cache(maxsize=16)
def _build_surface(spec: SurfaceSpec) -> Surface:
    if spec.topology is Topology.TORUS:
        grid = TorusGrid(spec.lengths[0], spec.lengths[1], *spec.resolution, dealias=spec.dealias)
    else:
        grid = SphereMesh(spec.level)
        if grid.euler_characteristic != 2:
            raise ContractViolation(f"icosphere has Euler characteristic {grid.euler_characteristic}")
    return Surface(spec, grid)


def _finite_values(instance, attribute, value):
    if value.shape != (instance.surface.node_count,):
        raise ContractViolation(
            f"{attribute.name} has shape {value.shape}, expected ({instance.surface.node_count},)"
        )
    if not np.all(np.isfinite(value)):
        raise ContractViolation(f"{attribute.name} contains non-finite entries")


def _frozen_array(dtype):
    def convert(values) -> np.ndarray:
        array = np.array(values, dtype=dtype)
        array.setflags(write=False)
        return array

    return convert


@attrs(frozen=True, eq=False)
class ScalarField:
    surface: Surface = attrib()
    values: np.ndarray = attrib(converter=_frozen_array(float), validator=_finite_values)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.surface, values)


@attrs(frozen=True, eq=False)
class TensorField2:
    """Component of a pure-type symmetric 2-tensor in the global coordinate frame."""

    surface: Surface = attrib()
    values: np.ndarray = attrib(converter=_frozen_array(complex), validator=_finite_values)


@attrs(frozen=True, eq=False)
class ConformalMetric:
    """``g = exp(2u) g0`` over the background metric of ``u.surface``."""

    u: ScalarField = attrib(validator=validators.instance_of(ScalarField))

    @classmethod
    def from_values(cls, surface: Surface, values) -> "ConformalMetric":
        return cls(ScalarField(surface, values))

    @classmethod
    def background(cls, surface: Surface) -> "ConformalMetric":
        return cls(surface.zeros())

    @property
    def surface(self) -> Surface:
        return self.u.surface

    @property
    def density(self) -> np.ndarray:
        return np.exp(2 * self.u.values)

    @property
    def area(self) -> float:
        return float(np.dot(self.surface.weights, self.density))

    @property
    def mean_curvature(self) -> float:
        """``2 pi chi / A``, never the discrete average of K."""
        return 2 * math.pi * self.surface.euler_characteristic / self.area

    def shifted(self, constant: float) -> "ConformalMetric":
        return ConformalMetric.from_values(self.surface, self.u.values + constant)

    def area_normalized(self) -> "ConformalMetric":
        """Shifts u by a constant so that the area equals the background area."""
        return self.shifted(-0.5 * math.log(self.area / self.surface.background_area))
