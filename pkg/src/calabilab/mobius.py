"""
Conformal automorphisms of the unit sphere, acting through stereographic projection from the north pole.

Points are handled in homogeneous coordinates ``(z1 : z2)`` so that the pole maps without special cases.
"""
from typing import Tuple

import numpy as np
from attr import attrib, attrs

from .errors import ContractViolation, InvalidArgument
from .surface import ConformalMetric, Surface, Topology

DEGENERACY_TOLERANCE = 1e-12


@attrs(frozen=True)
class MobiusMap:
    """``z -> (a z + b) / (c z + d)``."""

    a: complex = attrib(default=1.0, converter=complex)
    b: complex = attrib(default=0.0, converter=complex)
    c: complex = attrib(default=0.0, converter=complex)
    d: complex = attrib(default=1.0, converter=complex)

    def __attrs_post_init__(self):
        scale = abs(self.a) ** 2 + abs(self.b) ** 2 + abs(self.c) ** 2 + abs(self.d) ** 2
        if abs(self.determinant) <= DEGENERACY_TOLERANCE * scale:
            raise InvalidArgument(f"degenerate Mobius map, ad - bc = {self.determinant}")

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls()

    @classmethod
    def dilation(cls, factor: float) -> "MobiusMap":
        return cls(a=factor)

    @classmethod
    def rotation(cls, angle: float) -> "MobiusMap":
        """Rotation about the polar axis."""
        return cls(a=np.exp(0.5j * angle), d=np.exp(-0.5j * angle))

    @property
    def determinant(self) -> complex:
        return self.a * self.d - self.b * self.c

    def apply(self, points: np.ndarray) -> np.ndarray:
        z1, z2 = to_homogeneous(points)
        return from_homogeneous(self.a * z1 + self.b * z2, self.c * z1 + self.d * z2)

    def density(self, points: np.ndarray) -> np.ndarray:
        """
        Pullback factor of the round metric: ``|f'(z)|^2 (1+|z|^2)^2 / (1+|f(z)|^2)^2``, written homogeneously.
        """
        z1, z2 = to_homogeneous(points)
        w1 = self.a * z1 + self.b * z2
        w2 = self.c * z1 + self.d * z2
        source = np.abs(z1) ** 2 + np.abs(z2) ** 2
        target = np.abs(w1) ** 2 + np.abs(w2) ** 2
        return abs(self.determinant) ** 2 * (source / target) ** 2


def to_homogeneous(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x, y, z = np.asarray(points, dtype=float).T
    southern = z <= 0
    z1 = np.where(southern, x + 1j * y, 1 + z)
    z2 = np.where(southern, 1 - z, x - 1j * y)
    return z1, z2


def from_homogeneous(w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    norm = np.abs(w1) ** 2 + np.abs(w2) ** 2
    planar = 2 * w1 * np.conj(w2) / norm
    return np.column_stack([planar.real, planar.imag, (np.abs(w1) ** 2 - np.abs(w2) ** 2) / norm])


def stereographic(points: np.ndarray) -> np.ndarray:
    """Complex coordinate of each point; the north pole maps to ``inf``."""
    z1, z2 = to_homogeneous(points)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z2 == 0, np.inf, z1 / z2)


def _require_sphere(surface: Surface) -> None:
    if surface.topology is not Topology.SPHERE:
        raise ContractViolation("Mobius maps act on the sphere only")


def mobius_pullback(metric: ConformalMetric, mobius: MobiusMap) -> ConformalMetric:
    """
    Expresses ``f^* g`` as a conformal factor on the same mesh. The transported factor ``u(f(x))`` is
    resampled by barycentric interpolation; the round part is exact.
    """
    _require_sphere(metric.surface)
    mesh = metric.surface.grid
    vertices = mesh.vertices
    transported = mesh.interpolate(metric.u.values, mobius.apply(vertices))
    return ConformalMetric.from_values(
        metric.surface, transported + 0.5 * np.log(mobius.density(vertices))
    )


def round_bubble(surface: Surface, factor: float) -> ConformalMetric:
    """The dilation of the round metric by ``factor``; area concentrates around the south pole."""
    _require_sphere(surface)
    if not factor > 0:
        raise InvalidArgument(f"dilation factor must be positive, got {factor}")
    vertices = surface.grid.vertices
    return ConformalMetric.from_values(
        surface, 0.5 * np.log(MobiusMap.dilation(factor).density(vertices))
    )
