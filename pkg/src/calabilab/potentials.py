"""
Geometry of the space of potentials: ``g_phi = (1 + lap0 phi) g0`` with the L2 metric ``int psi^2 dmu_phi``.

A potential is stored as a zero-mean field plus a scalar offset; metrics only see the zero-mean part, while
distances in the space of potentials also see the offset.
"""
import math
from functools import cached_property
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np
from attr import attrib, attrs
from scipy import integrate as quadrature

from .errors import ContractViolation, DegeneratePlane, InvalidPotential, UnsupportedOperation
from .surface import ConformalMetric, ScalarField, Surface

if TYPE_CHECKING:
    from .energy import DecayFit

AREA_MATCH_TOLERANCE = 1e-5
MEAN_TOLERANCE = 1e-9


def _zero_mean(instance, attribute, value):
    surface = value.surface
    scale = 1.0 + float(np.max(np.abs(value.values)))
    if abs(surface.mean0(value.values)) > MEAN_TOLERANCE * scale:
        raise ContractViolation("potential must have zero background mean; use the offset")


@attrs(frozen=True, eq=False)
class Potential:
    phi: ScalarField = attrib(validator=_zero_mean)
    offset: float = attrib(default=0.0, converter=float)

    def __attrs_post_init__(self):
        density = self.density
        if not np.all(density > 0):
            raise InvalidPotential(
                f"1 + lap0(phi) is not positive (min {float(density.min()):.3e})"
            )

    @classmethod
    def from_values(cls, surface: Surface, values) -> "Potential":
        values = np.asarray(values, dtype=float)
        mean = surface.mean0(values)
        return cls(ScalarField(surface, values - mean), mean)

    @classmethod
    def zero(cls, surface: Surface, offset: float = 0.0) -> "Potential":
        return cls(surface.zeros(), offset)

    @classmethod
    def from_metric(cls, metric: ConformalMetric, offset: float = 0.0) -> "Potential":
        """Solves ``lap0 phi = exp(2u) - 1`` with zero background mean."""
        surface = metric.surface
        mismatch = metric.area / surface.background_area - 1.0
        if abs(mismatch) > AREA_MATCH_TOLERANCE:
            raise ContractViolation(
                f"metric area differs from the background area by {mismatch:.2e} (relative)"
            )
        phi = surface.grid.solve_laplace0(metric.density - 1.0)
        return cls(ScalarField(surface, phi - surface.mean0(phi)), offset)

    @property
    def surface(self) -> Surface:
        return self.phi.surface

    @property
    def values(self) -> np.ndarray:
        return self.phi.values + self.offset

    @cached_property
    def density(self) -> np.ndarray:
        return 1.0 + self.surface.grid.laplace0(self.phi.values)

    def to_metric(self) -> ConformalMetric:
        return ConformalMetric.from_values(self.surface, 0.5 * np.log(self.density))


def _values(surface: Surface, f: Union[ScalarField, np.ndarray]) -> np.ndarray:
    if isinstance(f, ScalarField):
        surface.check_same(f.surface)
        return f.values
    values = np.asarray(f, dtype=float)
    if values.shape != (surface.node_count,):
        raise ContractViolation(f"field has shape {values.shape}, expected ({surface.node_count},)")
    return values


def tangent_norm(potential: Potential, psi: Union[ScalarField, np.ndarray]) -> float:
    """Returns ``||psi||_phi^2 = int psi^2 dmu_phi``."""
    surface = potential.surface
    values = _values(surface, psi)
    return float(np.dot(surface.weights * potential.density, values ** 2))


def tangent_inner(potential: Potential, f, h) -> float:
    surface = potential.surface
    return float(np.dot(surface.weights * potential.density, _values(surface, f) * _values(surface, h)))


def poisson_bracket(potential: Potential, f, h) -> ScalarField:
    """``{f, h}_phi = (f_x h_y - f_y h_x) / (1 + lap0 phi)``."""
    surface = potential.surface
    if not surface.is_torus:
        raise UnsupportedOperation("the Poisson bracket is only available on the torus")
    fx, fy = surface.grid.gradient(_values(surface, f))
    hx, hy = surface.grid.gradient(_values(surface, h))
    return ScalarField(surface, (fx * hy - fy * hx) / potential.density)


def sectional_curvature(potential: Potential, first, second) -> float:
    """``-1/4 ||{e1, e2}_phi||_phi^2`` for the orthonormalized pair spanned by the two directions."""
    surface = potential.surface
    first = _values(surface, first)
    second = _values(surface, second)
    first_norm = math.sqrt(tangent_norm(potential, first))
    second_norm = math.sqrt(tangent_norm(potential, second))
    if first_norm == 0.0 or second_norm == 0.0:
        raise DegeneratePlane("a tangent direction vanishes")
    e1 = first / first_norm
    rest = second - tangent_inner(potential, second, e1) * e1
    rest_norm = math.sqrt(tangent_norm(potential, rest))
    if rest_norm <= 1e-10 * second_norm:
        raise DegeneratePlane("tangent directions are linearly dependent")
    bracket = poisson_bracket(potential, e1, rest / rest_norm)
    return -0.25 * tangent_norm(potential, bracket)


def _path_shape(instance, attribute, value):
    if value.ndim != 2 or value.shape[0] < 2 or value.shape[1] != instance.surface.node_count:
        raise ContractViolation(f"path values have shape {value.shape}")
    if not np.all(np.isfinite(value)):
        raise ContractViolation("path contains non-finite values")


def _read_only(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@attrs(frozen=True, eq=False)
class PotentialPath:
    """Potentials at the uniform parameters ``k / N`` of ``[0, 1]``; rows include the offsets."""

    surface: Surface = attrib()
    values: np.ndarray = attrib(converter=_read_only, validator=_path_shape)
    energy_history: tuple = attrib(default=(), converter=tuple)

    def __attrs_post_init__(self):
        if not np.all(self.densities > 0):
            raise InvalidPotential("a path node violates 1 + lap0(phi) > 0")

    @classmethod
    def from_potentials(cls, potentials: Sequence[Potential]) -> "PotentialPath":
        surface = potentials[0].surface
        for p in potentials:
            surface.check_same(p.surface)
        return cls(surface, np.stack([p.values for p in potentials]))

    @classmethod
    def linear(cls, start: Potential, end: Potential, nodes: int) -> "PotentialPath":
        start.surface.check_same(end.surface)
        s = np.linspace(0.0, 1.0, nodes + 1)[:, None]
        return cls(start.surface, (1 - s) * start.values + s * end.values)

    @property
    def nodes(self) -> int:
        return self.values.shape[0] - 1

    @property
    def step(self) -> float:
        return 1.0 / self.nodes

    @property
    def parameters(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nodes + 1)

    @cached_property
    def densities(self) -> np.ndarray:
        grid = self.surface.grid
        return np.stack([1.0 + grid.laplace0(row) for row in self.values])

    @property
    def velocities(self) -> np.ndarray:
        """Per-segment velocity fields."""
        return np.diff(self.values, axis=0) / self.step

    def potential(self, k: int) -> Potential:
        return Potential.from_values(self.surface, self.values[k])

    def with_values(self, values, energy_history=()) -> "PotentialPath":
        return PotentialPath(self.surface, values, energy_history)


def segment_measures(path: PotentialPath) -> np.ndarray:
    """``(dmu_k + dmu_{k+1}) / 2`` per segment, including the quadrature weights."""
    d = path.densities
    return 0.5 * (d[:-1] + d[1:]) * path.surface.weights


def path_energy(path: PotentialPath) -> float:
    increments = np.diff(path.values, axis=0)
    return float(np.sum(segment_measures(path) * increments ** 2) / path.step)


def path_length(path: PotentialPath) -> float:
    increments = np.diff(path.values, axis=0)
    return float(np.sum(np.sqrt(np.sum(segment_measures(path) * increments ** 2, axis=1))))


def covariant_derivative(path: PotentialPath, psi) -> np.ndarray:
    """``D_t psi = d psi/dt - 1/2 (grad psi, grad phi')_phi`` at every node, by central differences."""
    psi = np.stack([_values(path.surface, p) for p in psi])
    if psi.shape != path.values.shape:
        raise ContractViolation(
            f"field series has {psi.shape[0]} samples, path has {path.values.shape[0]}"
        )
    grid = path.surface.grid
    psi_t = np.gradient(psi, path.step, axis=0)
    phi_t = np.gradient(path.values, path.step, axis=0)
    correction = np.stack(
        [grid.grad_inner(p, v) / d for p, v, d in zip(psi, phi_t, path.densities)]
    )
    return psi_t - 0.5 * correction


def geodesic_residual(path: PotentialPath) -> float:
    """Largest ``||phi'' - 1/2 |grad phi'|^2_phi||_phi`` over the interior nodes."""
    if path.nodes < 2:
        raise ContractViolation("the geodesic residual needs at least one interior node")
    h = path.step
    values = path.values
    grid = path.surface.grid
    w = path.surface.weights
    worst = 0.0
    for k in range(1, path.nodes):
        acceleration = (values[k + 1] - 2 * values[k] + values[k - 1]) / h ** 2
        velocity = (values[k + 1] - values[k - 1]) / (2 * h)
        density = path.densities[k]
        residual = acceleration - 0.5 * grid.grad_inner(velocity, velocity) / density
        worst = max(worst, math.sqrt(float(np.dot(w * density, residual ** 2))))
    return worst


@attrs(frozen=True)
class TailReport:
    s: float = attrib()
    t: float = attrib()
    length: float = attrib()
    literal_bound: Optional[float] = attrib(default=None)
    sqrt_bound: Optional[float] = attrib(default=None)


def flow_curve_tail(trace, s: float, t: float, fit: Optional["DecayFit"] = None) -> TailReport:
    """
    ``int_s^t sqrt(Ca)``, the length of the flow curve between two times, which bounds the distance between
    the two metrics. With a decay fit both closed-form bounds are reported: the one integrating ``C e^{-at}``
    and the one integrating its square root.
    """
    samples = getattr(trace, "samples", trace)
    times = np.array([x.t for x in samples], dtype=float)
    if len(times) == 0 or not times[0] <= s <= t <= times[-1]:
        raise ContractViolation(f"window [{s}, {t}] is not inside the trace")
    speed = np.sqrt(np.array([x.calabi for x in samples], dtype=float))
    inner = (times > s) & (times < t)
    grid_t = np.concatenate([[s], times[inner], [t]])
    grid_v = np.concatenate([[np.interp(s, times, speed)], speed[inner], [np.interp(t, times, speed)]])
    length = float(quadrature.trapezoid(grid_v, grid_t)) if t > s else 0.0
    literal = sqrt_bound = None
    if fit is not None and fit.alpha > 0:
        a, c = fit.alpha, fit.prefactor
        literal = c * (math.exp(-a * s) - math.exp(-a * t)) / a
        sqrt_bound = 2 * math.sqrt(c) * (math.exp(-0.5 * a * s) - math.exp(-0.5 * a * t)) / a
    return TailReport(s, t, length, literal, sqrt_bound)
