"""
Two-point geodesics in the space of potentials by minimizing the discrete path energy.

The energy of a path ``phi_0 .. phi_N`` is ``sum_k int ((phi_{k+1} - phi_k) / h)^2 dmu_k h`` where ``dmu_k`` averages
the measures of the two segment endpoints. Interior nodes are moved by gradient descent, preconditioned with the
second-difference operator along the path, under an Armijo line search and a logarithmic barrier on
``1 + lap0 phi``.
"""
import logging
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from attr import attrib, attrs
from scipy import linalg

from .codec import serialize
from .constants import FORMAT_VERSION
from .errors import ContractViolation, GeodesicFailure, InvalidArgument
from .field_io import payload_hash, write_field, write_json
from .flow import run
from .potentials import (
    Potential,
    PotentialPath,
    geodesic_residual,
    path_energy,
    path_length,
)
from .surface import ConformalMetric

logger = logging.getLogger(__name__)

ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-12
RELATIVE_STAGNATION = 1e-12

Endpoint = Union[Potential, ConformalMetric]


@attrs(frozen=True)
class GeodesicSettings:
    nodes: int = attrib(default=16)
    tolerance: float = attrib(default=1e-6)
    max_iterations: int = attrib(default=200)
    barrier: float = attrib(default=1e-12)

    def __attrs_post_init__(self):
        if self.nodes < 8:
            raise InvalidArgument(f"geodesics need at least 8 segments, got {self.nodes}")
        if not self.tolerance > 0 or self.max_iterations < 1 or self.barrier < 0:
            raise InvalidArgument("geodesic tolerance, iteration count and barrier must be positive")


def _as_potential(endpoint: Endpoint) -> Potential:
    if isinstance(endpoint, Potential):
        return endpoint
    if isinstance(endpoint, ConformalMetric):
        return Potential.from_metric(endpoint)
    raise ContractViolation(f"expected a Potential or a ConformalMetric, got {type(endpoint).__name__}")


class _PathEnergy:
    """Barrier-augmented path energy over the interior nodes, with its weighted gradient."""

    def __init__(self, surface, nodes: int, barrier: float) -> None:
        self.grid = surface.grid
        self.weights = surface.weights
        self.barrier = barrier
        self.h = 1.0 / nodes

    def densities(self, values: np.ndarray) -> np.ndarray:
        return np.stack([1.0 + self.grid.laplace0(row) for row in values])

    def value(self, values: np.ndarray, densities: np.ndarray) -> float:
        if np.any(densities <= 0):
            return math.inf
        increments = np.diff(values, axis=0)
        measures = 0.5 * (densities[:-1] + densities[1:]) * self.weights
        energy = np.sum(measures * increments ** 2) / self.h
        if self.barrier:
            energy -= self.barrier * np.sum(self.weights * np.log(densities[1:-1]))
        return float(energy)

    def gradient(self, values: np.ndarray, densities: np.ndarray) -> np.ndarray:
        """Gradient with respect to the interior nodes, divided by the quadrature weights."""
        increments = np.diff(values, axis=0)
        coefficients = densities[:-1] + densities[1:]
        flux = coefficients * increments
        squares = increments ** 2
        gradient = np.empty((len(values) - 2, values.shape[1]))
        for j in range(1, len(values) - 1):
            gradient[j - 1] = (
                flux[j - 1] - flux[j] + self.grid.laplace0(0.5 * (squares[j - 1] + squares[j]))
            ) / self.h
            if self.barrier:
                gradient[j - 1] -= self.barrier * self.grid.laplace0(1.0 / densities[j])
        return gradient

    def precondition(self, gradient: np.ndarray, densities: np.ndarray) -> np.ndarray:
        interior = len(gradient)
        banded = np.zeros((3, interior))
        banded[0, 1:] = -1.0
        banded[1, :] = 2.0
        banded[2, :-1] = -1.0
        scale = self.h / (2.0 * densities.mean(axis=0))
        return -linalg.solve_banded((1, 1), banded, gradient * scale)


def solve_geodesic(
    start: Endpoint, end: Endpoint, settings: Optional[GeodesicSettings] = None
) -> PotentialPath:
    settings = settings or GeodesicSettings()
    start, end = _as_potential(start), _as_potential(end)
    path = PotentialPath.linear(start, end, settings.nodes)
    problem = _PathEnergy(path.surface, settings.nodes, settings.barrier)
    values = np.array(path.values)
    densities = problem.densities(values)
    energy = problem.value(values, densities)
    history: List[float] = [energy]
    residual = geodesic_residual(path)
    iteration = 0
    while residual > settings.tolerance:
        if iteration >= settings.max_iterations:
            raise GeodesicFailure(
                f"no convergence after {iteration} iterations (residual {residual:.3e})",
                best_path=path.with_values(values, history),
            )
        iteration += 1
        gradient = problem.gradient(values, densities)
        direction = problem.precondition(gradient, densities)
        slope = float(np.sum(problem.weights * gradient * direction))
        step = 1.0
        while step >= MIN_STEP:
            trial = values.copy()
            trial[1:-1] += step * direction
            trial_densities = problem.densities(trial)
            trial_energy = problem.value(trial, trial_densities)
            if trial_energy <= energy + ARMIJO_SLOPE * step * slope:
                break
            step *= 0.5
        else:
            if residual <= 10 * settings.tolerance:
                logger.info("line search stalled at residual %.3e", residual)
                break
            raise GeodesicFailure(
                f"line search failed at iteration {iteration} (residual {residual:.3e})",
                best_path=path.with_values(values, history),
            )
        decrease = energy - trial_energy
        values, densities, energy = trial, trial_densities, trial_energy
        history.append(energy)
        path = path.with_values(values, history)
        residual = geodesic_residual(path)
        logger.debug("geodesic iteration %d: energy %.12e residual %.3e", iteration, energy, residual)
        if decrease <= RELATIVE_STAGNATION * max(abs(energy), np.finfo(float).tiny):
            break
    logger.info(
        "geodesic with %d segments converged in %d iterations (residual %.3e)",
        settings.nodes,
        iteration,
        residual,
    )
    return path.with_values(values, history)


def distance(first: Endpoint, second: Endpoint, settings: Optional[GeodesicSettings] = None) -> float:
    """Length of the computed geodesic; metrics are compared through their zero-offset potentials."""
    first, second = _as_potential(first), _as_potential(second)
    first.surface.check_same(second.surface)
    return path_length(solve_geodesic(first, second, settings))


@attrs(frozen=True)
class DistanceDecreaseReport:
    time: float = attrib()
    initial_distance: float = attrib()
    final_distance: float = attrib()
    tolerance: float = attrib()
    violated: bool = attrib()

    @property
    def ratio(self) -> float:
        if self.initial_distance == 0.0:
            return 0.0 if self.final_distance == 0.0 else math.inf
        return self.final_distance / self.initial_distance


def verify_distance_decrease(
    first: ConformalMetric,
    second: ConformalMetric,
    time: float,
    flow_config,
    settings: Optional[GeodesicSettings] = None,
) -> DistanceDecreaseReport:
    """Flows both metrics (and their potential offsets) to ``time`` and compares the distances."""
    config = flow_config.with_end_time(time)
    ends = []
    for metric in (first, second):
        trace = run(config, metric)
        ends.append(Potential.from_metric(trace.final_state.metric, trace.final_state.offset))
    initial = distance(first, second, settings)
    final = distance(ends[0], ends[1], settings)
    tolerance = 2 * (settings or GeodesicSettings()).tolerance + 1e-6 * initial
    report = DistanceDecreaseReport(time, initial, final, tolerance, final > initial + tolerance)
    if report.violated:
        logger.warning("distance grew from %.6e to %.6e under the flow", initial, final)
    return report


@attrs(frozen=True)
class PathIndex:
    format_version: int = attrib()
    nodes: int = attrib()
    parameters: List[float] = attrib()
    endpoint_hashes: List[str] = attrib()
    length: float = attrib()
    energy: float = attrib()
    residual: float = attrib()


def write_path(directory: Path, path: PotentialPath) -> PathIndex:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, row in enumerate(path.values):
        write_field(directory / f"node_{k:03d}", path.surface.field(row), name="phi")
    index = PathIndex(
        format_version=FORMAT_VERSION,
        nodes=path.nodes,
        parameters=[float(p) for p in path.parameters],
        endpoint_hashes=[payload_hash(path.values[0]), payload_hash(path.values[-1])],
        length=path_length(path),
        energy=path_energy(path),
        residual=geodesic_residual(path),
    )
    write_json(directory / "index.json", serialize(index))
    return index
