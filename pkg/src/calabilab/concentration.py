"""
Local area and curvature energy around scan centers, and the time regularity of the local area.

``A_eps(p) = int eta_eps(d(p, .)) dg`` with a smooth cutoff that is 1 on the ball of radius ``eps/2`` and 0
outside the ball of radius ``eps``; ``E_eps(p) = int_{B_eps(p)} K^2 dg``.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from attr import attrib, attrs
from more_itertools import pairwise

from .constants import GENERAL_CONCENTRATION_THRESHOLD, SHARP_CONCENTRATION_THRESHOLD
from .errors import ContractViolation, InvalidArgument
from .operators import curvature_values
from .surface import ConformalMetric, Surface, Topology

logger = logging.getLogger(__name__)

FLAG_FRACTION = 0.9
TORUS_STRIDE = 4


def cutoff(r, epsilon: float) -> np.ndarray:
    """Quintic smoothstep profile: 1 for ``r <= eps/2``, 0 for ``r >= eps``, C2 in between."""
    s = np.clip((np.asarray(r, dtype=float) / epsilon - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def _check_radius(surface: Surface, epsilon: float) -> None:
    if not 0 < epsilon < surface.grid.injectivity_radius:
        raise InvalidArgument(
            f"scan radius {epsilon} must lie in (0, {surface.grid.injectivity_radius:.6g})"
        )


def default_centers(surface: Surface) -> List[int]:
    """Every vertex of the sphere mesh; every fourth node in each direction of the torus grid."""
    if surface.topology is Topology.SPHERE:
        return list(range(surface.node_count))
    nx, ny = surface.grid.shape
    ix, iy = np.meshgrid(np.arange(0, nx, TORUS_STRIDE), np.arange(0, ny, TORUS_STRIDE), indexing="ij")
    return list(np.ravel_multi_index((ix.ravel(), iy.ravel()), (nx, ny)))


def _neighbourhood(surface: Surface, center: int, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """Node indices within ``eps`` of the center and their geodesic distances."""
    grid = surface.grid
    point = surface.points[center]
    if surface.topology is Topology.SPHERE:
        chord = 2.0 * math.sin(0.5 * epsilon)
        nodes = np.array(sorted(grid.vertex_tree.query_ball_point(point, chord * (1 + 1e-12))), dtype=int)
        distances = np.arccos(np.clip(grid.vertices[nodes] @ grid.vertices[center], -1.0, 1.0))
    else:
        distances = grid.distance_from(point)
        nodes = np.flatnonzero(distances <= epsilon)
        distances = distances[nodes]
    return nodes, distances


@attrs(frozen=True)
class ConcentrationReport:
    epsilon: float = attrib()
    centers: List[int] = attrib()
    local_area: List[float] = attrib()
    local_energy: List[float] = attrib()
    inner_area: List[float] = attrib()
    outer_area: List[float] = attrib()
    max_product: float = attrib()
    argmax_center: int = attrib()
    flagged_centers: List[int] = attrib()
    general_threshold: float = attrib(default=GENERAL_CONCENTRATION_THRESHOLD)
    sharp_threshold: float = attrib(default=SHARP_CONCENTRATION_THRESHOLD)

    @property
    def flagged(self) -> bool:
        return bool(self.flagged_centers)

    @property
    def exceeds_general(self) -> bool:
        return self.max_product >= self.general_threshold


def concentration_scan(
    metric: ConformalMetric, epsilon: float, centers: Optional[Sequence[int]] = None
) -> ConcentrationReport:
    surface = metric.surface
    _check_radius(surface, epsilon)
    centers = default_centers(surface) if centers is None else [int(c) for c in centers]
    if not centers:
        raise ContractViolation("no scan centers")
    measure = surface.weights * metric.density
    curvature_sq = curvature_values(surface, metric.u.values) ** 2
    local_area, local_energy, inner, outer = [], [], [], []
    for center in centers:
        nodes, distances = _neighbourhood(surface, center, epsilon)
        mass = measure[nodes]
        hard = distances < epsilon
        local_area.append(float(np.dot(mass, cutoff(distances, epsilon))))
        local_energy.append(float(np.dot(mass[hard], curvature_sq[nodes][hard])))
        inner.append(float(mass[distances <= 0.5 * epsilon].sum()))
        outer.append(float(mass[hard].sum()))
    products = np.array(local_area) * np.array(local_energy)
    best = int(np.argmax(products))
    flagged = [c for c, p in zip(centers, products) if p >= FLAG_FRACTION * SHARP_CONCENTRATION_THRESHOLD]
    if flagged:
        logger.warning(
            "%d center(s) within 10%% of the 16 pi^2 threshold at eps=%g (max E*A=%.4f)",
            len(flagged),
            epsilon,
            products[best],
        )
    return ConcentrationReport(
        epsilon=epsilon,
        centers=centers,
        local_area=local_area,
        local_energy=local_energy,
        inner_area=inner,
        outer_area=outer,
        max_product=float(products[best]),
        argmax_center=centers[best],
        flagged_centers=flagged,
    )


def local_area(metric: ConformalMetric, epsilon: float, center: int) -> float:
    surface = metric.surface
    _check_radius(surface, epsilon)
    nodes, distances = _neighbourhood(surface, center, epsilon)
    return float(np.dot(surface.weights[nodes] * metric.density[nodes], cutoff(distances, epsilon)))


def cutoff_gradient_norm(surface: Surface, epsilon: float, center: int) -> float:
    """``||grad eta_eps||`` in ``L2(g0)``, which is conformally invariant."""
    eta = cutoff(surface.grid.distance_from(surface.points[center]), epsilon)
    return math.sqrt(max(float(np.dot(surface.weights, surface.grid.grad_inner(eta, eta))), 0.0))


@attrs(frozen=True)
class HolderReport:
    epsilon: float = attrib()
    center: int = attrib()
    times: List[float] = attrib()
    local_area: List[float] = attrib()
    constant: float = attrib()
    predicted_constant: float = attrib()
    satisfied: bool = attrib()


def area_holder_check(trace, epsilon: float, center: int, slack: float = 1e-3) -> HolderReport:
    """
    Smallest ``C1`` with ``|A_eps(p, t2) - A_eps(p, t1)| <= C1 sqrt(t2 - t1)`` over all snapshot pairs, against
    ``1/2 ||grad eta_eps|| (int int |grad K|^2)^(1/2)`` over the run.
    """
    snapshots = trace.snapshots
    if len(snapshots) < 2:
        raise ContractViolation(f"need at least 2 snapshots, the trace has {len(snapshots)}")
    surface = trace.surface
    times = [s.t for s in snapshots]
    areas = [local_area(s.metric(surface), epsilon, center) for s in snapshots]
    constant = 0.0
    for i, j in ((i, j) for i in range(len(times)) for j in range(i + 1, len(times))):
        span = times[j] - times[i]
        if span > 0:
            constant = max(constant, abs(areas[j] - areas[i]) / math.sqrt(span))
    gradk_total = _gradk_integral_between(trace, times[0], times[-1])
    predicted = 0.5 * cutoff_gradient_norm(surface, epsilon, center) * math.sqrt(gradk_total)
    satisfied = constant <= predicted * (1 + slack) + 1e-14
    if not satisfied:
        logger.warning("local area Holder constant %.4e exceeds the predicted %.4e", constant, predicted)
    return HolderReport(epsilon, center, times, areas, constant, predicted, satisfied)


def _gradk_integral_between(trace, t0: float, t1: float) -> float:
    """``int_t0^t1 int |grad K|^2 dt`` from the running integral carried by the samples."""
    by_time = {s.t: s.gradk_integral for s in trace.samples}
    if t0 in by_time and t1 in by_time:
        return max(by_time[t1] - by_time[t0], 0.0)
    total = 0.0
    for a, b in pairwise(trace.samples):
        lo, hi = max(a.t, t0), min(b.t, t1)
        if hi > lo:
            total += 0.5 * (a.gradk + b.gradk) * (hi - lo)
    return total
