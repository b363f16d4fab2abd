"""
Low spectrum of ``-lap_g`` and the diagnostics built on its first band.

The generalized problem ``-lap0 x = lambda exp(2u) x`` is solved by Lanczos iteration on the inverse operator,
symmetrized with ``B^(1/2)``, ``B = diag(w exp(2u))``, and with the constant mode deflated.
"""
import logging
import math
import warnings
from functools import cached_property
from typing import List, Optional

import numpy as np
from attr import attrib, attrs
from scipy.sparse import linalg as splinalg

from .energy import EnergySample, curvature_excess, samples_of
from .errors import EigenSolverError, InvalidArgument
from .surface import ConformalMetric, Topology

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-13
RESIDUAL_TOLERANCE = 1e-8
UPPER_BAND_FLOOR = 2.0
KW_MESH_FACTOR = 1.0
_START_SEED = 20240601


@attrs(frozen=True)
class BandReport:
    eigenvalues: List[float] = attrib()
    epsilon: float = attrib()
    band_eigenvalues: List[float] = attrib()
    band_dimension: int = attrib()
    gap_ok: bool = attrib()
    residual: float = attrib()


@attrs(frozen=True, eq=False)
class SpectrumReport:
    """Eigenvalues ascending, eigenfields (one per row) orthonormal in ``L2(g)``."""

    eigenvalues: np.ndarray = attrib()
    eigenfields: np.ndarray = attrib()
    residual: float = attrib()
    epsilon: float = attrib(default=0.1)

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @cached_property
    def band(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.eigenvalues - 1.0) < self.epsilon)

    @property
    def gap_ok(self) -> bool:
        """Every eigenvalue outside ``(1 - eps, 1 + eps)`` lies above 2."""
        outside = np.delete(self.eigenvalues, self.band)
        return bool(np.all(outside > UPPER_BAND_FLOOR))

    def summary(self) -> BandReport:
        return BandReport(
            eigenvalues=[float(x) for x in self.eigenvalues],
            epsilon=self.epsilon,
            band_eigenvalues=[float(x) for x in self.eigenvalues[self.band]],
            band_dimension=len(self.band),
            gap_ok=self.gap_ok,
            residual=self.residual,
        )


def _start_vector(n: int) -> np.ndarray:
    return np.random.default_rng(_START_SEED).standard_normal(n)


def low_spectrum(metric: ConformalMetric, k: int, epsilon: float = 0.1) -> SpectrumReport:
    """The ``k`` smallest nonzero eigenvalues of ``-lap_g``."""
    surface = metric.surface
    grid = surface.grid
    n = surface.node_count
    if k < 1 or k >= n - 2:
        raise InvalidArgument(f"cannot compute {k} eigenvalues on {n} nodes")
    u = metric.u.values
    if surface.is_torus and np.all(u == u[0]):
        return _fourier_spectrum(metric, k, epsilon)
    w = surface.weights
    b = w * metric.density
    root_b = np.sqrt(b)
    constant = root_b / np.linalg.norm(root_b)

    def deflate(y):
        return y - constant * np.dot(constant, y)

    def apply_inverse(y):
        r = root_b * deflate(np.ravel(y))
        return deflate(root_b * grid.solve_laplace0(-r / w))

    operator = splinalg.LinearOperator((n, n), matvec=apply_inverse, dtype=float)
    ncv = min(n - 1, max(2 * k + 1, 20))
    maxiter = 100 * n
    try:
        values, vectors = splinalg.eigsh(
            operator,
            k=k,
            which="LA",
            v0=deflate(_start_vector(n)),
            ncv=ncv,
            tol=EIGEN_TOLERANCE,
            maxiter=maxiter,
        )
    except splinalg.ArpackNoConvergence as e:
        raise EigenSolverError(
            f"Lanczos iteration found {len(e.eigenvalues)} of {k} eigenvalues", iterations=maxiter
        ) from e
    if np.any(values <= 0):
        raise EigenSolverError("inverse operator returned a non-positive eigenvalue", iterations=maxiter)
    order = np.argsort(-values)
    eigenvalues = 1.0 / values[order]
    fields = (vectors[:, order] / root_b[:, None]).T
    residual = _relative_residual(metric, eigenvalues, fields)
    if residual > RESIDUAL_TOLERANCE:
        warnings.warn(f"eigenpair residual {residual:.2e} above {RESIDUAL_TOLERANCE}", RuntimeWarning, stacklevel=2)
    logger.debug("lambda_1..%d = %s", k, np.array2string(eigenvalues, precision=6))
    return SpectrumReport(eigenvalues, fields, residual, epsilon)


def _fourier_spectrum(metric: ConformalMetric, k: int, epsilon: float) -> SpectrumReport:
    """Exact spectrum of a constant multiple of the flat metric; ``-lap_g = exp(-2u) (-lap0)``."""
    scale = math.exp(-2 * float(metric.u.values[0]))
    eigenvalues, fields = metric.surface.grid.low_modes(k)
    eigenvalues = eigenvalues * scale
    fields = fields * math.sqrt(scale)
    residual = _relative_residual(metric, eigenvalues, fields)
    logger.debug("flat torus lambda_1..%d = %s", k, np.array2string(eigenvalues, precision=6))
    return SpectrumReport(eigenvalues, fields, residual, epsilon)


def _relative_residual(metric: ConformalMetric, eigenvalues: np.ndarray, fields: np.ndarray) -> float:
    grid = metric.surface.grid
    b = metric.surface.weights * metric.density
    inverse_density = np.exp(-2 * metric.u.values)
    worst = 0.0
    for lam, x in zip(eigenvalues, fields):
        r = grid.laplace0(x) * inverse_density + lam * x
        worst = max(worst, math.sqrt(np.dot(b, r ** 2) / np.dot(b, x ** 2)) / lam)
    return worst


def lambda_first_band(
    metric: ConformalMetric, epsilon: float = 0.1, count: int = 8, spectrum: Optional[SpectrumReport] = None
) -> SpectrumReport:
    """The spectrum with its band ``(1 - eps, 1 + eps)`` marked; ``band`` indexes the eigenfields spanning it."""
    if spectrum is None or spectrum.epsilon != epsilon:
        spectrum = spectrum and SpectrumReport(spectrum.eigenvalues, spectrum.eigenfields, spectrum.residual, epsilon)
        spectrum = spectrum or low_spectrum(metric, count, epsilon)
    if metric.surface.topology is Topology.SPHERE and len(spectrum.band) == 0:
        warnings.warn(f"no eigenvalue within {epsilon} of 1 on the sphere", RuntimeWarning, stacklevel=2)
    return spectrum


@attrs(frozen=True)
class KazdanWarnerProjection:
    projection_norm: float = attrib()
    excess_norm: float = attrib()
    band_dimension: int = attrib()


def kazdan_warner_projection(
    metric: ConformalMetric, epsilon: float = 0.1, count: int = 8, spectrum: Optional[SpectrumReport] = None
) -> KazdanWarnerProjection:
    """``L2(g)`` norms of ``K - K_bar`` and of its projection onto the first band."""
    surface = metric.surface
    k, k_bar = curvature_excess(surface, metric.u.values)
    excess = k - k_bar
    b = surface.weights * metric.density
    excess_norm = math.sqrt(float(np.dot(b, excess ** 2)))
    if surface.topology is not Topology.SPHERE:
        return KazdanWarnerProjection(0.0, excess_norm, 0)
    spectrum = lambda_first_band(metric, epsilon, count, spectrum)
    coefficients = spectrum.eigenfields[spectrum.band] @ (b * excess)
    return KazdanWarnerProjection(
        float(np.linalg.norm(coefficients)), excess_norm, len(spectrum.band)
    )


def kazdan_warner_residual(
    metric: ConformalMetric,
    epsilon: float = 0.1,
    floor: float = 1e-8,
    count: int = 8,
    spectrum: Optional[SpectrumReport] = None,
) -> float:
    """
    Relative size of the first-band component of ``K - K_bar``; 0 once ``||K - K_bar||`` is below ``floor``.
    The norm it is relative to never drops below :func:`kazdan_warner_floor`, so the curvature error of the mesh
    does not count as a band component near convergence.
    """
    surface = metric.surface
    if surface.topology is not Topology.SPHERE:
        return 0.0
    k, k_bar = curvature_excess(surface, metric.u.values)
    b = surface.weights * metric.density
    if math.sqrt(float(np.dot(b, (k - k_bar) ** 2))) < floor:
        return 0.0
    projection = kazdan_warner_projection(metric, epsilon, count, spectrum)
    return projection.projection_norm / max(projection.excess_norm, _mesh_floor(surface, b, k, floor))


def kazdan_warner_floor(metric: ConformalMetric, floor: float = 1e-8) -> float:
    """``max(floor, c h^2 ||K||)`` on the sphere, ``h`` the mean edge length; ``floor`` elsewhere."""
    surface = metric.surface
    k, _ = curvature_excess(surface, metric.u.values)
    return _mesh_floor(surface, surface.weights * metric.density, k, floor)


def _mesh_floor(surface, b: np.ndarray, k: np.ndarray, floor: float) -> float:
    if surface.topology is not Topology.SPHERE:
        return floor
    return max(floor, KW_MESH_FACTOR * surface.grid.mesh_size ** 2 * math.sqrt(float(np.dot(b, k ** 2))))


@attrs(frozen=True)
class ConvergenceReport:
    tail_start: float = attrib()
    calabi_start: float = attrib()
    calabi_end: float = attrib()
    gradk_start: float = attrib()
    gradk_end: float = attrib()
    converging: bool = attrib()
    poincare_samples: int = attrib()
    poincare_ok: bool = attrib()


def convergence_conditions(trace, fraction: float = 0.5) -> ConvergenceReport:
    """
    Over the last ``fraction`` of the trace: whether both ``Ca`` and ``int |grad K|^2`` decay, and whether
    ``Ca <= int |grad K|^2 / (2 lambda_1)`` at every sample where ``lambda_1`` was computed.
    """
    samples: List[EnergySample] = list(samples_of(trace))
    if not samples:
        raise InvalidArgument("empty trace")
    t0, t1 = samples[0].t, samples[-1].t
    start = t1 - fraction * (t1 - t0)
    tail = [s for s in samples if s.t >= start]
    first, last = tail[0], tail[-1]
    converging = last.calabi <= first.calabi and last.gradk <= first.gradk
    checked = [s for s in samples if s.lambda1 is not None and s.lambda1 > 0]
    poincare_ok = all(
        s.calabi <= s.gradk / (2 * s.lambda1) * (1 + 1e-6) + 1e-14 for s in checked
    )
    return ConvergenceReport(
        tail_start=first.t,
        calabi_start=first.calabi,
        calabi_end=last.calabi,
        gradk_start=first.gradk,
        gradk_end=last.gradk,
        converging=converging,
        poincare_samples=len(checked),
        poincare_ok=poincare_ok,
    )
