"""
The functionals monitored along the Calabi flow and the bookkeeping built on them.

All gradients are the real gradients of the background metric; with the factor convention of
:mod:`calabilab.operators` this gives ``d/dt Ma = -Ca`` and ``d/dt F = -1/2 int |grad K|^2`` exactly.
"""
import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from attr import attrib, attrs, fields
from scipy import integrate as quadrature

from .constants import TRACE_COLUMNS
from .errors import ContractViolation, FitFailure
from .operators import curvature_values
from .potentials import Potential
from .surface import ConformalMetric, Surface

logger = logging.getLogger(__name__)


@attrs(frozen=True)
class EnergySample:
    t: float = attrib()
    area: float = attrib()
    calabi: float = attrib()
    mabuchi_closed: float = attrib()
    mabuchi_integrated: float = attrib()
    liouville: float = attrib()
    gradk: float = attrib()
    lambda1: Optional[float] = attrib(default=None)
    kw_residual: Optional[float] = attrib(default=None)
    dt: float = attrib(default=0.0)
    tail_length_increment: float = attrib(default=0.0)
    calabi_integral: float = attrib(default=0.0)
    gradk_integral: float = attrib(default=0.0)

    def __attrs_post_init__(self):
        if not self.area > 0:
            raise ContractViolation(f"sample at t={self.t} has non-positive area {self.area}")
        if self.calabi < 0 or self.gradk < 0:
            raise ContractViolation(f"sample at t={self.t} has a negative energy")


@attrs(frozen=True)
class DecayFit:
    """``Ca(t) ~ prefactor * exp(-alpha t)`` over ``[t_start, t_end]``."""

    alpha: float = attrib()
    prefactor: float = attrib()
    t_start: float = attrib()
    t_end: float = attrib()
    residual: float = attrib()
    samples: int = attrib()

    def __call__(self, t):
        return self.prefactor * np.exp(-self.alpha * np.asarray(t))


def samples_of(trace) -> Sequence[EnergySample]:
    return getattr(trace, "samples", trace)


def curvature_excess(surface: Surface, u: np.ndarray) -> Tuple[np.ndarray, float]:
    """``K`` at the nodes and ``K_bar = 2 pi chi / A``."""
    area = float(np.dot(surface.weights, np.exp(2 * u)))
    return curvature_values(surface, u), 2 * math.pi * surface.euler_characteristic / area


def ledger_rates(surface: Surface, u: np.ndarray) -> Tuple[float, float, float]:
    """Calabi energy, ``int |grad K|^2`` and the background mean of ``K - K_bar`` for one state."""
    k, k_bar = curvature_excess(surface, u)
    w = surface.weights
    excess = k - k_bar
    calabi = float(np.dot(w, np.exp(2 * u) * excess ** 2))
    gradk = float(np.dot(w, surface.grid.grad_inner(k, k)))
    return calabi, max(gradk, 0.0), surface.mean0(excess)


def calabi_energy(metric: ConformalMetric) -> float:
    return ledger_rates(metric.surface, metric.u.values)[0]


def gradk_energy(metric: ConformalMetric) -> float:
    return ledger_rates(metric.surface, metric.u.values)[1]


def liouville_energy(metric: ConformalMetric) -> float:
    surface = metric.surface
    u = metric.u.values
    integrand = surface.grid.grad_inner(u, u) + 2 * surface.background_curvature * u
    return float(np.dot(surface.weights, integrand))


def mabuchi_energy_closed(potential: Potential) -> float:
    """
    ``int (1 + lap0 phi) log(1 + lap0 phi) - 1/4 K_bar |grad phi|^2 - (K0 - K_bar) phi dg0``,
    with the constant part of ``phi`` included.
    """
    surface = potential.surface
    density = potential.density
    phi = potential.values
    w = surface.weights
    k_bar = 2 * math.pi * surface.euler_characteristic / float(np.dot(w, density))
    integrand = (
        density * np.log(density)
        - 0.25 * k_bar * surface.grid.grad_inner(phi, phi)
        - (surface.background_curvature - k_bar) * phi
    )
    return float(np.dot(w, integrand))


def mabuchi_energy(metric: ConformalMetric, offset: float = 0.0) -> float:
    return mabuchi_energy_closed(Potential.from_metric(metric, offset))


def _times(samples: Sequence[EnergySample]) -> np.ndarray:
    t = np.array([s.t for s in samples], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ContractViolation("trace time stamps are not strictly increasing")
    return t


def mabuchi_energy_integrated(trace) -> np.ndarray:
    """``Ma(t) = Ma(t0) - int_t0^t Ca`` by trapezoid quadrature over the samples."""
    samples = samples_of(trace)
    if not samples:
        return np.zeros(0)
    t = _times(samples)
    calabi = np.array([s.calabi for s in samples])
    return samples[0].mabuchi_closed - quadrature.cumulative_trapezoid(calabi, t, initial=0.0)


def default_window(trace) -> Tuple[float, float]:
    samples = samples_of(trace)
    if not samples:
        raise FitFailure("empty trace")
    t0, t1 = samples[0].t, samples[-1].t
    return t0 + 0.5 * (t1 - t0), t1


def fit_exponential_decay(trace, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    samples = samples_of(trace)
    if window is None:
        window = default_window(samples)
    t_start, t_end = window
    selected = [s for s in samples if t_start <= s.t <= t_end]
    if len(selected) < 4:
        raise FitFailure(f"need at least 4 samples in [{t_start}, {t_end}], got {len(selected)}")
    t = np.array([s.t for s in selected])
    calabi = np.array([s.calabi for s in selected])
    if np.any(calabi <= 0):
        raise FitFailure("Calabi energy is not positive on the fit window")
    slope, intercept = np.polyfit(t, np.log(calabi), 1)
    residual = float(np.sqrt(np.mean((np.log(calabi) - (slope * t + intercept)) ** 2)))
    if not math.isfinite(slope):
        raise FitFailure("decay rate is not finite")
    return DecayFit(
        alpha=float(-slope),
        prefactor=float(math.exp(intercept)),
        t_start=float(t[0]),
        t_end=float(t[-1]),
        residual=residual,
        samples=len(selected),
    )


def _format(value) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(path: Path, trace, header_comment: str = "") -> None:
    with open(path, "w", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for sample in samples_of(trace):
            writer.writerow([_format(getattr(sample, name)) for name in TRACE_COLUMNS])


def read_trace_csv(path: Path) -> List[EnergySample]:
    optional = {f.name for f in fields(EnergySample) if f.default is None}
    with open(path, newline="") as f:
        rows = csv.DictReader(line for line in f if not line.startswith("#"))
        if rows.fieldnames is None or tuple(rows.fieldnames) != TRACE_COLUMNS:
            raise ContractViolation(f"{path} does not carry the trace header")
        return [
            EnergySample(
                **{
                    name: (None if name in optional else 0.0) if row[name] == "" else float(row[name])
                    for name in TRACE_COLUMNS
                }
            )
            for row in rows
        ]


def finite_differences(times: Iterable[float], values: Iterable[float]) -> np.ndarray:
    """Central differences at the interior samples."""
    t = np.asarray(list(times), dtype=float)
    v = np.asarray(list(values), dtype=float)
    return (v[2:] - v[:-2]) / (t[2:] - t[:-2])
