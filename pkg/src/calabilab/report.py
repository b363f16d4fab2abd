"""
Run summaries and the invariant checks behind the exit codes.

Gating checks are area conservation, monotonicity of ``Ca``, both Mabuchi variants and ``F``, and the
absence of concentration. The flow-derivative identities are reported but do not gate.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from attr import attrib, attrs
from more_itertools import pairwise

from .concentration import HolderReport
from .constants import FORMAT_VERSION
from .energy import DecayFit, EnergySample, finite_differences, fit_exponential_decay
from .errors import FitFailure
from .geodesic import DistanceDecreaseReport
from .potentials import TailReport, flow_curve_tail
from .spectral import BandReport, ConvergenceReport

logger = logging.getLogger(__name__)

TAIL_LEVELS = 4
KW_RESIDUAL_LIMIT = 0.05


@attrs(frozen=True)
class Check:
    name: str = attrib()
    passed: bool = attrib()
    detail: str = attrib(default="")
    gating: bool = attrib(default=True)


@attrs(frozen=True)
class RunSummary:
    config_hash: str = attrib()
    status: str = attrib()
    t_final: float = attrib()
    steps: int = attrib()
    rejects: int = attrib()
    area_drift: float = attrib()
    checks: List[Check] = attrib(factory=list)
    final: Optional[EnergySample] = attrib(default=None)
    decay: Optional[DecayFit] = attrib(default=None)
    band: Optional[BandReport] = attrib(default=None)
    kw_residual: Optional[float] = attrib(default=None)
    convergence: Optional[ConvergenceReport] = attrib(default=None)
    concentration_max: Optional[float] = attrib(default=None)
    holder: Optional[HolderReport] = attrib(default=None)
    tail: Optional[TailReport] = attrib(default=None)
    distance_checks: List[DistanceDecreaseReport] = attrib(factory=list)
    identities: Dict[str, float] = attrib(factory=dict)
    failure: Optional[str] = attrib(default=None)
    failure_time: Optional[float] = attrib(default=None)
    wall_time: float = attrib(default=0.0)
    format_version: int = attrib(default=FORMAT_VERSION)

    @property
    def passed(self) -> bool:
        return self.status == "completed" and all(c.passed for c in self.checks if c.gating)


def monotone_check(name: str, samples: Sequence[EnergySample], column: str, slack: float) -> Check:
    worst = 0.0
    at = None
    for a, b in pairwise(samples):
        increase = getattr(b, column) - getattr(a, column)
        if increase > worst:
            worst, at = increase, b.t
    passed = worst <= slack
    detail = f"largest increase {worst:.3e}" + (f" at t={at:.6e}" if at is not None else "")
    return Check(name, passed, detail)


def trace_checks(
    samples: Sequence[EnergySample], step_tolerance: float, area_tolerance: float
) -> List[Check]:
    if not samples:
        return [Check("trace", False, "no samples")]
    slack = 10 * step_tolerance
    area0 = samples[0].area
    drift = max(abs(s.area / area0 - 1.0) for s in samples)
    return [
        Check("area_conservation", drift <= area_tolerance, f"relative drift {drift:.3e}"),
        monotone_check("calabi_monotone", samples, "calabi", slack),
        monotone_check("mabuchi_closed_monotone", samples, "mabuchi_closed", slack),
        monotone_check("mabuchi_integrated_monotone", samples, "mabuchi_integrated", slack),
        monotone_check("liouville_monotone", samples, "liouville", slack),
    ]


def concentration_check(max_product: Optional[float], flagged: bool) -> List[Check]:
    if max_product is None:
        return []
    return [Check("no_concentration", not flagged, f"max E*A {max_product:.4f}")]


def kazdan_warner_check(residual: Optional[float]) -> List[Check]:
    if residual is None:
        return []
    return [Check("kazdan_warner", residual <= KW_RESIDUAL_LIMIT, f"residual {residual:.3e}", gating=False)]


def _relative_mismatch(measured: np.ndarray, expected: np.ndarray) -> float:
    scale = float(np.max(np.abs(expected))) if len(expected) else 0.0
    if scale == 0.0:
        return 0.0 if not len(measured) or np.max(np.abs(measured)) == 0.0 else math.inf
    return float(np.max(np.abs(measured - expected)) / scale)


def derivative_identities(samples: Sequence[EnergySample]) -> Dict[str, float]:
    """
    Largest relative mismatch of ``dMa/dt = -Ca`` and ``dF/dt = -1/2 int |grad K|^2`` at the interior samples,
    with the derivatives taken by central differences.
    """
    if len(samples) < 3:
        return {}
    t = [s.t for s in samples]
    interior = samples[1:-1]
    mabuchi_rate = finite_differences(t, [s.mabuchi_closed for s in samples])
    liouville_rate = finite_differences(t, [s.liouville for s in samples])
    return {
        "mabuchi_rate": _relative_mismatch(mabuchi_rate, -np.array([s.calabi for s in interior])),
        "liouville_rate": _relative_mismatch(liouville_rate, -0.5 * np.array([s.gradk for s in interior])),
    }


def tail_table(samples: Sequence[EnergySample], fit: Optional[DecayFit] = None) -> List[TailReport]:
    """Tail lengths from ``t_end (1 - 2^-j)`` to ``t_end``: the Cauchy property of the flow curve."""
    if len(samples) < 2:
        return []
    t0, t1 = samples[0].t, samples[-1].t
    starts = [t1 - (t1 - t0) * 0.5 ** j for j in range(1, TAIL_LEVELS + 1)]
    return [flow_curve_tail(samples, s, t1, fit) for s in starts]


def try_decay_fit(samples: Sequence[EnergySample], window=None) -> Optional[DecayFit]:
    try:
        return fit_exponential_decay(samples, window)
    except FitFailure as e:
        logger.info("no decay fit: %s", e)
        return None


def render_text(summary: RunSummary, tails: Sequence[TailReport] = ()) -> str:
    lines = [f"status: {summary.status}"]
    if summary.failure:
        lines.append(f"failure at t={summary.failure_time}: {summary.failure}")
        if summary.final is not None:
            lines.append(f"last good sample: t={summary.final.t:.6e}, Ca={summary.final.calabi:.6e}")
    lines.append(f"t_final={summary.t_final:.6e}  steps={summary.steps}  rejects={summary.rejects}")
    lines.append(f"area drift: {summary.area_drift:.3e}")
    lines.append("")
    lines.append("checks:")
    for check in summary.checks:
        mark = "PASS" if check.passed else "FAIL"
        suffix = "" if check.gating else " (not gating)"
        lines.append(f"  [{mark}] {check.name}: {check.detail}{suffix}")
    if summary.identities:
        lines.append("derivative identities (relative mismatch):")
        for name, value in sorted(summary.identities.items()):
            lines.append(f"  {name}: {value:.3e}")
    if summary.decay is not None:
        d = summary.decay
        lines.append(
            f"decay fit: alpha={d.alpha:.6g}  C={d.prefactor:.6g}  on [{d.t_start:.4g}, {d.t_end:.4g}]"
            f"  rms residual {d.residual:.3e}"
        )
    if summary.band is not None:
        b = summary.band
        lines.append(
            f"spectrum: lambda={', '.join(f'{x:.6g}' for x in b.eigenvalues)}"
            f"  band dim {b.band_dimension}  gap {'ok' if b.gap_ok else 'not open'}"
        )
    if summary.kw_residual is not None:
        lines.append(f"Kazdan-Warner residual: {summary.kw_residual:.3e}")
    if summary.concentration_max is not None:
        lines.append(f"concentration: max E*A = {summary.concentration_max:.6g}")
    if summary.holder is not None:
        h = summary.holder
        lines.append(f"local area Holder constant {h.constant:.4e} (predicted {h.predicted_constant:.4e})")
    for report in summary.distance_checks:
        lines.append(
            f"distance {report.initial_distance:.6e} -> {report.final_distance:.6e} at T={report.time:.4g}"
            f"  ratio {report.ratio:.4f}{'  VIOLATED' if report.violated else ''}"
        )
    if tails:
        lines.append("")
        lines.append(f"{'s':>14} {'t':>14} {'tail length':>14} {'sqrt bound':>14} {'literal bound':>14}")
        for row in tails:
            sqrt_bound = "-" if row.sqrt_bound is None else f"{row.sqrt_bound:.6e}"
            literal = "-" if row.literal_bound is None else f"{row.literal_bound:.6e}"
            lines.append(f"{row.s:14.6e} {row.t:14.6e} {row.length:14.6e} {sqrt_bound:>14} {literal:>14}")
    return "\n".join(lines) + "\n"


def write_text_report(path: Path, summary: RunSummary, tails: Sequence[TailReport] = ()) -> Path:
    path = Path(path)
    path.write_text(render_text(summary, tails))
    return path
