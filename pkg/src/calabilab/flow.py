"""
Time integration of the Calabi flow ``du/dt = 1/2 lap_g K`` in conformal-factor form.

The base step is implicit in the constant-coefficient biharmonic part ``c lap_real^2 u`` with
``c = 1/4 max exp(-4u)`` and explicit in the remainder. Two half steps and one full step are combined by
Richardson extrapolation; their difference drives the step-size controller.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple, Union

import attr
import numpy as np
from attr import attrib, attrs

from .energy import EnergySample, ledger_rates, liouville_energy, mabuchi_energy
from .errors import ContractViolation, InvalidArgument, MonotonicityViolation, StepFailure, StiffnessFailure
from .operators import curvature_values
from .spectral import kazdan_warner_residual, low_spectrum
from .surface import ConformalMetric, Surface, Topology

logger = logging.getLogger(__name__)

MIN_DT = 1e-14
GROWTH = 1.3
SHRINK = 0.5
AREA_ROUNDOFF = 64 * np.finfo(float).eps
MONOTONICITY_SLACK = 10.0


def _positive(instance, attribute, value):
    if not value > 0:
        raise InvalidArgument(f"{attribute.name} must be positive, got {value}")


def _non_negative(instance, attribute, value):
    if not value >= 0:
        raise InvalidArgument(f"{attribute.name} must not be negative, got {value}")


def _optional_positive(instance, attribute, value):
    if value is not None:
        _positive(instance, attribute, value)


@attrs(frozen=True)
class FlowConfig:
    t_end: float = attrib(default=1e-3, validator=_non_negative)
    dt_init: float = attrib(default=1e-6, validator=_positive)
    dt_max: float = attrib(default=1e-2, validator=_positive)
    step_tolerance: float = attrib(default=1e-8, validator=_positive)
    area_tolerance: float = attrib(default=1e-6, validator=_positive)
    sample_interval: float = attrib(default=1e-4, validator=_positive)
    checkpoint_interval: Optional[float] = attrib(default=None, validator=_optional_positive)
    snapshot_every: int = attrib(default=1, validator=_non_negative)
    spectrum_every: int = attrib(default=0, validator=_non_negative)
    spectrum_count: int = attrib(default=8, validator=_positive)
    band_epsilon: float = attrib(default=0.1, validator=_positive)
    max_steps: int = attrib(default=10_000_000, validator=_positive)

    def with_end_time(self, t_end: float) -> "FlowConfig":
        return attr.evolve(self, t_end=t_end)


@attrs(frozen=True, eq=False)
class FlowState:
    """
    Everything the integrator carries between steps. ``offset`` is the background mean of the potential,
    advanced by ``dm/dt = mean(K - K_bar)``; the integrals accumulate ``Ca``, ``int |grad K|^2`` and
    ``sqrt(Ca)`` over time by the trapezoid rule, step by step.
    """

    metric: ConformalMetric = attrib()
    dt: float = attrib(validator=_positive)
    t: float = attrib(default=0.0, validator=_non_negative)
    step_count: int = attrib(default=0)
    offset: float = attrib(default=0.0)
    last_error: float = attrib(default=0.0)
    rejects: int = attrib(default=0)
    calabi_integral: float = attrib(default=0.0)
    gradk_integral: float = attrib(default=0.0)
    curve_length: float = attrib(default=0.0)
    initial_area: float = attrib(default=0.0)
    initial_mabuchi: float = attrib(default=0.0)

    @classmethod
    def initial(cls, metric: ConformalMetric, dt: float) -> "FlowState":
        return cls(
            metric=metric,
            dt=dt,
            initial_area=metric.area,
            initial_mabuchi=mabuchi_energy(metric),
        )

    @property
    def surface(self) -> Surface:
        return self.metric.surface

    @property
    def area_drift(self) -> float:
        return abs(self.metric.area / self.initial_area - 1.0)


@attrs(frozen=True, eq=False)
class Snapshot:
    t: float = attrib()
    u: np.ndarray = attrib(repr=False)
    offset: float = attrib(default=0.0)

    def metric(self, surface: Surface) -> ConformalMetric:
        return ConformalMetric.from_values(surface, self.u)


@attrs(eq=False)
class FlowTrace:
    config: FlowConfig = attrib()
    surface: Surface = attrib()
    samples: List[EnergySample] = attrib(factory=list)
    snapshots: List[Snapshot] = attrib(factory=list)
    final_state: Optional[FlowState] = attrib(default=None)
    failure: Optional[str] = attrib(default=None)
    monotonicity_violations: List[float] = attrib(factory=list)

    @property
    def completed(self) -> bool:
        return self.failure is None

    @property
    def failure_time(self) -> Optional[float]:
        if self.failure is None or self.final_state is None:
            return None
        return self.final_state.t


def flow_rate(surface: Surface, u: np.ndarray) -> np.ndarray:
    """``1/2 exp(-2u) lap0 K``, the full right-hand side of the flow."""
    grid = surface.grid
    k = curvature_values(surface, u)
    return grid.filter(0.5 * np.exp(-2 * u) * grid.laplace0(k))


def imex_step(surface: Surface, u: np.ndarray, dt: float) -> np.ndarray:
    """One first-order step: backward Euler on ``-c lap_real^2 u``, forward Euler on the rest."""
    grid = surface.grid
    c = 0.25 * float(np.max(np.exp(-4 * u)))
    explicit = u + dt * (flow_rate(surface, u) + c * grid.bilaplace_real(u))
    return grid.solve_implicit_bilaplace(explicit, dt * c)


LedgerRates = Tuple[float, float, float]


def step(state: FlowState, dt: float, start_rates: Optional[LedgerRates] = None) -> FlowState:
    """
    Advances ``state`` by ``dt`` and returns the candidate with ``last_error`` set; accepting or rejecting it
    is up to the caller. Raises :class:`StepFailure` when the solve fails or produces non-finite values.
    """
    if not dt > 0:
        raise ContractViolation(f"step size must be positive, got {dt}")
    surface = state.surface
    u = state.metric.u.values
    try:
        with np.errstate(over="raise", invalid="raise"):
            full = imex_step(surface, u, dt)
            half = imex_step(surface, imex_step(surface, u, 0.5 * dt), 0.5 * dt)
            new_u = 2 * half - full
    except FloatingPointError as e:
        raise StepFailure(f"step of {dt:.3e} at t={state.t:.6e} overflowed: {e}") from e
    if not np.all(np.isfinite(new_u)):
        raise StepFailure(f"step of {dt:.3e} at t={state.t:.6e} produced non-finite values")
    error = float(np.max(np.abs(half - full)))
    start = start_rates or ledger_rates(surface, u)
    end = ledger_rates(surface, new_u)
    return attr.evolve(
        state,
        metric=ConformalMetric.from_values(surface, new_u),
        t=state.t + dt,
        step_count=state.step_count + 1,
        offset=state.offset + 0.5 * dt * (start[2] + end[2]),
        last_error=error,
        calabi_integral=state.calabi_integral + 0.5 * dt * (start[0] + end[0]),
        gradk_integral=state.gradk_integral + 0.5 * dt * (start[1] + end[1]),
        curve_length=state.curve_length + 0.5 * dt * (math.sqrt(start[0]) + math.sqrt(end[0])),
    )


def sample(state: FlowState, config: FlowConfig, index: int, previous_length: float) -> EnergySample:
    metric = state.metric
    surface = state.surface
    calabi, gradk, _ = ledger_rates(surface, metric.u.values)
    lambda1 = kw_residual = None
    if config.spectrum_every and index % config.spectrum_every == 0:
        spectrum = low_spectrum(metric, config.spectrum_count, config.band_epsilon)
        lambda1 = spectrum.lambda1
        if surface.topology is Topology.SPHERE:
            kw_residual = kazdan_warner_residual(
                metric, config.band_epsilon, count=config.spectrum_count, spectrum=spectrum
            )
    return EnergySample(
        t=state.t,
        area=metric.area,
        calabi=calabi,
        mabuchi_closed=mabuchi_energy(metric, state.offset),
        mabuchi_integrated=state.initial_mabuchi - state.calabi_integral,
        liouville=liouville_energy(metric),
        gradk=gradk,
        lambda1=lambda1,
        kw_residual=kw_residual,
        dt=state.dt,
        tail_length_increment=state.curve_length - previous_length,
        calabi_integral=state.calabi_integral,
        gradk_integral=state.gradk_integral,
    )


def _check_initial(metric: ConformalMetric) -> None:
    surface = metric.surface
    mismatch = metric.area / surface.background_area - 1.0
    if abs(mismatch) > 1e-6:
        raise ContractViolation(
            f"initial metric area is off the background area by {mismatch:.2e}; use area_normalized()"
        )


def run(
    config: FlowConfig,
    initial: Union[ConformalMetric, FlowState],
    on_checkpoint: Optional[Callable[[FlowState], None]] = None,
) -> FlowTrace:
    """
    Integrates to ``config.t_end`` and samples the energy ledger at every multiple of the sample interval
    (and at ``t_end``). ``initial`` may be a checkpointed state, in which case the run continues exactly as
    the interrupted one would have. On failure the partial trace is attached to the raised error.
    """
    if isinstance(initial, FlowState):
        state = initial
        logger.info("resuming at t=%.6e after %d steps", state.t, state.step_count)
    else:
        _check_initial(initial)
        state = FlowState.initial(initial, config.dt_init)
    surface = state.surface
    trace = FlowTrace(config, surface)
    interval = config.sample_interval
    index = int(round(state.t / interval))
    length_at_sample = state.curve_length
    next_checkpoint = _next_checkpoint(state.t, config)

    def record(current: FlowState, k: int) -> None:
        nonlocal length_at_sample, next_checkpoint
        entry = sample(current, config, k, length_at_sample)
        length_at_sample = current.curve_length
        previous = trace.samples[-1] if trace.samples else None
        trace.samples.append(entry)
        if previous is not None and entry.calabi > previous.calabi + MONOTONICITY_SLACK * config.step_tolerance:
            trace.monotonicity_violations.append(current.t)
            trace.final_state = current
            trace.failure = (
                f"Calabi energy increased from {previous.calabi:.6e} to {entry.calabi:.6e} at t={current.t:.6e}"
            )
            logger.error("flow failed at t=%.6e: %s", current.t, trace.failure)
            raise MonotonicityViolation(trace.failure, trace=trace)
        if config.snapshot_every and k % config.snapshot_every == 0:
            trace.snapshots.append(Snapshot(current.t, current.metric.u.values, current.offset))
        logger.info(
            "t=%.6e  Ca=%.6e  Ma=%.6e  F=%.6e  dt=%.3e  steps=%d",
            current.t,
            entry.calabi,
            entry.mabuchi_closed,
            entry.liouville,
            current.dt,
            current.step_count,
        )
        if on_checkpoint is not None and next_checkpoint is not None and current.t >= next_checkpoint * (1 - 1e-12):
            on_checkpoint(current)
            logger.info("checkpoint at t=%.6e", current.t)
            next_checkpoint = _next_checkpoint(current.t, config)

    def fail(error_type, message: str) -> None:
        trace.final_state = state
        trace.failure = message
        logger.error("flow failed at t=%.6e: %s", state.t, message)
        raise error_type(message, trace=trace)

    record(state, index)
    rates = ledger_rates(surface, state.metric.u.values)
    while state.t < config.t_end:
        target = (index + 1) * interval
        if target >= config.t_end * (1 - 1e-12):
            target = config.t_end
        dt = min(state.dt, config.dt_max)
        clipped = state.t + dt >= target
        h = target - state.t if clipped else dt
        if state.step_count + state.rejects >= config.max_steps:
            fail(StiffnessFailure, f"step budget of {config.max_steps} exhausted")
        try:
            candidate = step(state, h, rates)
        except StepFailure as e:
            reason = str(e)
            candidate = None
        else:
            reason = _rejection(state, candidate, h, config)
        if reason:
            state = attr.evolve(state, dt=SHRINK * min(state.dt, h), rejects=state.rejects + 1)
            logger.debug("rejected step %.3e at t=%.6e: %s", h, state.t, reason)
            if state.dt < MIN_DT:
                fail(StiffnessFailure, f"step size fell below {MIN_DT} ({reason})")
            continue
        logger.debug("accepted step %.3e at t=%.6e, error %.3e", h, state.t, candidate.last_error)
        state = attr.evolve(
            candidate,
            t=target if clipped else candidate.t,
            dt=min(GROWTH * state.dt, config.dt_max),
        )
        rates = ledger_rates(surface, state.metric.u.values)
        if clipped:
            index += 1
            record(state, index)
    trace.final_state = state
    if state.area_drift > config.area_tolerance:
        logger.warning("area drifted by %.3e over the run", state.area_drift)
    return trace


def _rejection(state: FlowState, candidate: FlowState, h: float, config: FlowConfig) -> str:
    if candidate.last_error > config.step_tolerance:
        return f"error {candidate.last_error:.3e} above {config.step_tolerance:.1e}"
    change = abs(candidate.metric.area - state.metric.area) / state.initial_area
    allowed = max(config.area_tolerance * h / config.t_end, AREA_ROUNDOFF)
    if change > allowed:
        return f"area change {change:.3e} above {allowed:.1e}"
    return ""


def _next_checkpoint(t: float, config: FlowConfig) -> Optional[float]:
    if config.checkpoint_interval is None:
        return None
    return (math.floor(t / config.checkpoint_interval * (1 + 1e-12)) + 1) * config.checkpoint_interval
