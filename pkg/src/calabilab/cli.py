"""
Command line entry point.

Exit codes: 0 when every enabled check passes, 1 on an invariant violation, 2 on usage or configuration
errors, 3 on numerical failure (partial outputs are kept).
"""
import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from attr import attrib, attrs

from .checkpoint import checkpoint_load, checkpoint_save
from .codec import serialize
from .concentration import area_holder_check, concentration_scan
from .config import (
    ExperimentConfig,
    GeodesicConfig,
    endpoint_potential,
    hash_of,
    initial_metric,
    load_config,
)
from .constants import FORMAT_VERSION
from .energy import EnergySample, read_trace_csv, write_trace_csv
from .errors import (
    CalabiLabError,
    CheckpointError,
    ConfigError,
    ContractViolation,
    EigenSolverError,
    GeodesicFailure,
    InvalidArgument,
    MonotonicityViolation,
    StepFailure,
)
from .field_io import write_field, write_json
from .flow import FlowTrace, run
from .geodesic import solve_geodesic, verify_distance_decrease, write_path
from .plots import plot_decay, plot_energies, plot_tail
from .potentials import flow_curve_tail, geodesic_residual, path_length
from .report import (
    Check,
    RunSummary,
    concentration_check,
    kazdan_warner_check,
    derivative_identities,
    tail_table,
    trace_checks,
    try_decay_fit,
    write_text_report,
)
from .spectral import convergence_conditions, kazdan_warner_residual, low_spectrum
from .surface import ConformalMetric, Surface, Topology

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.json"

STATUS_COMPLETED = "completed"
STATUS_VIOLATED = "violated"
STATUS_FAILED = "failed"


def configure_logging(quiet: bool = False) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _prepare(config, out: Path) -> str:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / CONFIG_FILE, serialize(config))
    return hash_of(config)


def _start_metric(config: ExperimentConfig, checkpoint: Optional[Path]) -> ConformalMetric:
    if checkpoint is not None:
        state = checkpoint_load(checkpoint)
        Surface.from_spec(config.surface).check_same(state.surface)
        return state.metric
    return initial_metric(Surface.from_spec(config.surface), config.initial, config.seed)


def _status(trace: FlowTrace) -> str:
    if trace.completed:
        return STATUS_COMPLETED
    return STATUS_VIOLATED if trace.monotonicity_violations else STATUS_FAILED


def summarize(
    config: ExperimentConfig,
    trace: FlowTrace,
    digest: str,
    initial: ConformalMetric,
    wall_time: float,
) -> RunSummary:
    diagnostics = config.diagnostics
    samples = trace.samples
    state = trace.final_state
    metric = state.metric
    checks = trace_checks(samples, config.flow.step_tolerance, config.flow.area_tolerance)
    decay = try_decay_fit(samples, diagnostics.decay_window) if len(samples) >= 4 else None

    band = kw = None
    if trace.completed and diagnostics.spectrum_count > 0:
        try:
            spectrum = low_spectrum(metric, diagnostics.spectrum_count, diagnostics.band_epsilon)
        except EigenSolverError as e:
            logger.error("final spectrum failed: %s", e)
            checks.append(Check("final_spectrum", False, str(e), gating=False))
        else:
            band = spectrum.summary()
            if metric.surface.topology is Topology.SPHERE:
                kw = kazdan_warner_residual(
                    metric,
                    diagnostics.band_epsilon,
                    diagnostics.kw_floor,
                    diagnostics.spectrum_count,
                    spectrum,
                )
                checks += kazdan_warner_check(kw)

    concentration_max = holder = None
    if diagnostics.concentration_epsilon is not None:
        eps = diagnostics.concentration_epsilon
        scanned = [metric]
        if diagnostics.concentration_every:
            scanned += [s.metric(trace.surface) for s in trace.snapshots[:: diagnostics.concentration_every]]
        reports = [concentration_scan(m, eps) for m in scanned]
        concentration_max = max(r.max_product for r in reports)
        checks += concentration_check(concentration_max, any(r.flagged for r in reports))
        if diagnostics.holder_center is not None and len(trace.snapshots) >= 2:
            holder = area_holder_check(trace, eps, diagnostics.holder_center)
            checks.append(Check("area_holder", holder.satisfied, f"C1={holder.constant:.4e}", gating=False))

    distance_checks = []
    if trace.completed and diagnostics.geodesic_pairs and state.t > 0:
        for spec in diagnostics.geodesic_pairs:
            other = initial_metric(trace.surface, spec, config.seed)
            report = verify_distance_decrease(initial, other, state.t, config.flow, diagnostics.geodesic)
            distance_checks.append(report)
        violated = [r for r in distance_checks if r.violated]
        checks.append(Check("distance_decrease", not violated, f"{len(violated)} violation(s)"))

    tail = None
    if len(samples) >= 2 and samples[-1].t > samples[0].t:
        middle = 0.5 * (samples[0].t + samples[-1].t)
        tail = flow_curve_tail(samples, middle, samples[-1].t, decay)

    return RunSummary(
        config_hash=digest,
        status=_status(trace),
        t_final=state.t,
        steps=state.step_count,
        rejects=state.rejects,
        area_drift=state.area_drift,
        checks=checks,
        final=samples[-1] if samples else None,
        decay=decay,
        band=band,
        kw_residual=kw,
        convergence=convergence_conditions(samples) if samples else None,
        concentration_max=concentration_max,
        holder=holder,
        tail=tail,
        distance_checks=distance_checks,
        identities=derivative_identities(samples),
        failure=trace.failure,
        failure_time=trace.failure_time,
        wall_time=wall_time,
    )


def write_plots(out: Path, summary: RunSummary, samples) -> None:
    plot_energies(samples, out / "plots" / "energies.svg", summary.failure_time)
    if summary.decay is not None:
        plot_decay(samples, summary.decay, out / "plots" / "decay.svg")
    tails = tail_table(samples, summary.decay)
    if tails:
        plot_tail(tails, out / "plots" / "tail.svg")


def run_flow_experiment(config: ExperimentConfig, resume: Optional[Path] = None) -> int:
    out = Path(config.output_dir)
    digest = _prepare(config, out)
    surface = Surface.from_spec(config.surface)
    initial = initial_metric(surface, config.initial, config.seed)
    write_field(out / "initial_u", initial.u, name="u")
    start = checkpoint_load(resume) if resume is not None else initial
    checkpoints = out / "checkpoints"

    def save(state) -> None:
        checkpoint_save(state, checkpoints / f"t_{state.t:.9e}", digest)

    clock = time.perf_counter()
    try:
        trace = run(config.flow, start, on_checkpoint=save)
    except (StepFailure, MonotonicityViolation) as e:
        if e.trace is None:
            raise
        trace = e.trace
    wall_time = time.perf_counter() - clock
    if resume is not None:
        trace.samples[:0] = _samples_before(out / TRACE_FILE, start.t)

    write_trace_csv(out / TRACE_FILE, trace, f"format_version={FORMAT_VERSION} config_hash={digest}")
    checkpoint_save(trace.final_state, out / ("final" if trace.completed else "last_good"), digest)
    summary = summarize(config, trace, digest, initial, wall_time)
    write_json(out / SUMMARY_FILE, serialize(summary))
    write_text_report(out / "report.txt", summary, tail_table(trace.samples, summary.decay))
    if config.diagnostics.plots and trace.samples:
        write_plots(out, summary, trace.samples)
    return _exit_code(summary)


def _exit_code(summary: RunSummary) -> int:
    if summary.status == STATUS_FAILED:
        return EXIT_FAILURE
    return EXIT_OK if summary.status == STATUS_COMPLETED and summary.passed else EXIT_VIOLATION


def _samples_before(path: Path, t: float) -> List[EnergySample]:
    """The rows of an earlier trace sampled before ``t``; a resumed run continues from there."""
    if not path.exists():
        return []
    try:
        samples = read_trace_csv(path)
    except ContractViolation as e:
        logger.warning("not merging the earlier trace: %s", e)
        return []
    return [s for s in samples if s.t < t * (1 - 1e-12)]


@attrs(frozen=True)
class GeodesicOutcome:
    config_hash: str = attrib()
    distance: float = attrib()
    residual: float = attrib()
    nodes: int = attrib()
    iterations: int = attrib()
    converged: bool = attrib()
    format_version: int = attrib(default=FORMAT_VERSION)


def run_geodesic(config: GeodesicConfig) -> int:
    out = Path(config.output_dir)
    digest = _prepare(config, out)
    surface = Surface.from_spec(config.surface)
    start = endpoint_potential(surface, config.start, config.seed)
    end = endpoint_potential(surface, config.end, config.seed)
    try:
        path = solve_geodesic(start, end, config.settings)
    except GeodesicFailure as e:
        if e.best_path is not None:
            write_path(out / "best_path", e.best_path)
        logger.error("geodesic failed: %s", e)
        return EXIT_FAILURE
    index = write_path(out / "path", path)
    residual = geodesic_residual(path)
    outcome = GeodesicOutcome(
        config_hash=digest,
        distance=path_length(path),
        residual=residual,
        nodes=path.nodes,
        iterations=max(len(path.energy_history) - 1, 0),
        converged=residual <= config.settings.tolerance,
    )
    write_json(out / "distance.json", serialize(outcome))
    logger.info("distance %.9e (residual %.3e, %d segments)", index.length, residual, path.nodes)
    return EXIT_OK if outcome.converged else EXIT_VIOLATION


def run_spectrum(config: ExperimentConfig, checkpoint: Optional[Path] = None) -> int:
    out = Path(config.output_dir)
    digest = _prepare(config, out)
    diagnostics = config.diagnostics
    metric = _start_metric(config, checkpoint)
    spectrum = low_spectrum(metric, diagnostics.spectrum_count, diagnostics.band_epsilon)
    data = {
        "format_version": FORMAT_VERSION,
        "config_hash": digest,
        "spectrum": serialize(spectrum.summary()),
    }
    if metric.surface.topology is Topology.SPHERE:
        data["kw_residual"] = kazdan_warner_residual(
            metric, diagnostics.band_epsilon, diagnostics.kw_floor, diagnostics.spectrum_count, spectrum
        )
    write_json(out / "spectrum.json", data)
    if diagnostics.dump_eigenfields:
        for k, values in enumerate(spectrum.eigenfields):
            write_field(out / "eigenfields" / f"mode_{k:02d}", metric.surface.field(values), name=f"mode_{k}")
    logger.info("lambda_1 = %.9g, band dimension %d", spectrum.lambda1, len(spectrum.band))
    return EXIT_OK


def run_scan(config: ExperimentConfig, checkpoint: Optional[Path] = None) -> int:
    epsilon = config.diagnostics.concentration_epsilon
    if epsilon is None:
        raise ConfigError("a scan radius is required", "diagnostics.concentration_epsilon")
    out = Path(config.output_dir)
    digest = _prepare(config, out)
    report = concentration_scan(_start_metric(config, checkpoint), epsilon)
    write_json(
        out / "scan.json",
        {"format_version": FORMAT_VERSION, "config_hash": digest, "scan": serialize(report)},
    )
    logger.info("max E*A = %.6g at center %d", report.max_product, report.argmax_center)
    return EXIT_VIOLATION if report.flagged else EXIT_OK


def run_report(run_dir: Path) -> int:
    run_dir = Path(run_dir)
    try:
        samples = read_trace_csv(run_dir / TRACE_FILE)
    except (OSError, ContractViolation) as e:
        logger.error("cannot read the trace in %s: %s", run_dir, e)
        return EXIT_USAGE
    config = load_config(run_dir / CONFIG_FILE)
    previous = {}
    summary_path = run_dir / SUMMARY_FILE
    if summary_path.exists():
        previous = json.loads(summary_path.read_text())
    checks = trace_checks(samples, config.flow.step_tolerance, config.flow.area_tolerance)
    recomputed = {c.name for c in checks}
    for entry in previous.get("checks", []):
        if entry["name"] not in recomputed:
            checks.append(Check(entry["name"], entry["passed"], entry.get("detail", ""), entry.get("gating", True)))
    decay = try_decay_fit(samples, config.diagnostics.decay_window) if len(samples) >= 4 else None
    summary = RunSummary(
        config_hash=previous.get("config_hash", hash_of(config)),
        status=previous.get("status", "completed"),
        t_final=samples[-1].t if samples else 0.0,
        steps=previous.get("steps", 0),
        rejects=previous.get("rejects", 0),
        area_drift=max((abs(s.area / samples[0].area - 1) for s in samples), default=0.0),
        checks=checks,
        final=samples[-1] if samples else None,
        decay=decay,
        identities=derivative_identities(samples),
        failure=previous.get("failure"),
        failure_time=previous.get("failure_time"),
    )
    tails = tail_table(samples, decay)
    write_text_report(run_dir / "report.txt", summary, tails)
    if samples:
        plot_energies(samples, run_dir / "report.svg", summary.failure_time)
    print((run_dir / "report.txt").read_text(), end="")
    return _exit_code(summary)


def _sweep_job(config: ExperimentConfig) -> int:
    try:
        return run_flow_experiment(config)
    except (ConfigError, InvalidArgument, CheckpointError) as e:
        logger.error("%s: %s", config.output_dir, e)
        return EXIT_USAGE
    except CalabiLabError as e:
        logger.error("%s: %s", config.output_dir, e)
        return EXIT_FAILURE


def run_sweep(configs: Sequence[ExperimentConfig], jobs: int = 1) -> int:
    if jobs <= 1:
        codes = [_sweep_job(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_sweep_job, configs))
    for config, code in zip(configs, codes):
        logger.info("%s finished with exit code %d", config.output_dir, code)
    return max(codes, default=EXIT_OK)


def _sweep_configs(paths: Sequence[Path], seeds: Optional[List[int]], out: Optional[Path]) -> List[ExperimentConfig]:
    configs = []
    for path in paths:
        base = load_config(path)
        root = Path(out) if out is not None else Path(base.output_dir)
        for seed in seeds if seeds else [base.seed]:
            configs.append(base.with_overrides(root / f"{Path(path).stem}_seed{seed}", seed))
    return configs


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    configured = argparse.ArgumentParser(add_help=False, parents=[common])
    configured.add_argument("--config", type=Path, required=True, help="JSON config file")
    configured.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    configured.add_argument("--seed", type=int, default=None, help="seed for random presets (overrides the config)")

    parser = argparse.ArgumentParser(prog="calabilab", description="Calabi flow laboratory for surfaces")
    commands = parser.add_subparsers(dest="command", required=True)

    flow = commands.add_parser("flow", parents=[configured], help="run the flow and check its invariants")
    flow.add_argument("--resume", type=Path, default=None, help="checkpoint stem to resume from")
    commands.add_parser("geodesic", parents=[configured], help="solve a geodesic between two potentials")
    for name, text in (("spectrum", "low spectrum of a metric"), ("scan", "concentration scan of a metric")):
        sub = commands.add_parser(name, parents=[configured], help=text)
        sub.add_argument("--checkpoint", type=Path, default=None, help="use the metric stored in a checkpoint")
    report = commands.add_parser("report", parents=[common], help="render the report of a run directory")
    report.add_argument("run_dir", type=Path)
    sweep = commands.add_parser("sweep", parents=[common], help="run several flow experiments")
    sweep.add_argument("--config", type=Path, action="append", required=True, help="repeatable")
    sweep.add_argument("--seeds", type=int, nargs="+", default=None)
    sweep.add_argument("--out", type=Path, default=None)
    sweep.add_argument("--jobs", type=int, default=1)
    return parser


def _dispatch(args) -> int:
    if args.command == "report":
        return run_report(args.run_dir)
    if args.command == "sweep":
        return run_sweep(_sweep_configs(args.config, args.seeds, args.out), args.jobs)
    if args.command == "geodesic":
        return run_geodesic(load_config(args.config, GeodesicConfig).with_overrides(args.out, args.seed))
    config = load_config(args.config).with_overrides(args.out, args.seed)
    if args.command == "flow":
        return run_flow_experiment(config, args.resume)
    if args.command == "spectrum":
        return run_spectrum(config, args.checkpoint)
    return run_scan(config, args.checkpoint)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.quiet)
    try:
        return _dispatch(args)
    except (ConfigError, InvalidArgument, CheckpointError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except CalabiLabError as e:
        logger.error("%s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
