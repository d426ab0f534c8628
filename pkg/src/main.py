"""
Detector RTI - command line

Entry point: python -m src.main <command> [options]

Commands:
    simulate         run a scenario and write every artifact
    calibrate        calibration frames -> calibration file
    localize         replay frames through the localization pipeline
    evaluate         estimates -> distance error report
    sweep            rerun a scenario over values of one parameter
    validate-config  check a scenario file and exit
"""

import argparse
import logging
import sys
import uuid
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.config import get_settings
from src.models.common import ErrorReport, RTIError
from src.models.scenario import ScenarioConfig
from src.services.evaluation import (
    REFERENCE_COMPARISONS,
    emit_report,
    error_stats,
    summarize,
    write_report_tables,
)
from src.services.pipeline import LocalizationPipeline
from src.services.reconstruction import export_pgm
from src.services.scenario_io import (
    ConfigError,
    ScenarioFormatError,
    build_deployment,
    build_grid,
    check_frames,
    load_scenario,
    read_calibration,
    read_estimates,
    read_frames,
    resolve_key,
    write_bitstream,
    write_calibration,
    write_estimates,
    write_frames,
    write_sweep,
)
from src.services.simulator import ScenarioRun, calibrate_from_frames, run_scenario

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run_id)s] %(message)s"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger(__name__)


class RunIdFilter(logging.Filter):
    """Filter that adds the invocation's run_id to log records."""

    def __init__(self, run_id: str):
        super().__init__()
        self.run_id = run_id

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run_id"):
            record.run_id = self.run_id
        return True


def configure_logging(level: str, run_id: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S", force=True)
    for handler in logging.root.handlers:
        handler.addFilter(RunIdFilter(run_id))


# =============================================================================
# Commands
# =============================================================================


def _load(args: argparse.Namespace) -> ScenarioConfig:
    return load_scenario(args.config, args.overrides, args.seed)


def _report_parameters(config: ScenarioConfig) -> dict[str, object]:
    d = config.deployment
    return {
        "scenario": config.scenario.name,
        "seed": config.scenario.seed,
        "nodes": d.node_count if d.layout == "perimeter" else len(d.nodes),
        "channels": ",".join(str(c) for c in d.channels),
        "pixel_size_m": config.grid.pixel_size_m,
        "gamma": config.model.gamma,
        "path_loss_exponent": config.model.path_loss_exponent,
        "snr_db": config.noise.snr_db,
        "samples": config.noise.samples,
        "fade_threshold_db": config.classifier.fade_threshold_db,
        "max_excess_path_m": config.detector.max_excess_path_m,
        "threshold_scale": config.estimator.threshold_scale,
        "scale_mode": config.reconstruction.scale_mode,
        "trajectory": config.trajectory.kind.value,
    }


def write_run(run: ScenarioRun, out: Path) -> None:
    """Write every artifact of a simulated run into `out`."""
    out.mkdir(parents=True, exist_ok=True)
    settings = get_settings()
    write_frames(run.calibration_frames, out / "calibration_frames.csv")
    write_frames(run.frames, out / "frames.csv")
    write_calibration(run.calibration, out / "calibration.txt")
    write_estimates(run.estimates, out / "estimates.csv")
    if run.config.output.bitstream:
        write_bitstream(run.bitstream, len(run.deployment.pairs), out / "detections.bin")
    if run.snapshots:
        snapshot_dir = out / "snapshots"
        snapshot_dir.mkdir(exist_ok=True)
        for frame, field in run.snapshots:
            export_pgm(field, snapshot_dir / f"frame_{frame:07d}.pgm")

    summary = summarize(run.errors, settings.significance)
    (out / "report.txt").write_text(
        emit_report(summary, counter=run.counter, parameters=_report_parameters(run.config)) + "\n",
        encoding="utf-8",
    )
    write_report_tables(summary, out)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    run = run_scenario(config)
    out = Path(args.out)
    write_run(run, out)
    logger.info(f"Wrote run '{config.scenario.name}' to {out}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = _load(args)
    deployment = build_deployment(config)
    frames = read_frames(args.frames)
    check_frames(frames, deployment)
    result = calibrate_from_frames(config, deployment, frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_calibration(result, out / "calibration.txt")
    dropped = len(result.blacklist.blacklisted)
    logger.info(f"Calibrated {deployment.link_count} links, {dropped} pairs blacklisted")
    return EXIT_OK


def cmd_localize(args: argparse.Namespace) -> int:
    config = _load(args)
    deployment = build_deployment(config)
    grid = build_grid(config)
    calibration = read_calibration(args.calibration)
    frames = read_frames(args.frames)
    check_frames(frames, deployment)
    pipeline = LocalizationPipeline.from_config(config, deployment, grid, calibration)
    estimates = pipeline.replay(frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_estimates(estimates, out / "estimates.csv")
    if config.output.bitstream:
        write_bitstream(pipeline.bitstream, len(deployment.pairs), out / "detections.bin")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = get_settings()
    estimates = read_estimates(args.estimates)
    errors = np.array([e.error_m for e in estimates if e.error_m is not None])
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    summary = summarize(errors, settings.significance, args.bootstrap, rng)
    if args.compare == "none":
        comparisons = []
    else:
        comparisons = [r for r in REFERENCE_COMPARISONS if args.compare in ("all", r.experiment)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(emit_report(summary, comparisons) + "\n", encoding="utf-8")
    write_report_tables(summary, out, comparisons)
    return EXIT_OK


def _numeric_key(key: str) -> tuple[str, str]:
    section, name = resolve_key(key)
    if section == "fades":
        return section, name
    annotation = ScenarioConfig.model_fields[section].annotation.model_fields[name].annotation
    if annotation not in (int, float):
        raise ConfigError("sweep parameter must be numeric", key=f"{section}.{name}")
    return section, name


def sweep_row(key: str, value: str, run: ScenarioRun) -> dict[str, object]:
    errors = run.errors
    located = [e.support_pixels for e in run.estimates if e.estimate is not None]
    stats = error_stats(errors, require_skewness=False) if errors.size else None
    return {
        "parameter": key,
        "value": value,
        "mean_error_m": stats.mean if stats else None,
        "variance_m2": stats.variance if stats else None,
        "skewness": stats.skewness if stats else None,
        "detection_rate": run.detection_rate,
        "mean_support_pixels": float(np.mean(located)) if located else None,
        "mean_threshold_db": float(np.mean(run.detector.thresholds)),
        "additions": run.counter.additions,
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    section, name = _numeric_key(args.param)
    key = f"{section}.{name}"
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values given", key=key)
    rows = []
    for value in values:
        config = load_scenario(args.config, [*args.overrides, f"{key}={value}"], args.seed)
        logger.info(f"Sweep {key}={value}")
        rows.append(sweep_row(key, value, run_scenario(config)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, out / "sweep.csv")
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    config = _load(args)
    build_deployment(config)
    build_grid(config)
    print(f"{args.config}: ok ({config.scenario.name})")
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    common.add_argument(
        "--log-level",
        default="DEBUG" if settings.debug else settings.log_level,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    common.add_argument("--seed", type=int, default=None, help="override scenario.seed")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--config", required=True, help="scenario file")
    scenario.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a scenario key (section.key or a unique bare key); repeatable",
    )

    parser = argparse.ArgumentParser(prog="detector-rti", description=settings.app_name)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, scenario], help="run a scenario")
    p.add_argument("--out", default=settings.default_out_dir)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common, scenario], help="build a calibration file")
    p.add_argument("--frames", required=True, help="calibration frames CSV")
    p.add_argument("--out", default=settings.default_out_dir)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("localize", parents=[common, scenario], help="replay frames")
    p.add_argument("--frames", required=True, help="frames CSV")
    p.add_argument("--calibration", required=True, help="calibration file")
    p.add_argument("--out", default=settings.default_out_dir)
    p.set_defaults(handler=cmd_localize)

    p = sub.add_parser("evaluate", parents=[common], help="report on estimates")
    p.add_argument("--estimates", required=True, help="estimates CSV")
    p.add_argument("--out", default=settings.default_out_dir)
    p.add_argument(
        "--bootstrap",
        type=int,
        nargs="?",
        const=settings.bootstrap_samples,
        default=0,
        help=f"parametric bootstrap replicates (flag alone: {settings.bootstrap_samples})",
    )
    p.add_argument("--compare", default="none", choices=["none", "all", "I", "II", "III", "IV"])
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common, scenario], help="sweep one parameter")
    p.add_argument("--param", required=True, help="numeric scenario key")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", default=settings.default_out_dir)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("validate-config", parents=[common, scenario], help="check a scenario file")
    p.set_defaults(handler=cmd_validate_config)
    return parser


def _exit_code(error: BaseException) -> int:
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, (ScenarioFormatError, OSError)):
        return EXIT_IO
    # numerical and other domain failures
    return EXIT_NUMERICAL


def _report_error(error: BaseException, exit_code: int) -> None:
    if isinstance(error, RTIError):
        message, detail = str(error), error.detail
    else:
        message, detail = str(error), None
    report = ErrorReport(error=message, detail=detail, code=type(error).__name__, exit_code=exit_code)
    print(report.model_dump_json(), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = "WARNING" if args.quiet else args.log_level
    run_id = uuid.uuid4().hex[:8]
    configure_logging(level, run_id)
    try:
        return args.handler(args)
    except (RTIError, ValidationError, OSError, ArithmeticError) as e:
        code = _exit_code(e)
        logger.error(f"{args.command} failed: {e}")
        _report_error(e, code)
        return code


if __name__ == "__main__":
    sys.exit(main())
