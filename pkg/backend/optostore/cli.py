"""
Command-line front end.

    optostore run --config run.yaml --out runs/fig3 [--threads N] [--force] [--track] [--gnuplot]
    optostore list-presets
    optostore validate --config run.yaml

Exit codes: 0 ok, 1 configuration error, 2 runtime error (divergence, failed fit, ...).
"""
import argparse
import logging
import sys

from pydantic import ValidationError

from .config import settings
from .exceptions import ConfigError, InvalidSequenceError, OptostoreError
from .models.params import PRESETS
from .models.schemas import SCENARIOS
from .services.runner import check_params, load_config, run_to_directory, scenario_sequence
from .utils.units import angular_to_mhz

logger = logging.getLogger("optostore.cli")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _format_validation_error(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        where = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"  {where}: {err['msg']}")
    return "\n".join(lines)


def list_presets() -> str:
    lines = ["Sample presets (omega_m, gamma_m, kappa)/2pi:"]
    for label, p in PRESETS.items():
        lines.append(
            f"  {label}: {p.describe_mhz()}  kappa_ext/2pi = {angular_to_mhz(p.kappa_ext):g} MHz, "
            f"calibration {p.calibration.p_ref_mw:g} mW -> {angular_to_mhz(p.calibration.g_ref):g} MHz"
        )
    lines.append("Scenarios:")
    lines.append(f"  {', '.join(SCENARIOS)}")
    return "\n".join(lines)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    output, paths = run_to_directory(
        cfg, out_dir=args.out, force=args.force, threads=args.threads, gnuplot=args.gnuplot
    )
    for path in paths:
        print(path)
    if args.track or settings.MLFLOW_ENABLED:
        from .services.tracking import log_run

        log_run(cfg, output.summary, paths[0].parent)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    params, report = check_params(cfg)
    scenario_sequence(cfg, params)
    for check in report.checks:
        status = "ok" if check.passed else check.severity.upper()
        print(f"{status:>7}  {check.name}: {check.detail}")
    print(f"config valid: {cfg.scenario} on {params.label} {params.describe_mhz()}")
    return EXIT_OK


def cmd_list_presets(args: argparse.Namespace) -> int:
    print(list_presets())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optostore", description="Optomechanical light storage and OMIT simulator."
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the scenario named in a config file")
    run.add_argument("--config", required=True, help="YAML run configuration")
    run.add_argument("--out", default=None, help="Output directory (default: config output_dir)")
    run.add_argument("--threads", type=int, default=None, help="Sweep worker threads")
    run.add_argument("--force", action="store_true", help="Overwrite existing output files")
    run.add_argument("--track", action="store_true", help="Log the run to mlflow")
    run.add_argument("--gnuplot", action="store_true", help="Also write a gnuplot script stub")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="Validate a config file without running it")
    validate.add_argument("--config", required=True, help="YAML run configuration")
    validate.set_defaults(func=cmd_validate)

    presets = sub.add_parser("list-presets", help="List sample presets and scenarios")
    presets.set_defaults(func=cmd_list_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be at least 1")

    try:
        return args.func(args)
    except ValidationError as e:
        print(f"configuration error:\n{_format_validation_error(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InvalidSequenceError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OptostoreError as e:
        logger.error(f"❌ Run failed: {e}")
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
