"""
Command-line interface.

Usage:
    python3 run_solver.py solve exp-3comp-mean [--seed 1] [--restarts 5]
    python3 run_solver.py feasible my_config.json
    python3 run_solver.py scan scan-disconnected-4-9 [--resolution 401]
    python3 run_solver.py profile my_config.json [--output curve.csv]
    python3 run_solver.py dataset validate returns.csv
    python3 run_solver.py presets

Exit codes: 0 success, 2 infeasible input or violated precondition,
3 I/O or parse error, 4 solver budget exhausted.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from fsd_reshaping.config import OutputConfig, RunConfig, load_config
from fsd_reshaping.data.presets import list_presets
from fsd_reshaping.errors import ReshapingError
from fsd_reshaping.experiments import (
    build_reference,
    check_feasible,
    export_profile,
    load_scenarios,
    resolve_anchor,
    run,
    scan_feasible,
)
from fsd_reshaping.logging_config import configure_logging
from fsd_reshaping.tools.dataset import load_csv
from fsd_reshaping.tools.distribution import riskless_column

logger = logging.getLogger(__name__)


def _print(data) -> None:
    print(json.dumps(data, indent=2))


def _with_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        changes["restarts"] = args.restarts
    if getattr(args, "workers", None) is not None:
        changes["bnb"] = replace(cfg.bnb, workers=args.workers)
    if getattr(args, "output_dir", None) is not None:
        changes["output"] = OutputConfig(args.output_dir, cfg.output.report, cfg.output.profile)
    return replace(cfg, **changes) if changes else cfg


def cmd_solve(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    report = run(cfg)
    _print(
        {
            "config_name": report.config_name,
            "weights": report.weights,
            "objective": report.objective,
            "objective_value": report.objective_value,
            "indicators": report.indicators,
            "feasible": report.feasible,
            "report": report.report_path,
            "profile": report.profile_path,
        }
    )
    return 0


def cmd_feasible(args) -> int:
    cfg = load_config(args.config)
    if args.weights:
        cfg = replace(cfg, weights=[float(w) for w in args.weights.split(",")])
    result = check_feasible(cfg)
    _print(result)
    checked = [v for k, v in result.items() if isinstance(v, dict)]
    return 0 if all(v["feasible"] for v in checked) else 2


def cmd_scan(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    path = args.output or str(Path(cfg.output.dir) / f"{cfg.name}_scan.csv")
    result = scan_feasible(cfg, resolution=args.resolution, path=path)
    _print(result.summary())
    return 0


def cmd_profile(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    s = load_scenarios(cfg)
    ref = build_reference(s, cfg.reference)
    if args.weights:
        x = [float(w) for w in args.weights.split(",")]
    elif cfg.weights is not None:
        x = cfg.weights
    else:
        anchor = resolve_anchor(cfg, s)
        if anchor is None:
            anchor = [0.0] * s.n
            anchor[riskless_column(s)] = 1.0
        x = list(anchor)
    path = args.output or str(Path(cfg.output.dir) / f"{cfg.name}_profile.csv")
    out = export_profile(s, x, ref, path)
    _print({"weights": list(map(float, x)), "profile": str(out)})
    return 0


def cmd_dataset_validate(args) -> int:
    _print(load_csv(args.path).summary())
    return 0


def cmd_presets(args) -> int:
    _print(list_presets())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsd-reshaping",
        description="Portfolio optimization under first-order stochastic dominance constraints",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: FSD_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Run a configuration and write its report")
    solve.add_argument("config", help="JSON config path or preset name")
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--restarts", type=int, default=None)
    solve.add_argument("--workers", type=int, default=None, help="Branch-and-bound worker threads")
    solve.add_argument("--output-dir", default=None)
    solve.set_defaults(func=cmd_solve)

    feasible = sub.add_parser("feasible", help="Check reference, anchor and weights for feasibility")
    feasible.add_argument("config")
    feasible.add_argument("--weights", default=None, help="Comma-separated weights to check")
    feasible.set_defaults(func=cmd_feasible)

    scan = sub.add_parser("scan", help="Grid scan of the feasible set over two assets")
    scan.add_argument("config")
    scan.add_argument("--resolution", type=int, default=None)
    scan.add_argument("--output", default=None)
    scan.add_argument("--output-dir", default=None)
    scan.set_defaults(func=cmd_scan)

    profile = sub.add_parser("profile", help="Write the CDF profile CSV of a portfolio")
    profile.add_argument("config")
    profile.add_argument("--weights", default=None)
    profile.add_argument("--output", default=None)
    profile.add_argument("--output-dir", default=None)
    profile.set_defaults(func=cmd_profile)

    dataset = sub.add_parser("dataset", help="Dataset utilities")
    dataset_sub = dataset.add_subparsers(dest="dataset_command", required=True)
    validate = dataset_sub.add_parser("validate", help="Parse a return file and summarize it")
    validate.add_argument("path", help="CSV path, or 'bundled'")
    validate.set_defaults(func=cmd_dataset_validate)

    presets = sub.add_parser("presets", help="List the bundled presets")
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except ReshapingError as exc:
        logger.error(str(exc), extra={"path": getattr(exc, "report_path", None)})
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        logger.error(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        logger.exception("unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
