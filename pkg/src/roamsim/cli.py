"""Command line entry points.

    roamsim validate <scenario.json>
    roamsim run <scenario.json> [--seed N] [--out DIR]
    roamsim report <scenario.json | run dir> [--seed N] [--out DIR] [--no-figures]
    roamsim experiment externality <scenario.json> --target OP --delta F
                                   [--seed N] [--out DIR]

The default output directory comes from ROAMSIM_OUT, falling back to ./out.
Failures print one line to stderr and exit non-zero (2 for scenario
problems, 1 for anything else).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

from .exports import write_rows, write_run
from .money import parse_fraction
from .scenario import ParseError, Scenario, ValidationError, load_scenario
from .sim import ExperimentPreconditionViolated, externality_experiment, run


def _default_out() -> str:
    return os.environ.get("ROAMSIM_OUT", "out")


def _load(path: str) -> Scenario:
    return load_scenario(path)


def _cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    print(
        f"{args.scenario}: ok "
        f"({len(scenario.countries)} countries, {len(scenario.operators)} operators, "
        f"{scenario.horizon} periods)"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    result = run(scenario, seed=args.seed)
    out = args.out or _default_out()
    written = write_run(result, out)
    bad = [r for r in result.conservation if not r.balanced]
    if bad:
        print("conservation check failed; see ledger", file=sys.stderr)
        return 1
    print(f"wrote {len(written)} files to {out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    source = Path(args.source)
    if source.is_dir():
        scenario_path = source / "scenario_normalized.json"
        out = args.out or str(source)
    else:
        scenario_path = source
        out = args.out or _default_out()
    scenario = _load(str(scenario_path))
    result = run(scenario, seed=args.seed)
    written = write_run(result, out)
    if not args.no_figures:
        from .plots import render_figures

        written.extend(render_figures(result, out))
    print(f"wrote {len(written)} files to {out}")
    return 0


def _cmd_externality(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    delta = parse_fraction(args.delta)
    report = externality_experiment(scenario, args.target, delta, seed=args.seed)
    out = args.out or _default_out()
    write_run(report.baseline, os.path.join(out, "baseline"))
    write_run(report.treated, os.path.join(out, "treated"))
    rows = [
        [str(t), str(base), str(treated)]
        for t, base, treated in report.minutes_by_period
    ]
    write_rows(
        Path(out) / "experiment.csv",
        ["period", "minutes_baseline", "minutes_treated"],
        rows,
    )
    invariant = "yes" if report.shares_invariant else "NO"
    print(
        f"target={report.target} delta={report.delta} "
        f"shares_invariant={invariant} max_share_delta={float(report.max_share_delta)}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roamsim",
        description="Deterministic simulator of international roaming markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("scenario")
    p_validate.set_defaults(func=_cmd_validate)

    p_run = sub.add_parser("run", help="simulate and write delimited output")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_report = sub.add_parser(
        "report", help="simulate and write delimited output plus figures"
    )
    p_report.add_argument("source", help="scenario file or an existing run directory")
    p_report.add_argument("--seed", type=int, default=None)
    p_report.add_argument("--out", default=None)
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=_cmd_report)

    p_exp = sub.add_parser("experiment", help="paired counterfactual runs")
    exp_sub = p_exp.add_subparsers(dest="experiment", required=True)
    p_ext = exp_sub.add_parser(
        "externality", help="wholesale cut with shares pinned by SIM lists"
    )
    p_ext.add_argument("scenario")
    p_ext.add_argument("--target", required=True, help="visited operator to cut")
    p_ext.add_argument("--delta", required=True, help="relative cut, e.g. 0.3")
    p_ext.add_argument("--seed", type=int, default=None)
    p_ext.add_argument("--out", default=None)
    p_ext.set_defaults(func=_cmd_externality)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        message = exc.errors[0] if isinstance(exc, ValidationError) and exc.errors else str(exc)
        count = len(exc.errors) if isinstance(exc, ValidationError) else 1
        suffix = f" (+{count - 1} more)" if count > 1 else ""
        print(f"error: {message}{suffix}", file=sys.stderr)
        return 2
    except ExperimentPreconditionViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
