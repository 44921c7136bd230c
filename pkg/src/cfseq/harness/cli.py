"""Command-line entry point.

    cfseq run      --config run.ini            # every stage
    cfseq train    --config run.ini
    cfseq collect  --config run.ini
    cfseq explain  --config run.ini [--method NSGA-II]
    cfseq evaluate --config run.ini
    cfseq report   --config run.ini [--format csv]

Exit codes: 0 success, 2 configuration error, 3 no failures collected,
4 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..core import InputError
from .config import ALL_METHODS, ConfigError, load_config
from .pipeline import (
    build_env,
    collect_stage,
    evaluate_stage,
    explain_stage,
    load_cases,
    load_explanations,
    load_policy,
    prepare_output,
    run_pipeline,
    train_stage,
)
from .report import ReportError, report

EXIT_OK, EXIT_CONFIG, EXIT_NO_FAILURES, EXIT_INTERNAL = 0, 2, 3, 4
COMMANDS = ("run", "train", "collect", "explain", "evaluate", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfseq", description="Counterfactual action sequences for failing RL episodes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", help="INI config file")
        p.add_argument("--env", help="environment name")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--method", action="append", choices=ALL_METHODS,
                       help="restrict to a method (repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "report":
            p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    return parser


def _config(args):
    overrides = list(args.set)
    if args.env:
        overrides.append(f"run.env={args.env}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out:
        overrides.append(f"run.output_dir={args.out}")
    if args.method:
        overrides.append("run.methods=" + ",".join(args.method))
    return load_config(args.config, overrides)


def dispatch(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    if args.command == "report":
        text = report(out, args.format)
        sys.stdout.write(text)
        return EXIT_OK
    if args.command == "run":
        table = run_pipeline(cfg)
        sys.stdout.write(report(out, "markdown"))
        return EXIT_NO_FAILURES if table.status == "no-failures" else EXIT_OK

    env = build_env(cfg)
    if args.command == "train":
        prepare_output(cfg)
        train_stage(cfg, env, out)
        return EXIT_OK
    if args.command == "collect":
        policy = load_policy(env, out / "policy.json")
        cases = collect_stage(cfg, env, policy, out)
        print(f"{len(cases)} failure cases -> {out / 'failures.jsonl'}")
        return EXIT_OK if cases else EXIT_NO_FAILURES
    cases = load_cases(out)
    if not cases:
        return EXIT_NO_FAILURES
    if args.command == "explain":
        policy = load_policy(env, out / "policy.json")
        explain_stage(cfg, env, policy, cases, out, cfg.method_list)
        return EXIT_OK
    if args.command == "evaluate":
        explanations = load_explanations(out, cases, cfg.method_list)
        if not explanations:
            raise ConfigError("no explanations found; run the explain stage first")
        evaluate_stage(cfg, env, explanations, out)
        (out / "report.md").write_text(report(out, "markdown"))
        return EXIT_OK
    raise ConfigError(f"unknown command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except (ConfigError, InputError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
