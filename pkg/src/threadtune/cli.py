"""Command-line front end.

The grammar mirrors how the tool is meant to be scripted: declare the
space with repeated --param flags, pick a strategy, and either point the
tuner at a synthetic objective or put the benchmark command after `--`.
Runs happen in-process by default; --server hands the same config to a
running tuning service instead.

Exit codes: 0 success, 2 configuration or usage error, 3 no point could
be evaluated successfully, 4 I/O error writing or reading a report.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Sequence

from threadtune import __version__
from threadtune.errors import (
    BaselineFailed,
    ConfigInvalid,
    NoSuccessfulEvaluation,
    SpaceError,
    SpawnFailure,
    TuneError,
    UnknownPlaceholder,
)
from threadtune.runner import AGGREGATIONS, DEFAULT_SCORE_PATTERN, CommandTemplate
from threadtune.session import (
    SessionConfig,
    SessionReport,
    build_score_source,
    compare_to_baseline,
    run_session,
    write_report,
)
from threadtune.space import SearchSpace, parse_param_spec
from threadtune.strategies import STRATEGIES, StrategyHandle
from threadtune.synthetic import PRESETS, get_preset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_SUCCESS = 3
EXIT_IO = 4


@dataclass
class CliOptions:
    """Flags that steer the front end but are not part of the session."""

    baseline: tuple[int, ...] | None = None
    server: str | None = None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tune",
        description="Search a stepped integer parameter space for the "
        "assignment that maximizes a measured throughput score.",
    )
    parser.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=LO:HI:STEP",
        help="add one parameter (step defaults to 1); repeatable",
    )
    parser.add_argument("--strategy", choices=STRATEGIES, required=True)
    parser.add_argument("--max-evals", type=int, default=None, metavar="N",
                        help="cap on distinct points measured")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeat", type=int, default=1, metavar="R",
                        help="measurements per point")
    parser.add_argument("--agg", choices=AGGREGATIONS, default="median",
                        help="statistic over repeats")
    parser.add_argument("--score-regex", default=DEFAULT_SCORE_PATTERN, metavar="RE",
                        help="pattern whose last match (one capture group) is the score; "
                             "the default expects a labeled value like 'score: 12.3' "
                             "or 'throughput= 456'")
    parser.add_argument("--timeout", type=float, default=None, metavar="SECS")
    parser.add_argument("--out", default=None, metavar="PATH",
                        help="write the session report to this file")
    parser.add_argument("--objective", default=None, metavar="synthetic:PRESET",
                        help=f"built-in objective; presets: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--env", action="append", default=[], metavar="NAME=VALUE",
                        help="extra environment for the command; repeatable")
    parser.add_argument("--baseline", default=None, metavar="V,V,...",
                        help="reference point; prints improvement of best over it")
    parser.add_argument("--server", default=None, metavar="URL",
                        help="run the session on a tuning service instead of in-process")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", nargs="*", metavar="CMD",
                        help="benchmark command (place after -- when it has flags)")
    return parser


def _split_command(argv: Sequence[str]) -> tuple[list[str], list[str] | None]:
    argv = list(argv)
    if "--" in argv:
        i = argv.index("--")
        return argv[:i], argv[i + 1 :]
    return argv, None


def _parse(argv: Sequence[str]) -> tuple[SessionConfig, CliOptions]:
    front, tail = _split_command(argv)
    ns = _build_parser().parse_args(front)
    command_tokens = list(ns.command)
    if tail is not None:
        if command_tokens:
            raise ConfigInvalid("command tokens found both before and after '--'")
        command_tokens = tail
    if command_tokens and command_tokens[0].startswith("-"):
        raise ConfigInvalid(
            f"command starts with {command_tokens[0]!r}; did you misspell a flag?"
        )

    if (ns.objective is None) == (not command_tokens):
        raise ConfigInvalid("exactly one of --objective or a command (after --) is required")

    synthetic = None
    if ns.objective is not None:
        if not ns.objective.startswith("synthetic:"):
            raise ConfigInvalid(
                f"unknown objective {ns.objective!r}; only synthetic:NAME objectives exist"
            )
        synthetic = get_preset(ns.objective).name

    if ns.param:
        space = SearchSpace(params=tuple(parse_param_spec(t) for t in ns.param))
    elif synthetic is not None:
        space = get_preset(synthetic).space
    else:
        raise ConfigInvalid("at least one --param is required when tuning a command")

    command = None
    if command_tokens:
        env_pairs = []
        for item in ns.env:
            name, sep, value = item.partition("=")
            if not sep or not name:
                raise ConfigInvalid(f"--env expects NAME=VALUE, got {item!r}")
            env_pairs.append((name, value))
        command = CommandTemplate(
            argv=tuple(command_tokens),
            base_env=tuple(env_pairs),
            score_pattern=ns.score_regex,
            timeout_s=ns.timeout,
            repeats=ns.repeat,
            aggregation=ns.agg,
        )

    baseline = None
    if ns.baseline is not None:
        try:
            baseline = tuple(int(v) for v in ns.baseline.split(","))
        except ValueError:
            raise ConfigInvalid(f"--baseline expects comma-separated integers, got {ns.baseline!r}")
        if len(baseline) != space.n:
            raise ConfigInvalid(
                f"--baseline has {len(baseline)} values, space has {space.n} parameters"
            )

    config = SessionConfig(
        space=space,
        strategy=StrategyHandle.of(ns.strategy),
        command=command,
        synthetic=synthetic,
        max_distinct_evals=ns.max_evals,
        seed=ns.seed,
        out_path=ns.out,
    )
    config.validate()
    return config, CliOptions(baseline=baseline, server=ns.server)


def parse_cli(argv: Sequence[str]) -> SessionConfig:
    """Parse a full command line into a runnable session config.

    Raises ConfigInvalid or SpaceError (both usage errors) on bad input.
    """
    config, _ = _parse(argv)
    return config


def _print_summary(report: SessionReport) -> None:
    names = report.config.space.names
    assignment = " ".join(f"{n}={v}" for n, v in zip(names, report.best_point))
    print(f"best: {assignment}")
    print(f"score: {report.best_raw_score:.4f}")
    pct = 100.0 * report.efficiency_ratio
    print(
        f"distinct evaluations: {report.distinct_points_evaluated}"
        f" of {report.space_size} ({pct:.1f}%)"
    )
    print(f"converged: {report.convergence_reason}")
    if report.config.out_path:
        print(f"report: {report.config.out_path}")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        config, options = _parse(argv)
    except SystemExit as exc:  # argparse printed its own message
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (ConfigInvalid, SpaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if options.server is not None:
            from threadtune.service.client import run_remote_session

            report = run_remote_session(options.server, config)
            if config.out_path is not None:
                write_report(report, config.out_path)
        else:
            report = run_session(config)
    except (ConfigInvalid, SpawnFailure, UnknownPlaceholder) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoSuccessfulEvaluation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SUCCESS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    _print_summary(report)

    if options.baseline is not None:
        try:
            gain = compare_to_baseline(report, options.baseline, build_score_source(config))
        except (BaselineFailed, TuneError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        base_text = ",".join(str(v) for v in options.baseline)
        print(f"improvement over baseline ({base_text}): {gain:+.2f}%")
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
