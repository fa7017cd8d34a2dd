"""End-to-end tuning sessions: wire a space, a strategy and a score
source together, run to convergence, and persist a self-contained report.

A report is one schema-versioned JSON document holding the config echo,
the full evaluation trace in query order, the best point found, and the
efficiency metrics (distinct points measured vs. space size). Everything
in it except the wall-time fields is a pure function of the config and
seed when the score source is deterministic, so reports from different
machines can be diffed directly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from threadtune import __version__
from threadtune.errors import (
    BaselineFailed,
    ConfigInvalid,
    NoSuccessfulEvaluation,
    SchemaError,
)
from threadtune.nelder_mead import REASON_FALLBACK
from threadtune.objective import EvalCache, EvalStatus, Evaluation, ScoreSource, best_evaluation
from threadtune.runner import CommandTemplate, make_score_source
from threadtune.space import Point, SearchSpace, parse_space
from threadtune.strategies import GeneratorStrategy, StrategyHandle, build_generator, drive, exhaustive_gen
from threadtune.synthetic import get_preset
from threadtune.synthetic import make_score_source as make_synthetic_source

SCHEMA_VERSION = 1

# Inherently nondeterministic fields, excluded from reproducibility
# comparisons: the report total and the per-evaluation durations.
WALL_TIME_FIELDS = ("total_wall_ms", "duration_ms")


@dataclass(frozen=True)
class SessionConfig:
    """Everything a tuning run needs; exactly one score source.

    synthetic names a built-in analytic model preset; command is a
    CommandTemplate for real benchmarks. max_distinct_evals of None means
    the space size is the only cap.
    """

    space: SearchSpace
    strategy: StrategyHandle
    command: CommandTemplate | None = None
    synthetic: str | None = None
    max_distinct_evals: int | None = None
    seed: int = 0
    out_path: str | None = None

    def validate(self) -> None:
        if (self.command is None) == (self.synthetic is None):
            raise ConfigInvalid("exactly one of a command or a synthetic objective is required")
        if self.max_distinct_evals is not None and self.max_distinct_evals < 1:
            raise ConfigInvalid("max_distinct_evals must be >= 1")
        if self.synthetic is not None:
            try:
                get_preset(self.synthetic)
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from exc
            if self.space.n not in (2, 3):
                raise ConfigInvalid(
                    f"synthetic objectives take 2 or 3 parameters, space has {self.space.n}"
                )
        if self.command is not None:
            unknown = self.command.placeholder_names() - set(self.space.names)
            if unknown:
                raise ConfigInvalid(
                    f"command references unknown parameter {{{sorted(unknown)[0]}}}"
                )


@dataclass(frozen=True)
class SessionReport:
    """Complete record of one finished session."""

    schema_version: int
    tool_version: str
    config: SessionConfig
    evaluations: tuple[Evaluation, ...]
    best_point: Point
    best_raw_score: float
    space_size: int
    distinct_points_evaluated: int
    efficiency_ratio: float
    convergence_reason: str
    total_wall_ms: float


def build_score_source(config: SessionConfig) -> ScoreSource:
    if config.synthetic is not None:
        return make_synthetic_source(get_preset(config.synthetic).model)
    assert config.command is not None
    return make_score_source(config.command, config.space)


def run_session(
    config: SessionConfig,
    on_evaluation: Callable[[Evaluation], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> SessionReport:
    """Execute the configured strategy to completion and build the report.

    Raises ConfigInvalid for an unrunnable config and
    NoSuccessfulEvaluation when every measured point failed. The report
    is also written to config.out_path when one is set.
    """
    config.validate()
    space = config.space
    source = build_score_source(config)
    budget = config.max_distinct_evals if config.max_distinct_evals is not None else space.size()
    cache = EvalCache()

    start = time.perf_counter()
    fallback = config.strategy.name == "nm" and space.size() < space.n + 1
    if fallback:
        gen = exhaustive_gen(space)
    else:
        gen = build_generator(config.strategy, space, seed=config.seed, budget=budget)
    trace, reason = drive(
        GeneratorStrategy(gen), cache, source, budget,
        on_evaluation=on_evaluation, should_stop=should_stop,
    )
    if fallback:
        reason = REASON_FALLBACK
    best = best_evaluation(trace)
    if best is None:
        raise NoSuccessfulEvaluation("no point evaluated successfully")
    total_wall_ms = (time.perf_counter() - start) * 1000.0

    assert best.raw_score is not None
    report = SessionReport(
        schema_version=SCHEMA_VERSION,
        tool_version=__version__,
        config=config,
        evaluations=tuple(trace),
        best_point=best.point,
        best_raw_score=best.raw_score,
        space_size=space.size(),
        distinct_points_evaluated=cache.miss_count,
        efficiency_ratio=cache.miss_count / space.size(),
        convergence_reason=reason,
        total_wall_ms=total_wall_ms,
    )
    if config.out_path is not None:
        write_report(report, config.out_path)
    return report


def compare_to_baseline(
    report: SessionReport, baseline_point: Sequence[int], score_source: ScoreSource
) -> float:
    """Percent improvement of the session's best over a reference point.

    The baseline is taken from the session trace when it was already
    measured there; otherwise the score source is invoked once. Returns
    100 * (best - baseline) / baseline.
    """
    point = tuple(baseline_point)
    if not report.config.space.contains(point):
        raise BaselineFailed(f"baseline point {point} is not on the space grid")
    baseline_score: float | None = None
    for ev in report.evaluations:
        if ev.point == point and ev.ok:
            baseline_score = ev.raw_score
            break
    if baseline_score is None:
        m = score_source(point)
        if m.status is not EvalStatus.OK or m.raw_score is None or m.raw_score <= 0:
            raise BaselineFailed(f"baseline point {point} failed with status {m.status.value}")
        baseline_score = m.raw_score
    return 100.0 * (report.best_raw_score - baseline_score) / baseline_score


def _config_to_dict(config: SessionConfig) -> dict:
    if config.synthetic is not None:
        source: dict = {"kind": "synthetic", "preset": config.synthetic}
    else:
        assert config.command is not None
        c = config.command
        source = {
            "kind": "command",
            "argv": list(c.argv),
            "base_env": dict(c.base_env),
            "export_params_as_env": c.export_params_as_env,
            "score_pattern": c.score_pattern,
            "timeout_s": c.timeout_s,
            "repeats": c.repeats,
            "aggregation": c.aggregation,
        }
    return {
        "space": config.space.to_dict(),
        "strategy": {"name": config.strategy.name, "config": config.strategy.config_dict()},
        "source": source,
        "max_distinct_evals": config.max_distinct_evals,
        "seed": config.seed,
        "out_path": config.out_path,
    }


def _config_from_dict(d: dict) -> SessionConfig:
    source = d["source"]
    command = None
    synthetic = None
    if source["kind"] == "synthetic":
        synthetic = source["preset"]
    elif source["kind"] == "command":
        command = CommandTemplate(
            argv=tuple(source["argv"]),
            base_env=source["base_env"],
            export_params_as_env=source["export_params_as_env"],
            score_pattern=source["score_pattern"],
            timeout_s=source["timeout_s"],
            repeats=source["repeats"],
            aggregation=source["aggregation"],
        )
    else:
        raise SchemaError(f"unknown source kind {source['kind']!r}")
    return SessionConfig(
        space=parse_space(d["space"]),
        strategy=StrategyHandle.of(d["strategy"]["name"], **d["strategy"]["config"]),
        command=command,
        synthetic=synthetic,
        max_distinct_evals=d["max_distinct_evals"],
        seed=d["seed"],
        out_path=d["out_path"],
    )


def _evaluation_to_dict(ev: Evaluation) -> dict:
    return {
        "point": list(ev.point),
        "raw_score": ev.raw_score,
        "objective": ev.objective,  # null when the evaluation failed
        "status": ev.status.value,
        "duration_ms": ev.duration_ms,
        "from_cache": ev.from_cache,
        "sequence_index": ev.sequence_index,
    }


def _evaluation_from_dict(d: dict) -> Evaluation:
    return Evaluation(
        point=tuple(d["point"]),
        raw_score=d["raw_score"],
        objective=d["objective"],
        status=EvalStatus(d["status"]),
        duration_ms=d["duration_ms"],
        from_cache=d["from_cache"],
        sequence_index=d["sequence_index"],
    )


def report_to_dict(report: SessionReport) -> dict:
    return {
        "schema_version": report.schema_version,
        "tool_version": report.tool_version,
        "config": _config_to_dict(report.config),
        "evaluations": [_evaluation_to_dict(ev) for ev in report.evaluations],
        "best_point": list(report.best_point),
        "best_raw_score": report.best_raw_score,
        "space_size": report.space_size,
        "distinct_points_evaluated": report.distinct_points_evaluated,
        "efficiency_ratio": report.efficiency_ratio,
        "convergence_reason": report.convergence_reason,
        "total_wall_ms": report.total_wall_ms,
    }


def report_from_dict(d: dict) -> SessionReport:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"report has schema version {version!r}, this tool expects {SCHEMA_VERSION}")
    try:
        return SessionReport(
            schema_version=d["schema_version"],
            tool_version=d["tool_version"],
            config=_config_from_dict(d["config"]),
            evaluations=tuple(_evaluation_from_dict(e) for e in d["evaluations"]),
            best_point=tuple(d["best_point"]),
            best_raw_score=d["best_raw_score"],
            space_size=d["space_size"],
            distinct_points_evaluated=d["distinct_points_evaluated"],
            efficiency_ratio=d["efficiency_ratio"],
            convergence_reason=d["convergence_reason"],
            total_wall_ms=d["total_wall_ms"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed report: {exc}") from exc


def report_to_json(report: SessionReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def write_report(report: SessionReport, path: str) -> None:
    """Serialize to path. I/O errors propagate as OSError."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(report_to_json(report))


def read_report(path: str) -> SessionReport:
    """Load a report written by write_report.

    Raises SchemaError for unparseable or wrong-version documents; I/O
    errors propagate as OSError.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("report is not a JSON object")
    return report_from_dict(data)


def parse_cli(argv: Sequence[str]) -> SessionConfig:
    """Turn tune-command arguments into a SessionConfig.

    Lives with the argument parser in the cli module; re-exported here
    because callers orchestrating sessions programmatically tend to look
    for it next to run_session. Imported lazily: cli imports this module.
    """
    from threadtune.cli import parse_cli as _parse_cli

    return _parse_cli(argv)
