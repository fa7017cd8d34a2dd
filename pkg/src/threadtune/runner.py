"""Measure a command's throughput for one parameter assignment.

The command template carries {name} placeholders that are substituted
with parameter values; every parameter is also exported through the
environment under its literal name (unless disabled), so programs that
read env vars (the common case for thread-count knobs) need no
placeholders at all. The score is the last match of the score pattern in
the combined output, which lets noisy benchmarks print warmup numbers
first. Timeouts kill the whole process group, not just the direct child.
"""

from __future__ import annotations

import os
import re
import signal
import subprocess
import time
from dataclasses import dataclass, field

from threadtune.errors import SpawnFailure, UnknownPlaceholder
from threadtune.objective import (
    EvalStatus,
    Measurement,
    ScoreSource,
    aggregate_repeats,
    worst_status,
)
from threadtune.space import Point, SearchSpace

DEFAULT_SCORE_PATTERN = r"(?:score|throughput)\s*[:=]\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"

# {identifier} only; brace groups like {2,3} inside a regex argument pass through.
_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

_OUTPUT_TAIL_BYTES = 64 * 1024

AGGREGATIONS = ("median", "mean", "max")


@dataclass(frozen=True)
class RunResult:
    """One command invocation: exit code, captured output tails, timing."""

    returncode: int | None
    stdout_tail: str
    stderr_tail: str
    duration_ms: float
    timed_out: bool = False


@dataclass(frozen=True)
class CommandTemplate:
    """A benchmark command plus the fixed context it always runs in.

    argv tokens may contain {name} placeholders referring to parameters
    of the space the template is later bound to. base_env entries are
    applied on top of the inherited environment; tuned parameters are
    exported after that under their literal names when
    export_params_as_env is set. score_pattern must have exactly one
    capture group matching a decimal number.
    """

    argv: tuple[str, ...]
    base_env: tuple[tuple[str, str], ...] = ()
    export_params_as_env: bool = True
    score_pattern: str = DEFAULT_SCORE_PATTERN
    timeout_s: float | None = None
    repeats: int = 1
    aggregation: str = "median"

    def __post_init__(self) -> None:
        object.__setattr__(self, "argv", tuple(self.argv))
        raw_env = self.base_env
        pairs = sorted(raw_env.items()) if isinstance(raw_env, dict) else list(raw_env)
        object.__setattr__(self, "base_env", tuple((str(k), str(v)) for k, v in pairs))
        if not self.argv:
            raise ValueError("command must have at least one token")
        if re.compile(self.score_pattern).groups != 1:
            raise ValueError("score pattern must have exactly one capture group")
        if self.timeout_s is not None and self.timeout_s <= 0:
            raise ValueError("timeout must be > 0 seconds")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {', '.join(AGGREGATIONS)}")

    def placeholder_names(self) -> set[str]:
        found: set[str] = set()
        for token in self.argv:
            found.update(_PLACEHOLDER.findall(token))
        return found

    def render(self, space: SearchSpace, point: Point) -> tuple[list[str], dict[str, str]]:
        """Substitute placeholders and build the child environment.

        Unknown placeholder names are an error: a typo that silently ran
        the benchmark with a literal "{intra}" argument would poison the
        whole session.
        """
        values = dict(zip(space.names, point))
        unknown = self.placeholder_names() - set(values)
        if unknown:
            raise UnknownPlaceholder(sorted(unknown)[0])

        def sub(m: re.Match[str]) -> str:
            return str(values[m.group(1)])

        argv = [_PLACEHOLDER.sub(sub, token) for token in self.argv]
        env = dict(os.environ)
        env.update(dict(self.base_env))
        if self.export_params_as_env:
            env.update({name: str(v) for name, v in values.items()})
        return argv, env


def extract_score(output: str, pattern: str) -> float | None:
    """Last match of the score pattern in the output, or None.

    Uses the capture group when the pattern has one, otherwise the whole
    match. A match that does not parse as a finite float counts as no
    match.
    """
    matches = list(re.finditer(pattern, output, re.MULTILINE))
    if not matches:
        return None
    m = matches[-1]
    text = m.group(1) if m.lastindex else m.group(0)
    try:
        value = float(text)
    except ValueError:
        return None
    if value != value or value in (float("inf"), float("-inf")):  # NaN / inf
        return None
    return value


def run_once(argv: list[str], env: dict[str, str], timeout_s: float | None) -> RunResult:
    """Run one command to completion, killing its process group on timeout."""
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
            start_new_session=True,
            text=True,
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot launch {argv[0]!r}: {exc}") from exc
    try:
        out, err = proc.communicate(timeout=timeout_s)
        timed_out = False
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        timed_out = True
    duration_ms = (time.monotonic() - start) * 1000.0
    return RunResult(
        returncode=None if timed_out else proc.returncode,
        stdout_tail=(out or "")[-_OUTPUT_TAIL_BYTES:],
        stderr_tail=(err or "")[-_OUTPUT_TAIL_BYTES:],
        duration_ms=duration_ms,
        timed_out=timed_out,
    )


def measure(template: CommandTemplate, space: SearchSpace, point: Point) -> Measurement:
    """Run the command template.repeats times at one point and aggregate.

    Successful repeats are aggregated with the template's statistic. If
    every repeat fails, the reported status is the most severe failure
    seen, so a timeout is never masked by a later clean parse failure.
    """
    scores: list[float] = []
    failures: list[EvalStatus] = []
    total_ms = 0.0
    for _ in range(template.repeats):
        argv, env = template.render(space, point)
        result = run_once(argv, env, template.timeout_s)
        total_ms += result.duration_ms
        if result.timed_out:
            failures.append(EvalStatus.TIMEOUT)
            continue
        if result.returncode != 0:
            failures.append(EvalStatus.RUN_FAILED)
            continue
        score = extract_score(result.stdout_tail + "\n" + result.stderr_tail, template.score_pattern)
        if score is None:
            failures.append(EvalStatus.PARSE_FAILED)
            continue
        if score <= 0:
            failures.append(EvalStatus.NONPOSITIVE_SCORE)
            continue
        scores.append(score)
    if scores:
        return Measurement(
            raw_score=aggregate_repeats(scores, template.aggregation),
            status=EvalStatus.OK,
            duration_ms=total_ms,
        )
    return Measurement(raw_score=None, status=worst_status(failures), duration_ms=total_ms)


def make_score_source(template: CommandTemplate, space: SearchSpace) -> ScoreSource:
    """Bind a template to a space as a plain point -> Measurement callable."""

    def source(point: Point) -> Measurement:
        return measure(template, space, point)

    return source
