"""Minimization objective over measured scores, with caching.

Scores are items/second, higher is better. Strategies minimize, so the
score s becomes the objective 1/s. A failed measurement gets no finite
objective at all: it carries a status and sorts after every successful
one. Evaluations are memoized per point so a strategy revisiting a grid
point (routine once continuous candidates get snapped) costs nothing.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

from threadtune.errors import AllRepeatsFailed
from threadtune.space import Point, canonical_key


class EvalStatus(str, Enum):
    OK = "ok"
    RUN_FAILED = "run_failed"
    PARSE_FAILED = "parse_failed"
    NONPOSITIVE_SCORE = "nonpositive_score"
    TIMEOUT = "timeout"


# Failure statuses ordered least to most severe; measure() propagates the worst.
_SEVERITY = {
    EvalStatus.NONPOSITIVE_SCORE: 1,
    EvalStatus.PARSE_FAILED: 2,
    EvalStatus.RUN_FAILED: 3,
    EvalStatus.TIMEOUT: 4,
}


def worst_status(statuses: Sequence[EvalStatus]) -> EvalStatus:
    return max(statuses, key=lambda s: _SEVERITY.get(s, 0))


@dataclass(frozen=True)
class Measurement:
    """Raw outcome of one score-source invocation, before caching."""

    raw_score: float | None
    status: EvalStatus
    duration_ms: float = 0.0


# A score source measures one point. Invoked strictly sequentially:
# concurrent benchmark processes would contend for the CPU and corrupt
# the measurement.
ScoreSource = Callable[[Point], Measurement]


@dataclass(frozen=True)
class Evaluation:
    """Record of one objective measurement at a point."""

    point: Point
    raw_score: float | None
    objective: float | None  # 1/raw_score when ok, None otherwise (sorts last)
    status: EvalStatus
    duration_ms: float
    from_cache: bool
    sequence_index: int

    @property
    def ok(self) -> bool:
        return self.status is EvalStatus.OK


def to_minimization(raw_score: float | None) -> float | None:
    """Reciprocal transform: positive score -> 1/score, anything else -> None.

    The transform reverses order (a > b > 0 implies 1/a < 1/b), so the
    argmax of the score is the argmin of the objective.
    """
    if raw_score is None or raw_score <= 0:
        return None
    return 1.0 / raw_score


def objective_sort_key(ev: Evaluation) -> float:
    """Sort key under which every failed evaluation is worse than any ok one."""
    return ev.objective if ev.objective is not None else math.inf


def aggregate_repeats(scores: Sequence[float], mode: str = "median") -> float:
    """Collapse the ok scores of repeated runs into one.

    Median (the default) is robust to warm-up outliers; even-length lists
    take the mean of the middle two. Failed repeats must already be
    excluded by the caller.
    """
    if not scores:
        raise AllRepeatsFailed("no successful repeats to aggregate")
    if mode == "median":
        return float(statistics.median(scores))
    if mode == "mean":
        return float(statistics.fmean(scores))
    if mode == "max":
        return float(max(scores))
    raise ValueError(f"unknown aggregation mode {mode!r}")


class EvalCache:
    """Memoized evaluations keyed by the point's canonical key.

    At most one entry per point; hits never re-invoke the score source.
    Failed evaluations are cached too: benchmark runs are expensive and a
    failing point is not retried within a session. miss_count is the
    number of distinct points actually measured.
    """

    def __init__(self) -> None:
        self._entries: dict[str, Evaluation] = {}
        self.hit_count = 0
        self.miss_count = 0
        self.query_count = 0

    def __contains__(self, point: Point) -> bool:
        return canonical_key(point) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, point: Point) -> Evaluation | None:
        return self._entries.get(canonical_key(point))

    def entries(self) -> list[Evaluation]:
        return list(self._entries.values())

    def evaluate(self, point: Point, source: ScoreSource) -> Evaluation:
        """Return the evaluation for a point, measuring it only on first query.

        Every query gets its own sequence_index (1-based); a hit returns a
        copy of the stored record flagged from_cache=True.
        """
        self.query_count += 1
        key = canonical_key(point)
        stored = self._entries.get(key)
        if stored is not None:
            self.hit_count += 1
            return replace(stored, from_cache=True, sequence_index=self.query_count)
        self.miss_count += 1
        m = source(point)
        objective = to_minimization(m.raw_score)
        status = m.status
        if status is EvalStatus.OK and objective is None:
            # Guard against a source claiming ok for a nonpositive score.
            status = EvalStatus.NONPOSITIVE_SCORE
        ev = Evaluation(
            point=tuple(point),
            raw_score=m.raw_score,
            objective=objective,
            status=status,
            duration_ms=m.duration_ms,
            from_cache=False,
            sequence_index=self.query_count,
        )
        self._entries[key] = ev
        return ev


def best_evaluation(evals: Sequence[Evaluation]) -> Evaluation | None:
    """First-seen minimum-objective ok evaluation, or None if all failed."""
    best: Evaluation | None = None
    for ev in evals:
        if not ev.ok:
            continue
        if best is None or objective_sort_key(ev) < objective_sort_key(best):
            best = ev
    return best
