"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import json
import sys

import pytest

from threadtune.objective import EvalStatus, Measurement
from threadtune.space import ParamSpec, SearchSpace


@pytest.fixture
def small_space() -> SearchSpace:
    return SearchSpace.of(ParamSpec("a", 1, 4, 1), ParamSpec("b", 10, 30, 10))


def counting_source(score_fn):
    """Wrap point -> float as a ScoreSource that records every invocation."""
    calls: list[tuple[int, ...]] = []

    def source(point):
        calls.append(tuple(point))
        return Measurement(raw_score=float(score_fn(point)), status=EvalStatus.OK)

    return source, calls


def python_stub(code: str) -> list[str]:
    """argv for a tiny inline-python benchmark stand-in."""
    return [sys.executable, "-c", code]


def scrub_wall_times(report_json: str) -> str:
    """Zero the nondeterministic timing fields so reports can be diffed."""
    from threadtune.session import WALL_TIME_FIELDS

    def walk(node):
        if isinstance(node, dict):
            return {
                k: (0.0 if k in WALL_TIME_FIELDS else walk(v))
                for k, v in node.items()
            }
        if isinstance(node, list):
            return [walk(v) for v in node]
        return node

    return json.dumps(walk(json.loads(report_json)), indent=2, sort_keys=True)
