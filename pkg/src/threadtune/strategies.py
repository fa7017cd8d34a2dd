"""Search strategies behind a uniform propose/observe protocol.

A strategy is anything that proposes points one at a time and accepts the
evaluation of the last proposal before making the next. The simplex
search, the exhaustive scan and seeded random sampling all plug in the
same way, so the session layer, the CLI and the HTTP service never
special-case a strategy. The driver owns the distinct-evaluation budget:
a proposal that would force a fresh measurement past the budget ends the
run instead of being measured, so the budget is a hard cap, not a hint.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Generator

from threadtune.errors import NoSuccessfulEvaluation, ProtocolViolation
from threadtune.objective import EvalCache, Evaluation, ScoreSource, best_evaluation
from threadtune.space import Point, SearchSpace

REASON_SPACE_EXHAUSTED = "space_exhausted"
REASON_BUDGET = "budget_exhausted"
REASON_CANCELLED = "cancelled"

StrategyGen = Generator[Point, Evaluation, str]


class GeneratorStrategy:
    """Adapts a point-yielding generator to propose_next/observe calls.

    propose_next returns None once the generator finishes; the finish
    reason is then available as .reason. Calling either method out of
    turn raises ProtocolViolation rather than silently desynchronizing
    the generator.
    """

    def __init__(self, gen: StrategyGen) -> None:
        self._gen = gen
        self._started = False
        self._awaiting_observe = False
        self._pending: Evaluation | None = None
        self._done = False
        self.reason: str | None = None

    @property
    def done(self) -> bool:
        return self._done

    def propose_next(self) -> Point | None:
        if self._done:
            return None
        if self._awaiting_observe:
            raise ProtocolViolation("propose_next called before observing the last proposal")
        try:
            if not self._started:
                self._started = True
                point = next(self._gen)
            else:
                point = self._gen.send(self._pending)
        except StopIteration as stop:
            self._done = True
            self.reason = stop.value if isinstance(stop.value, str) else REASON_SPACE_EXHAUSTED
            return None
        self._awaiting_observe = True
        return point

    def observe(self, evaluation: Evaluation) -> None:
        if self._done:
            raise ProtocolViolation("observe called on a finished strategy")
        if not self._awaiting_observe:
            raise ProtocolViolation("observe called with no proposal outstanding")
        self._pending = evaluation
        self._awaiting_observe = False

    def close(self, reason: str) -> None:
        if not self._done:
            self._gen.close()
            self._done = True
            self._awaiting_observe = False
            self.reason = reason


def drive(
    strategy: GeneratorStrategy,
    cache: EvalCache,
    source: ScoreSource,
    budget: int,
    on_evaluation: Callable[[Evaluation], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> tuple[list[Evaluation], str]:
    """Run a strategy to completion under a distinct-evaluation budget.

    Every proposal is resolved through the cache; a proposal not yet
    cached when the budget is already spent ends the run with reason
    "budget_exhausted". Returns the full query trace and the stop reason.
    """
    trace: list[Evaluation] = []
    while True:
        if should_stop is not None and should_stop():
            strategy.close(REASON_CANCELLED)
            break
        point = strategy.propose_next()
        if point is None:
            break
        if point not in cache and cache.miss_count >= budget:
            strategy.close(REASON_BUDGET)
            break
        ev = cache.evaluate(point, source)
        trace.append(ev)
        if on_evaluation is not None:
            on_evaluation(ev)
        strategy.observe(ev)
    assert strategy.reason is not None
    return trace, strategy.reason


def exhaustive_gen(space: SearchSpace) -> StrategyGen:
    """Visit every grid point in lexicographic order."""
    for point in space.points():
        yield point
    return REASON_SPACE_EXHAUSTED


def random_gen(space: SearchSpace, seed: int, limit: int | None = None) -> StrategyGen:
    """Sample grid points uniformly without replacement, seeded.

    Visits min(limit, size) points. Index-based sampling keeps the draw
    order a pure function of the seed regardless of space shape.
    """
    size = space.size()
    count = size if limit is None else min(limit, size)
    rng = random.Random(seed)
    for index in rng.sample(range(size), count):
        yield space.point_at(index)
    return REASON_SPACE_EXHAUSTED


def exhaustive_search(
    space: SearchSpace,
    source: ScoreSource,
    cache: EvalCache | None = None,
    budget: int | None = None,
):
    """Scan the whole space; returns a TuningResult."""
    from threadtune.nelder_mead import TuningResult

    cache = cache or EvalCache()
    trace, reason = drive(
        GeneratorStrategy(exhaustive_gen(space)),
        cache,
        source,
        budget if budget is not None else space.size(),
    )
    best = best_evaluation(trace)
    if best is None:
        raise NoSuccessfulEvaluation("no point evaluated successfully")
    return TuningResult(best=best, trace=trace, reason=reason, cache=cache)


def random_search(
    space: SearchSpace,
    source: ScoreSource,
    seed: int,
    budget: int | None = None,
    cache: EvalCache | None = None,
):
    """Sample without replacement until the budget or the space runs out."""
    from threadtune.nelder_mead import TuningResult

    cache = cache or EvalCache()
    b = budget if budget is not None else space.size()
    trace, reason = drive(GeneratorStrategy(random_gen(space, seed, b)), cache, source, b)
    best = best_evaluation(trace)
    if best is None:
        raise NoSuccessfulEvaluation("no point evaluated successfully")
    return TuningResult(best=best, trace=trace, reason=reason, cache=cache)


STRATEGIES = ("nm", "exhaustive", "random")


@dataclass(frozen=True)
class StrategyHandle:
    """A strategy selected by registry name plus its specific knobs.

    config keys for nm are NMConfig field overrides (alpha, gamma, ...);
    exhaustive and random take no knobs beyond the shared seed/budget.
    """

    name: str
    config: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.name not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.name!r}; expected one of {', '.join(STRATEGIES)}"
            )
        raw = self.config
        pairs = raw.items() if isinstance(raw, dict) else raw
        # Canonical order: duplicate-free keys, so this never compares values.
        ordered = sorted(((str(k), v) for k, v in pairs), key=lambda kv: kv[0])
        object.__setattr__(self, "config", tuple(ordered))

    @classmethod
    def of(cls, name: str, **config: object) -> StrategyHandle:
        return cls(name=name, config=tuple(sorted(config.items())))

    def config_dict(self) -> dict[str, object]:
        return dict(self.config)


def build_generator(
    handle: StrategyHandle,
    space: SearchSpace,
    seed: int = 0,
    budget: int | None = None,
) -> StrategyGen:
    """Instantiate the generator a handle names."""
    if handle.name == "nm":
        from threadtune.nelder_mead import NMConfig, nm_search

        kwargs = handle.config_dict()
        kwargs.setdefault("max_distinct_evals", budget)
        return nm_search(space, NMConfig(**kwargs))
    if handle.name == "exhaustive":
        return exhaustive_gen(space)
    return random_gen(space, seed, budget)
