"""Strategy protocol, driver budget enforcement, baseline searches."""

from __future__ import annotations

import pytest

from conftest import counting_source
from threadtune.errors import NoSuccessfulEvaluation, ProtocolViolation
from threadtune.objective import EvalCache
from threadtune.space import ParamSpec, SearchSpace
from threadtune.strategies import (
    REASON_BUDGET,
    REASON_CANCELLED,
    REASON_SPACE_EXHAUSTED,
    STRATEGIES,
    GeneratorStrategy,
    StrategyHandle,
    build_generator,
    drive,
    exhaustive_gen,
    exhaustive_search,
    random_gen,
    random_search,
)


def _line(n=10):
    return SearchSpace.of(ParamSpec("x", 1, n, 1))


def _fixed_gen(points, reason="all_done"):
    for p in points:
        yield p
    return reason


def test_strategy_propose_observe_cycle():
    cache = EvalCache()
    source, _ = counting_source(lambda p: p[0])
    s = GeneratorStrategy(_fixed_gen([(1,), (2,)]))

    p1 = s.propose_next()
    assert p1 == (1,)
    s.observe(cache.evaluate(p1, source))
    p2 = s.propose_next()
    assert p2 == (2,)
    s.observe(cache.evaluate(p2, source))
    assert s.propose_next() is None
    assert s.done
    assert s.reason == "all_done"


def test_strategy_rejects_out_of_turn_calls():
    cache = EvalCache()
    source, _ = counting_source(lambda p: p[0])
    s = GeneratorStrategy(_fixed_gen([(1,), (2,)]))

    with pytest.raises(ProtocolViolation):
        s.observe(cache.evaluate((1,), source))  # nothing proposed yet

    s.propose_next()
    with pytest.raises(ProtocolViolation):
        s.propose_next()  # last proposal still unobserved


def test_strategy_observe_after_finish_rejected():
    cache = EvalCache()
    source, _ = counting_source(lambda p: p[0])
    s = GeneratorStrategy(_fixed_gen([(1,)]))
    s.observe(cache.evaluate(s.propose_next(), source))
    assert s.propose_next() is None
    with pytest.raises(ProtocolViolation):
        s.observe(cache.evaluate((1,), source))


def test_strategy_without_return_value_reports_exhaustion():
    def bare():
        yield (1,)

    cache = EvalCache()
    source, _ = counting_source(lambda p: p[0])
    s = GeneratorStrategy(bare())
    s.observe(cache.evaluate(s.propose_next(), source))
    assert s.propose_next() is None
    assert s.reason == REASON_SPACE_EXHAUSTED


def test_strategy_close_is_idempotent():
    s = GeneratorStrategy(_fixed_gen([(1,), (2,)]))
    s.close("cancelled")
    s.close("something_else")
    assert s.done
    assert s.reason == "cancelled"
    assert s.propose_next() is None


def test_drive_budget_is_a_hard_cap():
    space = _line()
    source, calls = counting_source(lambda p: p[0])
    trace, reason = drive(GeneratorStrategy(exhaustive_gen(space)), EvalCache(), source, budget=3)
    assert reason == REASON_BUDGET
    assert len(trace) == 3
    assert len(calls) == 3


def test_drive_serves_cache_hits_at_budget():
    # revisits cost nothing, so they are allowed even with the budget spent
    source, calls = counting_source(lambda p: p[0])
    gen = _fixed_gen([(1,), (1,), (2,)])
    trace, reason = drive(GeneratorStrategy(gen), EvalCache(), source, budget=1)
    assert [e.point for e in trace] == [(1,), (1,)]
    assert trace[1].from_cache
    assert len(calls) == 1
    assert reason == REASON_BUDGET


def test_drive_cancellation():
    space = _line()
    source, _ = counting_source(lambda p: p[0])
    seen = []

    trace, reason = drive(
        GeneratorStrategy(exhaustive_gen(space)),
        EvalCache(),
        source,
        budget=99,
        on_evaluation=seen.append,
        should_stop=lambda: len(seen) >= 2,
    )
    assert reason == REASON_CANCELLED
    assert len(trace) == 2
    assert seen == trace


def test_exhaustive_gen_is_lexicographic():
    space = SearchSpace.of(ParamSpec("a", 1, 2, 1), ParamSpec("b", 5, 15, 5))
    assert list(exhaustive_gen(space)) == list(space.points())


def test_random_gen_seeded_and_without_replacement():
    space = _line(56)
    first = list(random_gen(space, seed=9))
    again = list(random_gen(space, seed=9))
    other = list(random_gen(space, seed=10))

    assert first == again
    assert first != other
    assert sorted(first) == list(space.points())  # a permutation, no repeats

    limited = list(random_gen(space, seed=9, limit=5))
    assert limited == list(random_gen(space, seed=9, limit=5))
    assert len(limited) == len(set(limited)) == 5
    assert all(space.contains(p) for p in limited)
    assert len(list(random_gen(space, seed=9, limit=999))) == space.size()


def test_exhaustive_search_result():
    space = _line(6)
    source, calls = counting_source(lambda p: 10.0 + p[0])
    result = exhaustive_search(space, source)
    assert result.reason == REASON_SPACE_EXHAUSTED
    assert result.best.point == (6,)
    assert result.distinct_evaluations == 6
    assert len(calls) == 6


def test_random_search_respects_budget():
    space = _line(20)
    source, calls = counting_source(lambda p: float(p[0]))
    result = random_search(space, source, seed=4, budget=7)
    assert result.distinct_evaluations == 7
    assert len(calls) == 7
    assert result.best.raw_score == max(float(p[0]) for p in (e.point for e in result.trace))


def test_search_raises_when_nothing_succeeds():
    from threadtune.objective import EvalStatus, Measurement

    space = _line(4)

    def source(point):
        return Measurement(raw_score=None, status=EvalStatus.RUN_FAILED)

    with pytest.raises(NoSuccessfulEvaluation):
        exhaustive_search(space, source)
    with pytest.raises(NoSuccessfulEvaluation):
        random_search(space, source, seed=1)


def test_strategy_handle_canonical_form():
    assert set(STRATEGIES) == {"nm", "exhaustive", "random"}
    with pytest.raises(ValueError):
        StrategyHandle(name="simulated_annealing")

    a = StrategyHandle.of("nm", stall_limit=4, alpha=1.5)
    b = StrategyHandle(name="nm", config={"alpha": 1.5, "stall_limit": 4})
    c = StrategyHandle(name="nm", config=(("stall_limit", 4), ("alpha", 1.5)))
    assert a == b == c
    assert a.config == (("alpha", 1.5), ("stall_limit", 4))
    assert a.config_dict() == {"alpha": 1.5, "stall_limit": 4}


def test_build_generator_dispatch():
    space = SearchSpace.of(ParamSpec("a", 1, 2, 1), ParamSpec("b", 5, 15, 5))
    assert list(build_generator(StrategyHandle.of("exhaustive"), space)) == list(space.points())

    randomized = list(build_generator(StrategyHandle.of("random"), space, seed=7, budget=4))
    assert randomized == list(random_gen(space, 7, 4))


def test_build_generator_nm_config_overrides_budget_default():
    from threadtune.synthetic import PRESETS, make_score_source

    preset = PRESETS["mkl3d"]
    source = make_score_source(preset.model)
    handle = StrategyHandle.of("nm", max_distinct_evals=5)
    gen = build_generator(handle, preset.space, budget=99)
    cache = EvalCache()
    _, reason = drive(GeneratorStrategy(gen), cache, source, budget=99)
    assert reason == REASON_BUDGET
    assert cache.miss_count == 5
