"""Analytic throughput model: formula, oracle enumeration, presets."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from threadtune.errors import SpaceTooLarge
from threadtune.objective import EvalStatus
from threadtune.space import ParamSpec, SearchSpace
from threadtune.synthetic import (
    PRESETS,
    SyntheticModel,
    get_preset,
    make_score_source,
    oracle_optimum,
    throughput,
)


def _reference(model, values):
    # Straight transcription of the documented formula, kept independent
    # of the implementation under test.
    if len(values) == 2:
        inter, workers = values
    else:
        inter, workers = values[0], max(values[1], values[2])
    usable = min(workers, model.cores)
    scaling = usable / (1.0 + model.serial_fraction * (usable - 1))
    graph = 1.0 + model.graph_gain * (min(inter, model.graph_cap) - 1)
    total = inter * workers
    penalty = 1.0 if total <= model.cores else (model.cores / total) ** model.oversub_exponent
    return model.peak * graph * scaling * penalty


def test_throughput_single_graph_thread_full_width():
    # one op at a time, 56 workers on 56 cores: pure Amdahl scaling
    score = throughput(SyntheticModel(), (1, 14, 56))
    assert score == 100.0 * (56 / (1.0 + 0.02 * 55))
    assert score == pytest.approx(2666.6666666666665)


def test_throughput_worker_count_is_max_of_pools():
    m = SyntheticModel()
    assert throughput(m, (1, 56, 14)) == throughput(m, (1, 14, 56))
    assert throughput(m, (1, 56, 56)) == throughput(m, (1, 14, 56))


def test_throughput_graph_gain_and_cap():
    m = SyntheticModel(oversub_exponent=0.0)
    one, two, three = (throughput(m, (i, 28)) for i in (1, 2, 3))
    assert two == pytest.approx(1.15 * one)
    assert three == two  # capped at 2 concurrent ops


def test_throughput_oversubscription_penalty():
    m = SyntheticModel()
    # 4 * 56 = 224 threads on 56 cores: (1/4)^1.5 = 1/8
    crowded = throughput(m, (4, 56, 56))
    graphy = 1.0 + 0.15  # inter=4 still capped at 2
    assert crowded == pytest.approx(100.0 * graphy * (56 / 2.1) * 0.125)


def test_throughput_matches_reference_on_spot_points():
    m = SyntheticModel(cores=8, peak=50.0, serial_fraction=0.05, graph_gain=0.2, graph_cap=3, oversub_exponent=2.0)
    for values in [(1, 2), (3, 8), (4, 16), (1, 4, 8), (2, 8, 3), (4, 16, 16)]:
        assert throughput(m, values) == pytest.approx(_reference(m, values), rel=1e-12)


def test_throughput_arity_and_range_checks():
    m = SyntheticModel()
    with pytest.raises(ValueError):
        throughput(m, (4,))
    with pytest.raises(ValueError):
        throughput(m, (1, 2, 3, 4))
    with pytest.raises(ValueError):
        throughput(m, (0, 5))
    with pytest.raises(ValueError):
        throughput(m, (1, 0))


def test_model_validation():
    for bad in (
        dict(cores=0),
        dict(peak=0.0),
        dict(serial_fraction=1.0),
        dict(serial_fraction=-0.1),
        dict(graph_gain=-0.1),
        dict(graph_cap=0),
        dict(oversub_exponent=-1.0),
    ):
        with pytest.raises(ValueError):
            SyntheticModel(**bad)


def _brute_force_argmax(model, space):
    # independent enumeration: itertools over the per-axis grids
    grids = [p.grid_values() for p in space.params]
    best_point, best_score = None, None
    for point in itertools.product(*grids):
        score = throughput(model, point)
        if best_score is None or score > best_score:
            best_point, best_score = point, score
    return best_point, best_score


def test_oracle_matches_independent_enumeration():
    models = [
        SyntheticModel(),
        SyntheticModel(serial_fraction=0.08, graph_gain=0.25, oversub_exponent=0.7),
        SyntheticModel(serial_fraction=0.0, graph_gain=0.0, oversub_exponent=2.5),
    ]
    for preset in PRESETS.values():
        for model in models:
            assert oracle_optimum(model, preset.space) == _brute_force_argmax(model, preset.space)


def test_oracle_default_values():
    point, score = oracle_optimum(SyntheticModel(), PRESETS["mkl3d"].space)
    assert point == (1, 14, 56)
    assert score == pytest.approx(2666.6666666666665)
    point2, score2 = oracle_optimum(SyntheticModel(), PRESETS["eigen2d"].space)
    assert point2 == (1, 56)
    assert score2 == score


def test_oracle_tie_goes_to_first_point():
    # gain and penalty switched off, one usable core: every point ties
    flat = SyntheticModel(cores=1, graph_gain=0.0, oversub_exponent=0.0)
    point, score = oracle_optimum(flat, PRESETS["eigen2d"].space)
    assert point == (1, 14)
    assert score == 100.0


def test_oracle_refuses_huge_spaces():
    big = SearchSpace.of(ParamSpec("a", 1, 1001, 1), ParamSpec("b", 1, 1000, 1))
    with pytest.raises(SpaceTooLarge):
        oracle_optimum(SyntheticModel(), big)


def test_preset_shapes():
    mkl = PRESETS["mkl3d"]
    assert mkl.space.names == ("inter_op", "intra_op", "omp")
    assert mkl.space.size() == 196
    eig = PRESETS["eigen2d"]
    assert eig.space.names == ("inter_op", "intra_op")
    assert eig.space.size() == 28


def test_get_preset_accepts_cli_prefix():
    assert get_preset("mkl3d") is get_preset("synthetic:mkl3d")
    with pytest.raises(ValueError):
        get_preset("synthetic:nope")


def test_make_score_source_wraps_model():
    source = make_score_source(SyntheticModel())
    m = source((1, 14, 56))
    assert m.status is EvalStatus.OK
    assert m.duration_ms == 0.0
    assert m.raw_score == pytest.approx(2666.6666666666665)


@given(
    beta=st.floats(0.0, 0.5),
    gain=st.floats(0.0, 1.0),
    delta=st.floats(0.0, 4.0),
    cores=st.integers(1, 128),
    index=st.integers(0, 195),
)
def test_throughput_positive_and_matches_reference(beta, gain, delta, cores, index):
    model = SyntheticModel(cores=cores, serial_fraction=beta, graph_gain=gain, oversub_exponent=delta)
    point = PRESETS["mkl3d"].space.point_at(index)
    score = throughput(model, point)
    assert score > 0
    assert score == pytest.approx(_reference(model, point), rel=1e-9)
