"""Analytic throughput models with known optima, for tests and demos.

The model mimics how threaded training workloads actually behave on a
many-core box: per-op scaling that saturates (a serial fraction), a small
gain from running a couple of graph ops concurrently, and a cliff once
the total live thread count oversubscribes the cores. It is deterministic
and strictly positive, so the reciprocal transform is total on it and the
exact optimum can be found by enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from threadtune.errors import SpaceTooLarge
from threadtune.objective import EvalStatus, Measurement, ScoreSource
from threadtune.space import ParamSpec, Point, SearchSpace

ORACLE_ENUMERATION_GUARD = 10**6


@dataclass(frozen=True)
class SyntheticModel:
    """Parameters of the analytic throughput model.

    cores defaults to 56, a 2-socket 28-core server. peak is the score of
    a single-threaded run; serial_fraction is the Amdahl-style fraction
    limiting per-op scaling; graph_gain and graph_cap shape the benefit of
    concurrent op execution; oversub_exponent controls how hard throughput
    falls once total threads exceed the cores.
    """

    cores: int = 56
    peak: float = 100.0
    serial_fraction: float = 0.02
    graph_gain: float = 0.15
    graph_cap: int = 2
    oversub_exponent: float = 1.5

    def __post_init__(self) -> None:
        if self.cores < 1:
            raise ValueError("cores must be >= 1")
        if self.peak <= 0:
            raise ValueError("peak must be positive")
        if not 0 <= self.serial_fraction < 1:
            raise ValueError("serial_fraction must be in [0, 1)")
        if self.graph_gain < 0:
            raise ValueError("graph_gain must be >= 0")
        if self.graph_cap < 1:
            raise ValueError("graph_cap must be >= 1")
        if self.oversub_exponent < 0:
            raise ValueError("oversub_exponent must be >= 0")


def throughput(model: SyntheticModel, values: Sequence[int]) -> float:
    """Score for a 2- or 3-parameter point.

    values is (inter, intra) or (inter, intra, omp). The per-op worker
    count W is intra, or max(intra, omp) in the 3-parameter form; the
    total live thread count is inter*W. Scaling E(w) = w / (1 + beta*(w-1))
    is evaluated at min(W, cores); the graph-concurrency gain is
    1 + gain*(min(inter, cap) - 1); the oversubscription penalty is
    (cores/T)^delta once T exceeds the cores. Strictly positive everywhere.
    """
    if len(values) == 2:
        inter, workers = values[0], values[1]
    elif len(values) == 3:
        inter, workers = values[0], max(values[1], values[2])
    else:
        raise ValueError(f"synthetic model takes 2 or 3 parameters, got {len(values)}")
    if inter < 1 or workers < 1:
        raise ValueError("synthetic model parameters must be >= 1")

    total_threads = inter * workers
    beta = model.serial_fraction
    usable = min(workers, model.cores)
    scaling = usable / (1.0 + beta * (usable - 1))
    graph = 1.0 + model.graph_gain * (min(inter, model.graph_cap) - 1)
    if total_threads <= model.cores:
        penalty = 1.0
    else:
        penalty = (model.cores / total_threads) ** model.oversub_exponent
    return model.peak * graph * scaling * penalty


def oracle_optimum(model: SyntheticModel, space: SearchSpace) -> tuple[Point, float]:
    """Exact argmax of throughput by full enumeration; ties go to the
    first point in enumeration order."""
    if space.size() > ORACLE_ENUMERATION_GUARD:
        raise SpaceTooLarge(f"space has {space.size()} points; oracle guard is {ORACLE_ENUMERATION_GUARD}")
    best_point: Point | None = None
    best_score = 0.0
    for point in space.points():
        score = throughput(model, point)
        if best_point is None or score > best_score:
            best_point = point
            best_score = score
    assert best_point is not None
    return best_point, best_score


def make_score_source(model: SyntheticModel) -> ScoreSource:
    """Wrap a model as a score source. Duration is reported as 0 so runs
    are byte-for-byte reproducible."""

    def source(point: Point) -> Measurement:
        return Measurement(raw_score=throughput(model, point), status=EvalStatus.OK, duration_ms=0.0)

    return source


@dataclass(frozen=True)
class SyntheticPreset:
    name: str
    space: SearchSpace
    model: SyntheticModel


def _mkl3d_space() -> SearchSpace:
    return SearchSpace.of(
        ParamSpec("inter_op", 1, 4, 1),
        ParamSpec("intra_op", 14, 56, 7),
        ParamSpec("omp", 14, 56, 7),
    )


def _eigen2d_space() -> SearchSpace:
    return SearchSpace.of(
        ParamSpec("inter_op", 1, 4, 1),
        ParamSpec("intra_op", 14, 56, 7),
    )


PRESETS: dict[str, SyntheticPreset] = {
    "mkl3d": SyntheticPreset("mkl3d", _mkl3d_space(), SyntheticModel()),
    "eigen2d": SyntheticPreset("eigen2d", _eigen2d_space(), SyntheticModel()),
}


def get_preset(name: str) -> SyntheticPreset:
    """Look up a preset by bare name or by the CLI's `synthetic:NAME` form."""
    key = name.split(":", 1)[1] if name.startswith("synthetic:") else name
    try:
        return PRESETS[key]
    except KeyError:
        raise ValueError(f"unknown synthetic preset {key!r}; available: {', '.join(sorted(PRESETS))}") from None
