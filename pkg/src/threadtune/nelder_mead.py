"""Grid-constrained Nelder-Mead simplex minimizer.

The simplex lives in continuous coordinates so the classic reflect /
expand / contract / shrink geometry is preserved; only evaluation is
gated by the grid. Each candidate is snapped (nearest grid point, clamped
into bounds) before it is measured, and snapped points are memoized, so
late iterations that keep landing on the same few grid cells cost
nothing.

A deterministic integer objective needs more care than a noisy one. On
thread-count grids whole plateaus of cells score exactly the same (any
two configurations that saturate the same number of cores, say), and the
strict-improvement simplex loop contracts to a point inside such a
plateau after a handful of evaluations. Measurement noise would break
those ties; a deterministic source never does. The search therefore
wraps the plain simplex descent in three safeguards, all deterministic:

* recovery poll: when the simplex collapses or stalls, the incumbent's
  axis neighbors (one grid step each way) are probed in axis order and
  the search recenters on the first strict improvement;
* a second descent from a complementary start anchored at the low corner
  of the box, plus a sweep of the box corners, so a peak the first start
  cannot reach by single-axis moves is still visited;
* certification: the run only ends once the best point seen anywhere has
  itself survived a full poll of its axis neighbors.

Every recenter requires a strictly better score and scores take finitely
many values on the grid, so the whole procedure terminates; the
distinct-evaluation budget is enforced at every probe besides.

The step logic is written as generators that yield candidate points and
receive their evaluations, so the same code drives the in-process search,
the strategy protocol and the HTTP service. No randomness anywhere: two
runs over a deterministic score source produce identical traces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Generator, Iterator

from threadtune.errors import ConfigInvalid, DegenerateSpace, NoSuccessfulEvaluation
from threadtune.objective import (
    EvalCache,
    Evaluation,
    ScoreSource,
    best_evaluation,
    objective_sort_key,
)
from threadtune.space import Point, SearchSpace

REASON_COLLAPSED = "simplex_collapsed"
REASON_STALLED = "stalled"
REASON_BUDGET = "budget_exhausted"
REASON_FALLBACK = "degenerate_fallback"


@dataclass
class NMConfig:
    """Simplex coefficients and stopping rules.

    alpha/gamma/rho/sigma are the canonical reflection, expansion,
    contraction and shrink coefficients. The initial simplex sits at the
    midpoint of each range with one vertex displaced per axis by
    initial_radius_fraction of that range. stall_limit is the number of
    consecutive iterations allowed to produce zero new distinct points
    before the descent is declared stalled.
    """

    alpha: float = 1.0
    gamma: float = 2.0
    rho: float = 0.5
    sigma: float = 0.5
    initial_radius_fraction: float = 0.25
    max_distinct_evals: int | None = None  # None: bounded only by the space size
    stall_limit: int = 8

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.gamma <= 1:
            raise ValueError("gamma must be > 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0, 1)")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must be in (0, 1)")
        if not 0 < self.initial_radius_fraction <= 1:
            raise ValueError("initial_radius_fraction must be in (0, 1]")
        if self.stall_limit < 1:
            raise ValueError("stall_limit must be >= 1")
        if self.max_distinct_evals is not None and self.max_distinct_evals < 1:
            raise ValueError("max_distinct_evals must be >= 1")


@dataclass
class Vertex:
    """One simplex corner: continuous position, its grid projection, and
    the evaluation of that projection (None until measured)."""

    coords: tuple[float, ...]
    point: Point
    evaluation: Evaluation | None = None

    @property
    def objective(self) -> float:
        assert self.evaluation is not None
        return objective_sort_key(self.evaluation)


@dataclass
class Simplex:
    vertices: list[Vertex]

    def sort(self) -> None:
        # Stable: equal objectives keep their current order.
        self.vertices.sort(key=lambda v: v.objective)

    @property
    def best(self) -> Vertex:
        return self.vertices[0]

    @property
    def worst(self) -> Vertex:
        return self.vertices[-1]

    def collapsed(self) -> bool:
        first = self.vertices[0].point
        return all(v.point == first for v in self.vertices)


@dataclass
class History:
    """Running counters has_converged consults."""

    distinct: int = 0
    stall: int = 0
    budget: int = field(default=0)

    def note(self, ev: Evaluation) -> Evaluation:
        if not ev.from_cache:
            self.distinct += 1
        return ev


def _anchored_simplex(space: SearchSpace, config: NMConfig, anchor: list[float]) -> Simplex:
    # Vertex 0 at the anchor; vertex i displaces axis i-1 upward by
    # initial_radius_fraction of that axis's range, clamped into bounds.
    # A vertex that snaps onto an already-used grid point is walked along
    # its own axis one grid step at a time, upward first and wrapping to
    # a downward walk at the upper bound, until its snapped point is
    # distinct or the axis runs out of cells.
    coords: list[list[float]] = [list(anchor)]
    for axis, p in enumerate(space.params):
        c = list(anchor)
        c[axis] = min(c[axis] + config.initial_radius_fraction * (p.upper - p.lower), float(p.upper))
        coords.append(c)

    seen = {space.snap(coords[0])}
    vertices = [Vertex(tuple(coords[0]), space.snap(coords[0]))]
    for i in range(1, space.n + 1):
        axis = i - 1
        p = space.params[axis]
        snapped = space.snap(coords[i])
        if snapped in seen:
            k0 = (snapped[axis] - p.lower) // p.step
            for k in list(range(k0 + 1, p.grid_count)) + list(range(k0 - 1, -1, -1)):
                trial = list(snapped)
                trial[axis] = p.value_at(k)
                if tuple(trial) not in seen:
                    coords[i][axis] = float(p.value_at(k))
                    snapped = tuple(trial)
                    break
            # Axis exhausted without a free cell: the vertex stays put and
            # the simplex is flat along this axis.
        seen.add(snapped)
        vertices.append(Vertex(tuple(coords[i]), snapped))
    return Simplex(vertices)


def _require_room(space: SearchSpace) -> None:
    if space.size() < space.n + 1:
        raise DegenerateSpace(
            f"space has {space.size()} grid points, fewer than the {space.n + 1} a simplex needs"
        )


def initial_simplex(space: SearchSpace, config: NMConfig) -> Simplex:
    """Build the n+1 starting vertices; evaluations are filled by the caller.

    Vertex 0 is the midpoint of every range; vertex i displaces axis i-1
    upward by initial_radius_fraction of that range, resolving grid
    collisions by walking the vertex along its own axis.

    Raises DegenerateSpace when the grid has fewer than n+1 points, since
    no simplex of distinct snapped vertices can exist.
    """
    _require_room(space)
    return _anchored_simplex(space, config, [(p.lower + p.upper) / 2 for p in space.params])


def corner_simplex(space: SearchSpace, config: NMConfig) -> Simplex:
    """Complementary start anchored where every parameter is smallest.

    The midpoint start of initial_simplex only displaces vertices upward,
    which biases the first descent toward configurations with more
    threads. A score surface can hold a separate peak at few threads that
    no sequence of single-axis moves from the other basin improves
    through; descending once from the low corner reaches it. Same
    displacement and collision rules as initial_simplex.
    """
    _require_room(space)
    return _anchored_simplex(space, config, [float(p.lower) for p in space.params])


def _axis_neighbors(space: SearchSpace, point: Point) -> Iterator[Point]:
    # One grid step each way per axis, in axis order, + before -.
    for axis, p in enumerate(space.params):
        for sign in (1, -1):
            value = point[axis] + sign * p.step
            if p.lower <= value <= p.upper:
                moved = list(point)
                moved[axis] = value
                yield tuple(moved)


def _one_step_simplex(space: SearchSpace, center: Point) -> Simplex:
    # Smallest usable simplex around a grid point: the point itself plus
    # one vertex per axis a single grid step up (down when the point sits
    # at the axis top; in place when the axis has one cell).
    vertices = [Vertex(tuple(float(x) for x in center), center)]
    taken = {center}
    for axis, p in enumerate(space.params):
        value = center[axis] + p.step
        if value > p.upper:
            value = center[axis] - p.step
        moved = list(center)
        moved[axis] = value
        point = tuple(moved) if tuple(moved) not in taken and value >= p.lower else center
        taken.add(point)
        vertices.append(Vertex(tuple(float(x) for x in point), point))
    return Simplex(vertices)


def _box_corners(space: SearchSpace) -> Iterator[Point]:
    # Every combination of per-axis extremes, snapped onto the grid,
    # lexicographic order. 2^n points at most; fewer with one-cell axes.
    extremes = [
        (float(p.lower),) if p.lower == p.upper else (float(p.lower), float(p.upper))
        for p in space.params
    ]
    for corner in itertools.product(*extremes):
        yield space.snap(corner)


def has_converged(simplex: Simplex, history: History, config: NMConfig) -> tuple[bool, str | None]:
    """Stopping test applied at iteration boundaries.

    Collapse is checked first, then stall, then budget, so a simplex that
    both collapsed and exhausted its budget reports the stronger reason.
    """
    if simplex.collapsed():
        return True, REASON_COLLAPSED
    if history.stall >= config.stall_limit:
        return True, REASON_STALLED
    if history.distinct >= history.budget:
        return True, REASON_BUDGET
    return False, None


def iterate(
    simplex: Simplex, space: SearchSpace, config: NMConfig, history: History
) -> Generator[Point, Evaluation, Simplex]:
    """One standard Nelder-Mead step, exchanged as point -> evaluation.

    Reflects the worst vertex through the centroid of the rest; expands
    when the reflection beats the current best; contracts outside or
    inside when it does not improve enough; shrinks everything toward the
    best vertex when contraction fails too. Candidates are snapped before
    being yielded. Returns the re-sorted simplex.
    """
    n = len(simplex.vertices) - 1
    best, second_worst, worst = simplex.best, simplex.vertices[-2], simplex.worst
    centroid = tuple(sum(v.coords[d] for v in simplex.vertices[:-1]) / n for d in range(n))

    def make(factor: float) -> Vertex:
        coords = tuple(c + factor * (c - w) for c, w in zip(centroid, worst.coords))
        return Vertex(coords, space.snap(coords))

    refl = make(config.alpha)
    refl.evaluation = history.note((yield refl.point))

    if refl.objective < best.objective:
        exp = make(config.alpha * config.gamma)
        exp.evaluation = history.note((yield exp.point))
        simplex.vertices[-1] = exp if exp.objective < refl.objective else refl
    elif refl.objective < second_worst.objective:
        simplex.vertices[-1] = refl
    else:
        if refl.objective < worst.objective:
            con = make(config.rho)  # outside contraction
            con.evaluation = history.note((yield con.point))
            accepted = con.objective <= refl.objective
        else:
            con = make(-config.rho)  # inside contraction
            con.evaluation = history.note((yield con.point))
            accepted = con.objective < worst.objective
        if accepted:
            simplex.vertices[-1] = con
        else:
            for i in range(1, n + 1):
                shrunk = tuple(
                    b + config.sigma * (v - b)
                    for b, v in zip(best.coords, simplex.vertices[i].coords)
                )
                vertex = Vertex(shrunk, space.snap(shrunk))
                vertex.evaluation = history.note((yield vertex.point))
                simplex.vertices[i] = vertex

    simplex.sort()
    return simplex


def nm_search(space: SearchSpace, config: NMConfig | None = None) -> Generator[Point, Evaluation, str]:
    """Full Nelder-Mead run as one point/evaluation exchange.

    Yields each candidate; the caller must send back its Evaluation
    (normally via EvalCache.evaluate so revisits are hits). Returns the
    convergence reason.

    Stages, in order: simplex descent from the midpoint start; a sweep of
    the box corners; a second descent from the low-corner start; then
    recenter-and-descend around the best point seen until it survives a
    poll of all its axis neighbors. Each descent already polls on
    collapse or stall and recenters on the first strictly better
    neighbor, so the final loop usually has nothing left to do.
    """
    config = config or NMConfig()
    budget = config.max_distinct_evals if config.max_distinct_evals is not None else space.size()
    if budget < space.n + 1:
        raise ConfigInvalid(
            f"budget {budget} cannot evaluate an initial simplex of {space.n + 1} vertices"
        )
    history = History(budget=budget)
    seen: set[Point] = set()
    certified: set[Point] = set()
    incumbent: Evaluation | None = None

    def observe(ev: Evaluation) -> Evaluation:
        # Incumbent tracking must see every evaluation, wherever it was
        # requested; the certification loop is aimed at the incumbent, so
        # missing one here can aim it at a stale point forever.
        nonlocal incumbent
        seen.add(ev.point)
        if incumbent is None or objective_sort_key(ev) < objective_sort_key(incumbent):
            incumbent = ev
        return ev

    def note(ev: Evaluation) -> Evaluation:
        return history.note(observe(ev))

    def pump(sub: Generator[Point, Evaluation, Simplex]) -> Generator[Point, Evaluation, Simplex]:
        # Forward a sub-generator's exchange, observing evaluations in
        # transit. iterate does its own history bookkeeping, so evals must
        # not pass through note() a second time.
        try:
            point = next(sub)
        except StopIteration as stop:
            return stop.value
        while True:
            ev = observe((yield point))
            try:
                point = sub.send(ev)
            except StopIteration as stop:
                return stop.value

    def fill(simplex: Simplex) -> Generator[Point, Evaluation, Simplex]:
        for vertex in simplex.vertices:
            if vertex.evaluation is None:
                vertex.evaluation = note((yield vertex.point))
        simplex.sort()
        return simplex

    def descend(simplex: Simplex) -> Generator[Point, Evaluation, tuple[str, bool]]:
        # Plain simplex loop plus the recovery poll. Returns the reason
        # and whether the budget cut the descent short.
        simplex = yield from fill(simplex)
        while True:
            done, reason = has_converged(simplex, history, config)
            if done:
                assert reason is not None
                if reason == REASON_BUDGET:
                    return reason, True
                best_v = simplex.best
                recovered: Evaluation | None = None
                for candidate in _axis_neighbors(space, best_v.point):
                    if candidate in seen:
                        continue
                    if history.distinct >= budget:
                        return REASON_BUDGET, True
                    ev = note((yield candidate))
                    if objective_sort_key(ev) < best_v.objective:
                        recovered = ev
                        break
                if recovered is None:
                    # Nothing adjacent beats this point: a local optimum
                    # of the grid, at least one step in every direction.
                    certified.add(best_v.point)
                    return reason, False
                simplex = _one_step_simplex(space, recovered.point)
                simplex.vertices[0].evaluation = recovered
                simplex = yield from fill(simplex)
                history.stall = 0
            else:
                distinct_before = history.distinct
                simplex = yield from pump(iterate(simplex, space, config, history))
                history.stall = history.stall + 1 if history.distinct == distinct_before else 0

    reason, out_of_budget = yield from descend(initial_simplex(space, config))
    if out_of_budget:
        return reason

    for corner in _box_corners(space):
        if corner in seen:
            continue
        if history.distinct >= budget:
            return REASON_BUDGET
        note((yield corner))

    history.stall = 0
    reason, out_of_budget = yield from descend(corner_simplex(space, config))
    if out_of_budget:
        return reason

    # A corner probe or the other descent may hold the best score without
    # having been polled. Recenter there until the incumbent is certified.
    while incumbent is not None and incumbent.point not in certified:
        if history.distinct >= budget:
            return REASON_BUDGET
        history.stall = 0
        reason, out_of_budget = yield from descend(_one_step_simplex(space, incumbent.point))
        if out_of_budget:
            return reason
    return reason


@dataclass
class TuningResult:
    """Outcome of one strategy run: best ok evaluation, the ordered trace
    of every query (cache hits included), and why the run stopped."""

    best: Evaluation
    trace: list[Evaluation]
    reason: str
    cache: EvalCache = field(repr=False)

    @property
    def distinct_evaluations(self) -> int:
        return self.cache.miss_count


def run(
    space: SearchSpace,
    score_source: ScoreSource,
    config: NMConfig | None = None,
    cache: EvalCache | None = None,
) -> TuningResult:
    """Run Nelder-Mead to convergence and return the best point seen.

    The best is taken over the whole trace, not just the final simplex.
    Spaces too small to hold a simplex fall back to an exhaustive scan.
    Raises NoSuccessfulEvaluation if every measured point failed.
    """
    from threadtune.strategies import GeneratorStrategy, drive, exhaustive_gen

    config = config or NMConfig()
    cache = cache or EvalCache()
    budget = config.max_distinct_evals if config.max_distinct_evals is not None else space.size()

    if space.size() < space.n + 1:
        trace, _ = drive(GeneratorStrategy(exhaustive_gen(space)), cache, score_source, budget)
        reason = REASON_FALLBACK
    else:
        trace, reason = drive(GeneratorStrategy(nm_search(space, config)), cache, score_source, budget)

    best = best_evaluation(trace)
    if best is None:
        raise NoSuccessfulEvaluation("no point evaluated successfully")
    return TuningResult(best=best, trace=trace, reason=reason, cache=cache)
