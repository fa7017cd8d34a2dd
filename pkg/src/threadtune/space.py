"""Bounded, stepped integer parameter spaces and the geometry on them.

A space is an ordered list of parameters, each with a lower bound, upper
bound and step. The legal values of a parameter form the arithmetic
progression lower, lower+step, ... up to the largest value <= upper; the
space is the cross product of those grids. Everything downstream (search
strategies, caching, reports) works on points of this grid.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

from threadtune.errors import BadBounds, BadStep, DuplicateName, EmptySpace, SpaceError

# One complete assignment, one value per parameter in declared order.
Point = tuple[int, ...]

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_PARAM_SPEC_RE = re.compile(r"^(?P<name>[^=]+)=(?P<lower>-?\d+):(?P<upper>-?\d+)(?::(?P<step>\d+))?$")


@dataclass(frozen=True)
class ParamSpec:
    """One tunable integer parameter.

    The grid stops at the largest value <= upper; upper itself is off the
    grid when (upper - lower) is not a multiple of step.
    """

    name: str
    lower: int
    upper: int
    step: int = 1

    def __post_init__(self) -> None:
        if not self.name or not _NAME_RE.match(self.name):
            raise SpaceError(f"parameter name {self.name!r} is not an identifier", param=self.name)
        if self.step <= 0:
            raise BadStep(f"parameter {self.name!r}: step must be >= 1, got {self.step}", param=self.name)
        if self.lower > self.upper:
            raise BadBounds(
                f"parameter {self.name!r}: lower {self.lower} > upper {self.upper}", param=self.name
            )

    @property
    def grid_count(self) -> int:
        """Number of legal values: k_max + 1."""
        return (self.upper - self.lower) // self.step + 1

    def grid_values(self) -> list[int]:
        """All legal values, ascending."""
        return [self.lower + k * self.step for k in range(self.grid_count)]

    def value_at(self, k: int) -> int:
        if not 0 <= k < self.grid_count:
            raise IndexError(f"grid index {k} out of range for {self.name}")
        return self.lower + k * self.step

    def is_grid_value(self, value: int) -> bool:
        return self.lower <= value <= self.upper and (value - self.lower) % self.step == 0

    def snap_value(self, raw: float) -> int:
        """Nearest grid value; exact halves round toward the lower value.

        Clamps out-of-range input to the nearest end of the grid, so the
        result is always legal.
        """
        q = (raw - self.lower) / self.step
        k = math.ceil(q - 0.5)  # round half down
        k = max(0, min(k, self.grid_count - 1))
        return self.lower + k * self.step

    def spec_text(self) -> str:
        return f"{self.name}={self.lower}:{self.upper}:{self.step}"


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of ParamSpecs defining the full grid."""

    params: tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.params) == 0:
            raise EmptySpace("search space has no parameters")
        seen: set[str] = set()
        for p in self.params:
            if p.name in seen:
                raise DuplicateName(f"duplicate parameter name {p.name!r}", param=p.name)
            seen.add(p.name)

    @classmethod
    def of(cls, *params: ParamSpec) -> SearchSpace:
        return cls(params=tuple(params))

    @property
    def n(self) -> int:
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def size(self) -> int:
        total = 1
        for p in self.params:
            total *= p.grid_count
        return total

    def snap(self, raw: Sequence[float]) -> Point:
        """Project a continuous candidate onto the nearest legal point."""
        if len(raw) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(raw)}")
        return tuple(p.snap_value(x) for p, x in zip(self.params, raw))

    def contains(self, point: Sequence[int]) -> bool:
        if len(point) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(point)}")
        return all(p.is_grid_value(v) for p, v in zip(self.params, point))

    def points(self) -> Iterator[Point]:
        """Every legal point exactly once, lexicographic in parameter order."""
        def rec(prefix: tuple[int, ...], rest: tuple[ParamSpec, ...]) -> Iterator[Point]:
            if not rest:
                yield prefix
                return
            for v in rest[0].grid_values():
                yield from rec(prefix + (v,), rest[1:])

        return rec((), self.params)

    def point_at(self, index: int) -> Point:
        """Decode a flat enumeration index (mixed radix, last axis fastest)."""
        if not 0 <= index < self.size():
            raise IndexError(f"point index {index} out of range")
        digits: list[int] = []
        for p in reversed(self.params):
            index, k = divmod(index, p.grid_count)
            digits.append(p.value_at(k))
        return tuple(reversed(digits))

    def random_point(self, rng: random.Random) -> Point:
        """Uniform draw over the grid; deterministic for a given rng state."""
        return tuple(p.value_at(rng.randrange(p.grid_count)) for p in self.params)

    def to_dict(self) -> list[str]:
        return [p.spec_text() for p in self.params]


def canonical_key(point: Sequence[int]) -> str:
    """Injective textual key for a point: values joined by commas."""
    return ",".join(str(v) for v in point)


def parse_param_spec(text: str) -> ParamSpec:
    """Parse the `name=lower:upper:step` syntax (step defaults to 1)."""
    m = _PARAM_SPEC_RE.match(text.strip())
    if not m:
        raise SpaceError(f"cannot parse parameter spec {text!r}; expected name=lower:upper:step")
    step = m.group("step")
    return ParamSpec(
        name=m.group("name").strip(),
        lower=int(m.group("lower")),
        upper=int(m.group("upper")),
        step=int(step) if step is not None else 1,
    )


def parse_space(texts: Sequence[str]) -> SearchSpace:
    return SearchSpace(params=tuple(parse_param_spec(t) for t in texts))
