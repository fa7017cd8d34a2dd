"""Request and response bodies for the tuning service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from threadtune.runner import DEFAULT_SCORE_PATTERN


class CommandSpec(BaseModel):
    """Benchmark command to run at each point."""

    argv: list[str] = Field(min_length=1)
    base_env: dict[str, str] = Field(default_factory=dict)
    export_params_as_env: bool = True
    score_pattern: str = DEFAULT_SCORE_PATTERN
    timeout_s: float | None = Field(default=None, gt=0)
    repeats: int = Field(default=1, ge=1)
    aggregation: Literal["median", "mean", "max"] = "median"


class SessionRequest(BaseModel):
    """One tuning session to enqueue.

    params uses the `name=lower:upper:step` text form; when omitted, the
    preset's own space applies. Exactly one of command / preset must be
    given, mirroring the CLI.
    """

    params: list[str] | None = None
    preset: str | None = None
    strategy: Literal["nm", "exhaustive", "random"]
    strategy_config: dict[str, float] = Field(default_factory=dict)
    command: CommandSpec | None = None
    max_distinct_evals: int | None = Field(default=None, ge=1)
    seed: int = 0


class SessionStatus(BaseModel):
    id: str
    state: Literal["pending", "running", "done", "failed", "cancelled"]
    evaluations_done: int = 0
    distinct_points_evaluated: int = 0
    best_point: list[int] | None = None
    best_raw_score: float | None = None
    convergence_reason: str | None = None
    error: str | None = None
    error_kind: str | None = None


class PresetInfo(BaseModel):
    name: str
    params: list[str]
    size: int


class ValidateRequest(BaseModel):
    params: list[str] = Field(min_length=1)


class ValidateResponse(BaseModel):
    ok: bool
    size: int | None = None
    params: list[str] | None = None  # normalized text form
    error: str | None = None


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str
