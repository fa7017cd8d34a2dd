"""HTTP routes for the tuning service."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from threadtune import __version__
from threadtune.errors import ConfigInvalid, SpaceError
from threadtune.runner import CommandTemplate
from threadtune.service.jobs import Job, SessionManager
from threadtune.service.schemas import (
    CommandSpec,
    HealthResponse,
    PresetInfo,
    SessionRequest,
    SessionStatus,
    ValidateRequest,
    ValidateResponse,
)
from threadtune.session import SessionConfig, report_to_dict
from threadtune.space import parse_space
from threadtune.strategies import StrategyHandle
from threadtune.synthetic import PRESETS, get_preset


def _template_from_spec(spec: CommandSpec) -> CommandTemplate:
    return CommandTemplate(
        argv=tuple(spec.argv),
        base_env=tuple(sorted(spec.base_env.items())),
        export_params_as_env=spec.export_params_as_env,
        score_pattern=spec.score_pattern,
        timeout_s=spec.timeout_s,
        repeats=spec.repeats,
        aggregation=spec.aggregation,
    )


def config_from_request(req: SessionRequest) -> SessionConfig:
    """Translate the wire form into a session config; raises ConfigInvalid."""
    synthetic = None
    if req.preset is not None:
        try:
            synthetic = get_preset(req.preset).name
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
    if req.params:
        try:
            space = parse_space(req.params)
        except SpaceError as exc:
            raise ConfigInvalid(str(exc)) from exc
    elif synthetic is not None:
        space = get_preset(synthetic).space
    else:
        raise ConfigInvalid("params are required when tuning a command")
    command = _template_from_spec(req.command) if req.command is not None else None
    try:
        config = SessionConfig(
            space=space,
            strategy=StrategyHandle.of(req.strategy, **req.strategy_config),
            command=command,
            synthetic=synthetic,
            max_distinct_evals=req.max_distinct_evals,
            seed=req.seed,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    config.validate()
    return config


def _status(job: Job) -> SessionStatus:
    return SessionStatus(
        id=job.id,
        state=job.state,  # type: ignore[arg-type]
        evaluations_done=job.evaluations_done,
        distinct_points_evaluated=job.distinct_points_evaluated,
        best_point=list(job.best_point) if job.best_point is not None else None,
        best_raw_score=job.best_raw_score,
        convergence_reason=job.convergence_reason,
        error=job.error,
        error_kind=job.error_kind,
    )


def create_app(manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="threadtune service", version=__version__)
    mgr = manager if manager is not None else SessionManager()
    app.state.manager = mgr

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.get("/presets", response_model=list[PresetInfo])
    def presets() -> list[PresetInfo]:
        return [
            PresetInfo(name=p.name, params=p.space.to_dict(), size=p.space.size())
            for _, p in sorted(PRESETS.items())
        ]

    @app.post("/spaces/validate", response_model=ValidateResponse)
    def validate_space(req: ValidateRequest) -> ValidateResponse:
        try:
            space = parse_space(req.params)
        except SpaceError as exc:
            return ValidateResponse(ok=False, error=str(exc))
        return ValidateResponse(ok=True, size=space.size(), params=space.to_dict())

    @app.post("/sessions", response_model=SessionStatus, status_code=202)
    def submit(req: SessionRequest) -> SessionStatus:
        try:
            config = config_from_request(req)
        except ConfigInvalid as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _status(mgr.submit(config))

    @app.get("/sessions", response_model=list[SessionStatus])
    def list_sessions() -> list[SessionStatus]:
        return [_status(j) for j in mgr.list()]

    @app.get("/sessions/{job_id}", response_model=SessionStatus)
    def get_session(job_id: str) -> SessionStatus:
        job = mgr.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no session {job_id!r}")
        return _status(job)

    @app.get("/sessions/{job_id}/report")
    def get_report(job_id: str) -> dict:
        job = mgr.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no session {job_id!r}")
        if job.report is None:
            raise HTTPException(
                status_code=409, detail=f"session {job_id!r} is {job.state}, report not available"
            )
        return report_to_dict(job.report)

    @app.post("/sessions/{job_id}/cancel", response_model=SessionStatus)
    def cancel(job_id: str) -> SessionStatus:
        job = mgr.request_cancel(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no session {job_id!r}")
        return _status(job)

    return app
