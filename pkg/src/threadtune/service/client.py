"""Thin client: run a session on a remote tuning service.

Used by the CLI's --server mode. The client submits the config, polls
until the session reaches a terminal state, and reconstructs the same
SessionReport object an in-process run would have produced. Exceptions
mirror the in-process ones so the CLI's exit-code mapping is shared.
"""

from __future__ import annotations

import time

import httpx

from threadtune.errors import ConfigInvalid, NoSuccessfulEvaluation, TuneError
from threadtune.session import SessionConfig, SessionReport, report_from_dict


def request_from_config(config: SessionConfig) -> dict:
    """Wire form of a session config (matches the service's SessionRequest)."""
    body: dict = {
        "params": config.space.to_dict(),
        "strategy": config.strategy.name,
        "strategy_config": config.strategy.config_dict(),
        "max_distinct_evals": config.max_distinct_evals,
        "seed": config.seed,
    }
    if config.synthetic is not None:
        body["preset"] = config.synthetic
    if config.command is not None:
        c = config.command
        body["command"] = {
            "argv": list(c.argv),
            "base_env": dict(c.base_env),
            "export_params_as_env": c.export_params_as_env,
            "score_pattern": c.score_pattern,
            "timeout_s": c.timeout_s,
            "repeats": c.repeats,
            "aggregation": c.aggregation,
        }
    return body


def _raise_for_failure(status: dict) -> None:
    kind = status.get("error_kind")
    message = status.get("error") or "session failed"
    if kind == "config":
        raise ConfigInvalid(message)
    if kind == "no_success":
        raise NoSuccessfulEvaluation(message)
    if kind == "io":
        raise OSError(message)
    raise TuneError(message)


def run_remote_session(
    base_url: str,
    config: SessionConfig,
    client: httpx.Client | None = None,
    poll_interval_s: float = 0.2,
) -> SessionReport:
    """Submit, poll to completion, fetch the report.

    A preconfigured client (any transport) can be injected; otherwise one
    is opened against base_url.
    """
    own_client = client is None
    if client is None:
        client = httpx.Client(base_url=base_url, timeout=30.0)
    try:
        resp = client.post("/sessions", json=request_from_config(config))
        if resp.status_code == 422:
            detail = resp.json().get("detail", "invalid session config")
            raise ConfigInvalid(str(detail))
        resp.raise_for_status()
        job_id = resp.json()["id"]

        while True:
            status = client.get(f"/sessions/{job_id}").json()
            if status["state"] in ("done", "failed", "cancelled"):
                break
            time.sleep(poll_interval_s)

        if status["state"] == "failed":
            _raise_for_failure(status)
        report_resp = client.get(f"/sessions/{job_id}/report")
        if report_resp.status_code == 409:
            # Cancelled before anything finished; surface it like a failure.
            raise NoSuccessfulEvaluation(status.get("error") or "session cancelled before any result")
        report_resp.raise_for_status()
        return report_from_dict(report_resp.json())
    finally:
        if own_client:
            client.close()
