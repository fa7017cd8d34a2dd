"""HTTP service: routes, job lifecycle, and the thin client."""

from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

import threadtune
from conftest import python_stub, scrub_wall_times
from threadtune.errors import ConfigInvalid, NoSuccessfulEvaluation
from threadtune.service.app import create_app
from threadtune.service.client import request_from_config, run_remote_session
from threadtune.service.jobs import Job, SessionManager
from threadtune.session import SessionConfig, report_from_dict, report_to_json, run_session
from threadtune.strategies import StrategyHandle
from threadtune.synthetic import PRESETS


@pytest.fixture
def manager():
    return SessionManager()


@pytest.fixture
def client(manager):
    app = create_app(manager)
    with TestClient(app) as c:
        yield c


def _wait_terminal(client, job_id, deadline_s=30.0):
    start = time.monotonic()
    status = None
    while time.monotonic() - start < deadline_s:
        status = client.get(f"/sessions/{job_id}").json()
        if status["state"] in ("done", "failed", "cancelled"):
            return status
        time.sleep(0.01)
    raise AssertionError(f"session {job_id} never finished: {status}")


def _nm_config():
    return SessionConfig(
        space=PRESETS["mkl3d"].space,
        strategy=StrategyHandle.of("nm"),
        synthetic="mkl3d",
    )


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": threadtune.__version__}


def test_presets_listing(client):
    body = client.get("/presets").json()
    assert [p["name"] for p in body] == ["eigen2d", "mkl3d"]
    sizes = {p["name"]: p["size"] for p in body}
    assert sizes == {"eigen2d": 28, "mkl3d": 196}
    assert "inter_op=1:4:1" in body[1]["params"]


def test_validate_space_endpoint(client):
    good = client.post("/spaces/validate", json={"params": ["x=1:4", "y=10:30:10"]}).json()
    assert good["ok"] is True
    assert good["size"] == 12
    assert good["params"] == ["x=1:4:1", "y=10:30:10"]

    bad = client.post("/spaces/validate", json={"params": ["x=4:1"]}).json()
    assert bad["ok"] is False
    assert bad["error"]


def test_submit_validation_failures(client):
    # neither preset nor params+command
    resp = client.post("/sessions", json={"strategy": "nm"})
    assert resp.status_code == 422

    resp = client.post("/sessions", json={"strategy": "warp", "preset": "mkl3d"})
    assert resp.status_code == 422  # pydantic rejects the strategy literal

    resp = client.post("/sessions", json={"strategy": "nm", "preset": "nope"})
    assert resp.status_code == 422
    assert "nope" in resp.json()["detail"]


def test_session_lifecycle(client):
    resp = client.post("/sessions", json={"strategy": "nm", "preset": "mkl3d"})
    assert resp.status_code == 202
    job_id = resp.json()["id"]
    assert resp.json()["state"] in ("pending", "running", "done")

    status = _wait_terminal(client, job_id)
    assert status["state"] == "done"
    assert status["best_raw_score"] == pytest.approx(2666.6666666666665)
    assert 0 < status["distinct_points_evaluated"] <= 48
    assert status["evaluations_done"] >= status["distinct_points_evaluated"]
    assert status["convergence_reason"]

    listed = client.get("/sessions").json()
    assert job_id in [s["id"] for s in listed]

    report = report_from_dict(client.get(f"/sessions/{job_id}/report").json())
    local = run_session(_nm_config())
    assert scrub_wall_times(report_to_json(report)) == scrub_wall_times(report_to_json(local))


def test_budget_is_plumbed_through(client):
    resp = client.post(
        "/sessions", json={"strategy": "random", "preset": "eigen2d", "max_distinct_evals": 6, "seed": 2}
    )
    status = _wait_terminal(client, resp.json()["id"])
    assert status["state"] == "done"
    assert status["distinct_points_evaluated"] == 6


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.get("/sessions/nope/report").status_code == 404
    assert client.post("/sessions/nope/cancel").status_code == 404


def test_report_before_completion_409(client, manager):
    job = Job(id="fake0409", config=_nm_config())
    manager._jobs[job.id] = job  # parked in pending, no thread

    assert client.get("/sessions/fake0409").status_code == 200
    resp = client.get("/sessions/fake0409/report")
    assert resp.status_code == 409
    assert "not available" in resp.json()["detail"]

    cancel = client.post("/sessions/fake0409/cancel")
    assert cancel.status_code == 200
    assert job.cancel.is_set()


def test_failed_command_session_reports_kind(client):
    body = {
        "strategy": "exhaustive",
        "params": ["x=1:2"],
        "command": {"argv": python_stub("import sys; sys.exit(1)")},
    }
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 202
    status = _wait_terminal(client, resp.json()["id"])
    assert status["state"] == "failed"
    assert status["error_kind"] == "no_success"
    assert status["error"]


def test_cancel_slow_session(client):
    code = "import time, sys; time.sleep(0.5); print('score: 5')"
    body = {
        "strategy": "exhaustive",
        "params": ["x=1:4"],
        "command": {"argv": python_stub(code), "timeout_s": 30.0},
    }
    job_id = client.post("/sessions", json=body).json()["id"]
    client.post(f"/sessions/{job_id}/cancel")
    status = _wait_terminal(client, job_id)
    assert status["state"] == "cancelled"


def test_remote_session_matches_local(client):
    config = _nm_config()
    remote = run_remote_session("http://testserver", config, client=client, poll_interval_s=0.01)
    local = run_session(config)
    assert remote.best_point == local.best_point
    assert remote.best_raw_score == local.best_raw_score
    assert scrub_wall_times(report_to_json(remote)) == scrub_wall_times(report_to_json(local))


def test_remote_session_rejects_bad_config(client):
    config = SessionConfig(
        space=PRESETS["mkl3d"].space,
        strategy=StrategyHandle.of("nm"),
        synthetic="mkl3d",
    )
    body = request_from_config(config)
    assert body["preset"] == "mkl3d"
    assert body["strategy"] == "nm"

    broken = SessionConfig(
        space=PRESETS["mkl3d"].space,
        strategy=StrategyHandle.of("nm"),
        synthetic="mkl3d",
        max_distinct_evals=0,
    )
    with pytest.raises(ConfigInvalid):
        run_remote_session("http://testserver", broken, client=client, poll_interval_s=0.01)


def test_remote_failure_raises_like_local(client):
    # a command config whose every run fails
    from threadtune.runner import CommandTemplate
    from threadtune.space import ParamSpec, SearchSpace

    failing = SessionConfig(
        space=SearchSpace.of(ParamSpec("x", 1, 2, 1)),
        strategy=StrategyHandle.of("exhaustive"),
        command=CommandTemplate(argv=tuple(python_stub("import sys; sys.exit(1)"))),
    )
    with pytest.raises(NoSuccessfulEvaluation):
        run_remote_session("http://testserver", failing, client=client, poll_interval_s=0.01)


def test_concurrent_sessions_all_finish(client):
    ids = [
        client.post("/sessions", json={"strategy": "nm", "preset": "eigen2d"}).json()["id"]
        for _ in range(3)
    ]
    for job_id in ids:
        status = _wait_terminal(client, job_id)
        assert status["state"] == "done"
        assert client.get(f"/sessions/{job_id}/report").status_code == 200
