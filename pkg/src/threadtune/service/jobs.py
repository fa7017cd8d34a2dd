"""Background execution of tuning sessions.

Each submitted session gets a daemon thread; all threads share one
measurement lock, so at most one session is measuring at any moment.
That lock is what makes it safe to point several clients at one box:
benchmark processes never overlap, which would corrupt every score
involved. Cancellation is cooperative, checked before each evaluation.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field

from threadtune.errors import (
    ConfigInvalid,
    NoSuccessfulEvaluation,
    SpawnFailure,
    TuneError,
    UnknownPlaceholder,
)
from threadtune.objective import Evaluation
from threadtune.session import SessionConfig, SessionReport, run_session
from threadtune.space import Point

logger = logging.getLogger(__name__)

TERMINAL_STATES = ("done", "failed", "cancelled")


@dataclass
class Job:
    id: str
    config: SessionConfig
    state: str = "pending"
    evaluations_done: int = 0
    distinct_points_evaluated: int = 0
    best_point: Point | None = None
    best_raw_score: float | None = None
    convergence_reason: str | None = None
    error: str | None = None
    error_kind: str | None = None
    report: SessionReport | None = None
    cancel: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = field(default=None, repr=False)

    @property
    def finished(self) -> bool:
        return self.state in TERMINAL_STATES


class SessionManager:
    """Owns the job table and the global measurement lock."""

    def __init__(self) -> None:
        self._jobs: dict[str, Job] = {}
        self._table_lock = threading.Lock()
        self._measure_lock = threading.Lock()

    def submit(self, config: SessionConfig) -> Job:
        config.validate()  # reject before a thread is spent on it
        job = Job(id=uuid.uuid4().hex[:12], config=config)
        with self._table_lock:
            self._jobs[job.id] = job
        thread = threading.Thread(target=self._run, args=(job,), daemon=True, name=f"tune-{job.id}")
        job.thread = thread
        thread.start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._table_lock:
            return self._jobs.get(job_id)

    def list(self) -> list[Job]:
        with self._table_lock:
            return list(self._jobs.values())

    def request_cancel(self, job_id: str) -> Job | None:
        job = self.get(job_id)
        if job is not None:
            job.cancel.set()
        return job

    def _note(self, job: Job, ev: Evaluation) -> None:
        job.evaluations_done += 1
        if not ev.from_cache:
            job.distinct_points_evaluated += 1
        if ev.ok and ev.raw_score is not None:
            if job.best_raw_score is None or ev.raw_score > job.best_raw_score:
                job.best_raw_score = ev.raw_score
                job.best_point = ev.point

    def _run(self, job: Job) -> None:
        with self._measure_lock:
            if job.cancel.is_set():
                job.state = "cancelled"
                return
            job.state = "running"
            try:
                report = run_session(
                    job.config,
                    on_evaluation=lambda ev: self._note(job, ev),
                    should_stop=job.cancel.is_set,
                )
                job.report = report
                job.convergence_reason = report.convergence_reason
                job.state = "cancelled" if job.cancel.is_set() else "done"
            except (ConfigInvalid, SpawnFailure, UnknownPlaceholder) as exc:
                self._fail(job, "config", exc)
            except NoSuccessfulEvaluation as exc:
                if job.cancel.is_set():
                    job.state = "cancelled"
                    job.error = str(exc)
                else:
                    self._fail(job, "no_success", exc)
            except OSError as exc:
                self._fail(job, "io", exc)
            except (TuneError, Exception) as exc:  # noqa: BLE001 - thread must not die silently
                logger.exception("session %s crashed", job.id)
                self._fail(job, "internal", exc)

    @staticmethod
    def _fail(job: Job, kind: str, exc: Exception) -> None:
        job.state = "failed"
        job.error_kind = kind
        job.error = str(exc)
