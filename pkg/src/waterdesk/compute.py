"""Backend-abstracted job queue and executor.

Backends are named slots with bounded concurrency; the local kind runs
job bodies in-process on worker threads, the external-stub kind does the
same but simulates submission latency. Scheduling is event-driven on
submit and completion: highest priority first, FIFO within a priority,
placed on the hinted backend or the one with the most free slots
(ties by name).
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime

from .canonical import canonical_timestamp
from .coretypes import new_id, utcnow
from .errors import (
    DuplicateBackend,
    JobAlreadyFinished,
    UnknownBackend,
    UnknownJob,
    ValidationFailed,
)

log = logging.getLogger("waterdesk.compute")


@dataclass(frozen=True)
class Backend:
    name: str
    capacity: int
    kind: str = "local"  # local | external-stub
    stub_latency_s: float = 0.05

    def __post_init__(self):
        if self.capacity < 1:
            raise ValidationFailed("backend capacity must be >= 1")
        if self.kind not in ("local", "external-stub"):
            raise ValidationFailed(f"unknown backend kind {self.kind!r}")


@dataclass
class JobSpec:
    algo_id: str
    inputs: tuple  # pins: ("dataset", dataset_id, version) | ("working_set", ws_id)
    params: dict
    submitted_by: str
    backend_hint: str | None = None
    priority: int = 0

    def __post_init__(self):
        if self.priority < 0:
            raise ValidationFailed("priority must be >= 0")

    def to_json(self):
        pins = []
        for pin in self.inputs:
            if pin[0] == "dataset":
                pins.append({"kind": "dataset", "dataset_id": pin[1], "version": pin[2]})
            else:
                pins.append({"kind": "working_set", "ws_id": pin[1]})
        return {
            "algo_id": self.algo_id,
            "inputs": pins,
            "params": self.params,
            "submitted_by": self.submitted_by,
            "backend_hint": self.backend_hint,
            "priority": self.priority,
        }


@dataclass
class JobRecord:
    spec: JobSpec
    state: str = "queued"
    backend: str | None = None
    queued_at: datetime = field(default_factory=utcnow)
    started_at: datetime | None = None
    ended_at: datetime | None = None
    outputs: list = field(default_factory=list)
    error: str | None = None
    job_id: str = field(default_factory=lambda: new_id("job"))

    def to_json(self):
        return {
            "job_id": self.job_id,
            "spec": self.spec.to_json(),
            "state": self.state,
            "backend": self.backend,
            "queued_at": canonical_timestamp(self.queued_at),
            "started_at": canonical_timestamp(self.started_at) if self.started_at else None,
            "ended_at": canonical_timestamp(self.ended_at) if self.ended_at else None,
            "outputs": [o.to_json() for o in self.outputs],
            "error": self.error,
        }


class JobCancelled(Exception):
    """Raised inside a job body when its cancel flag is set."""


class JobContext:
    def __init__(self, spec: JobSpec, cancel_event: threading.Event):
        self.spec = spec
        self.params = spec.params
        self._cancel_event = cancel_event

    def cancelled(self) -> bool:
        return self._cancel_event.is_set()

    def check_cancelled(self):
        if self.cancelled():
            raise JobCancelled()


class Scheduler:
    """Single logical coordinator; job bodies run on worker threads up to
    per-backend capacity.

    ``body(job, ctx)`` performs the work and returns output entity refs;
    it must call ``ctx.check_cancelled()`` between steps. ``on_finished``
    fires after a terminal transition (for provenance/event hooks).
    """

    def __init__(self, body, on_finished=None):
        self._body = body
        self._on_finished = on_finished
        self._lock = threading.RLock()
        self._backends: dict[str, Backend] = {}
        self._running: dict[str, int] = {}
        self.max_observed: dict[str, int] = {}
        self._queue: list[tuple[int, int, JobRecord]] = []  # (-priority, seq, job)
        self._seq = 0
        self._jobs: dict[str, JobRecord] = {}
        self._cancel_events: dict[str, threading.Event] = {}
        self._done = threading.Condition(self._lock)

    # -- backends -------------------------------------------------------

    def register_backend(self, backend: Backend):
        with self._lock:
            if backend.name in self._backends:
                raise DuplicateBackend(f"backend {backend.name!r} already registered")
            self._backends[backend.name] = backend
            self._running[backend.name] = 0
            self.max_observed[backend.name] = 0

    def backends(self):
        with self._lock:
            return sorted(self._backends.values(), key=lambda b: b.name)

    # -- submission -----------------------------------------------------

    def submit(self, spec: JobSpec) -> JobRecord:
        job = JobRecord(spec=spec)
        with self._lock:
            if not self._backends:
                raise UnknownBackend("no backends registered")
            if spec.backend_hint is not None and spec.backend_hint not in self._backends:
                raise UnknownBackend(f"no backend {spec.backend_hint!r}")
            self._jobs[job.job_id] = job
            self._cancel_events[job.job_id] = threading.Event()
            self._queue.append((-spec.priority, self._seq, job))
            self._seq += 1
            log.info("%s queued %s queued", canonical_timestamp(job.queued_at), job.job_id)
        self._tick()
        return job

    def job(self, job_id: str) -> JobRecord:
        with self._lock:
            try:
                return self._jobs[job_id]
            except KeyError:
                raise UnknownJob(f"no job {job_id}")

    def jobs(self):
        with self._lock:
            return list(self._jobs.values())

    def cancel(self, job_id: str) -> JobRecord:
        with self._lock:
            job = self.job(job_id)
            if job.state == "queued":
                self._queue = [q for q in self._queue if q[2].job_id != job_id]
                job.state = "cancelled"
                job.ended_at = utcnow()
                log.info("%s info %s cancelled", canonical_timestamp(job.ended_at), job_id)
                finished = True
            elif job.state == "running":
                self._cancel_events[job_id].set()
                finished = False
            else:
                raise JobAlreadyFinished(f"job {job_id} is {job.state}")
        if finished:
            if self._on_finished:
                self._on_finished(job)
            # waiters are only released once the finish hook has run
            with self._lock:
                self._done.notify_all()
        return job

    # -- scheduling -----------------------------------------------------

    def _free_backend(self, hint: str | None) -> Backend | None:
        candidates = []
        for b in self._backends.values():
            free = b.capacity - self._running[b.name]
            if free > 0:
                candidates.append((free, b))
        if hint is not None:
            for free, b in candidates:
                if b.name == hint:
                    return b
            return None
        if not candidates:
            return None
        # most free slots wins; ties broken by name
        candidates.sort(key=lambda fb: (-fb[0], fb[1].name))
        return candidates[0][1]

    def _tick(self):
        to_start = []
        with self._lock:
            self._queue.sort(key=lambda q: (q[0], q[1]))
            remaining = []
            for item in self._queue:
                job = item[2]
                backend = self._free_backend(job.spec.backend_hint)
                if backend is None:
                    remaining.append(item)
                    continue
                job.state = "running"
                job.backend = backend.name
                job.started_at = utcnow()
                self._running[backend.name] += 1
                self.max_observed[backend.name] = max(
                    self.max_observed[backend.name], self._running[backend.name]
                )
                to_start.append((job, backend))
            self._queue = remaining
        for job, backend in to_start:
            log.info("%s info %s running", canonical_timestamp(job.started_at), job.job_id)
            t = threading.Thread(target=self._run, args=(job, backend), daemon=True)
            t.start()

    def _run(self, job: JobRecord, backend: Backend):
        ctx = JobContext(job.spec, self._cancel_events[job.job_id])
        try:
            if backend.kind == "external-stub":
                time.sleep(backend.stub_latency_s)  # simulated submission latency
            ctx.check_cancelled()
            outputs = self._body(job, ctx)
            ctx.check_cancelled()
            state, error = "succeeded", None
        except JobCancelled:
            outputs, state, error = [], "cancelled", None
        except Exception as exc:  # noqa: BLE001 - job bodies are user code
            outputs, state, error = [], "failed", f"{type(exc).__name__}: {exc}"
        with self._lock:
            # a cancel that lands after the body committed is too late:
            # outputs are visible only on succeeded, so keep that state
            job.state = state
            job.outputs = list(outputs)
            job.error = error
            job.ended_at = utcnow()
            self._running[backend.name] -= 1
            log.info("%s info %s %s", canonical_timestamp(job.ended_at), job.job_id, state)
        if self._on_finished:
            self._on_finished(job)
        # waiters are only released once the finish hook has run
        with self._lock:
            self._done.notify_all()
        self._tick()

    def wait(self, job_id: str, timeout: float = 30.0) -> JobRecord:
        deadline = time.monotonic() + timeout
        with self._lock:
            while True:
                job = self.job(job_id)
                if job.state in ("succeeded", "failed", "cancelled"):
                    return job
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TimeoutError(f"job {job_id} still {job.state} after {timeout}s")
                self._done.wait(left)

    def wait_all(self, timeout: float = 60.0):
        for job in self.jobs():
            self.wait(job.job_id, timeout)
