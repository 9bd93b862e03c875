"""Single choke-point between callers and the cluster.

Every job request — interactive or from the background poller — is admitted
through a per-principal sliding-window rate limiter with exponential
backoff, optionally served from a TTL cache of recent successful responses,
and only then dispatched to the adapter and transport.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import threading
from collections import deque
from copy import deepcopy
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from . import store as store_mod
from .adapter import (
    AdapterError,
    CommandKind,
    InvalidParams,
    SchedulerAdapter,
    SubmitSpec,
    validate_submit_spec,
)
from .connection import ConnectionManager, TransportError
from .store import HistoryQuery, JobRecord, JobStore
from .sync import detail_to_record, summary_to_record

SYSTEM_PRINCIPAL = "@system"


class RequestKind(Enum):
    Status = "status"
    StatusDetail = "status_detail"
    Cancel = "cancel"
    Submit = "submit"
    Output = "output"
    Refresh = "refresh"


CACHEABLE_KINDS = frozenset({RequestKind.Status, RequestKind.StatusDetail, RequestKind.Output})


class Verdict(Enum):
    Admit = "admit"
    ServeFromCache = "cache"
    Reject = "reject"


class DispatchError(Exception):
    """A dispatch failed at a labeled stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.stage_message = message


class Throttled(Exception):
    def __init__(self, retry_after: float):
        super().__init__(f"throttled, retry after {retry_after:.3f}s")
        self.retry_after = retry_after


@dataclass(frozen=True)
class JobRequest:
    principal: str
    kind: RequestKind
    params: dict
    issued_at: float

    def __post_init__(self):
        if not self.principal:
            raise InvalidParams("principal must be nonempty")
        if self.kind in (RequestKind.StatusDetail, RequestKind.Cancel, RequestKind.Output):
            if not isinstance(self.params.get("job_id"), int):
                raise InvalidParams(f"{self.kind.value} requires a job_id")
        if self.kind is RequestKind.Submit and not isinstance(
            self.params.get("spec"), SubmitSpec
        ):
            raise InvalidParams("submit requires a SubmitSpec")


@dataclass
class ThrottleState:
    principal: str
    window_times: deque = field(default_factory=deque)
    consecutive_violations: int = 0
    blocked_until: float | None = None
    last_seen: float | None = None

    @property
    def count_in_window(self) -> int:
        return len(self.window_times)


@dataclass(frozen=True)
class CacheEntry:
    key: tuple[str, str, str]
    value: object
    stored_at: float
    ttl: float


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    entry: CacheEntry | None = None
    retry_after: float = 0.0


@dataclass
class GatewayConfig:
    threshold: int = 10
    window_seconds: float = 10.0
    backoff_base_seconds: float = 1.0
    backoff_cap_seconds: float = 64.0
    cache_ttl_seconds: float = 60.0
    system_threshold: int = 100
    error_scan_lines: int = 200


def cache_key(principal: str, kind: RequestKind, params: dict) -> tuple[str, str, str]:
    canonical = json.dumps(
        {k: repr(v) for k, v in params.items()}, sort_keys=True, separators=(",", ":")
    )
    return (principal, kind.value, hashlib.sha256(canonical.encode()).hexdigest())


class RequestGateway:
    """Admission control, caching, and dispatch for one cluster profile."""

    def __init__(
        self,
        adapter: SchedulerAdapter,
        connection: ConnectionManager,
        store: JobStore,
        config: GatewayConfig | None = None,
        clock=None,
    ):
        self.adapter = adapter
        self.connection = connection
        self.store = store
        self.config = config or GatewayConfig()
        self.clock = clock or (lambda: datetime.now(tz=timezone.utc).timestamp())
        self.poller = None  # wired after construction; needed for Refresh only
        self.pending_cancellations: set[int] = set()
        self.job_paths: dict[int, dict[str, str]] = {}
        self.metrics: dict[str, dict[str, int]] = {}
        self._throttle: dict[str, ThrottleState] = {}
        self._cache: dict[tuple[str, str, str], CacheEntry] = {}
        self._lock = threading.Lock()

    # -- admission -----------------------------------------------------------

    def admit(self, request: JobRequest, now: float) -> Decision:
        """Total decision function: Admit, ServeFromCache, or Reject."""
        with self._lock:
            if self._window_admit(request.principal, now):
                self._count(request.principal, "admits")
                return Decision(Verdict.Admit)

            if request.kind in CACHEABLE_KINDS:
                entry = self._cache_lookup_locked(
                    cache_key(request.principal, request.kind, request.params), now
                )
                if entry is not None:
                    self._count(request.principal, "cache_serves")
                    return Decision(Verdict.ServeFromCache, entry=entry)

            backoff = self._record_violation(request.principal, now)
            self._count(request.principal, "rejects")
            return Decision(Verdict.Reject, retry_after=backoff)

    def _window_admit(self, principal: str, now: float) -> bool:
        """Slide the window and admit if within budget. Callers hold the lock."""
        state = self._throttle.setdefault(principal, ThrottleState(principal))
        threshold = (
            self.config.system_threshold
            if principal == SYSTEM_PRINCIPAL
            else self.config.threshold
        )
        # One full window with zero requests clears violations and block.
        if state.last_seen is not None and now - state.last_seen >= self.config.window_seconds:
            state.consecutive_violations = 0
            state.blocked_until = None
        state.last_seen = now
        while state.window_times and state.window_times[0] <= now - self.config.window_seconds:
            state.window_times.popleft()
        blocked = state.blocked_until is not None and now < state.blocked_until
        if blocked or state.count_in_window >= threshold:
            return False
        state.window_times.append(now)
        return True

    def _record_violation(self, principal: str, now: float) -> float:
        state = self._throttle[principal]
        state.consecutive_violations += 1
        backoff = min(
            self.config.backoff_base_seconds * 2 ** (state.consecutive_violations - 1),
            self.config.backoff_cap_seconds,
        )
        state.blocked_until = now + backoff
        return backoff

    def throttle_state(self, principal: str) -> ThrottleState | None:
        return self._throttle.get(principal)

    def _count(self, principal: str, counter: str) -> None:
        self.metrics.setdefault(principal, {"admits": 0, "cache_serves": 0, "rejects": 0})
        self.metrics[principal][counter] += 1

    # -- cache ---------------------------------------------------------------

    def cache_lookup(self, key: tuple[str, str, str], now: float) -> CacheEntry | None:
        with self._lock:
            return self._cache_lookup_locked(key, now)

    def _cache_lookup_locked(self, key: tuple[str, str, str], now: float) -> CacheEntry | None:
        entry = self._cache.get(key)
        if entry is None or now - entry.stored_at > entry.ttl:
            return None
        return entry

    def _cache_store(self, request: JobRequest, value: object, now: float) -> None:
        if request.kind not in CACHEABLE_KINDS:
            return
        key = cache_key(request.principal, request.kind, request.params)
        with self._lock:
            self._cache[key] = CacheEntry(
                key=key,
                value=deepcopy(value),
                stored_at=now,
                ttl=self.config.cache_ttl_seconds,
            )

    # -- combined entry point ------------------------------------------------

    def handle(self, request: JobRequest) -> tuple[object, bool, float | None]:
        """admit + dispatch; returns (payload, served_from_cache, cached_at)."""
        now = self.clock()
        decision = self.admit(request, now)
        if decision.verdict is Verdict.Reject:
            raise Throttled(decision.retry_after)
        if decision.verdict is Verdict.ServeFromCache:
            assert decision.entry is not None
            return deepcopy(decision.entry.value), True, decision.entry.stored_at
        payload = self.dispatch(request)
        self._cache_store(request, payload, now)
        return payload, False, None

    # -- poller path ---------------------------------------------------------

    def throttled_execute(self, principal: str, command: list[str], now: float, user=None):
        """Rate-limited raw command execution (used by the background poller).

        Never consults the cache: polling exists to fetch fresh state.
        """
        with self._lock:
            if not self._window_admit(principal, now):
                backoff = self._record_violation(principal, now)
                self._count(principal, "rejects")
                raise Throttled(backoff)
            self._count(principal, "admits")
        return self.connection.execute(command, user=user)

    def note_job_paths(self, job_id: int, script: str, stdout: str, stderr: str) -> None:
        self.job_paths[job_id] = {"script": script, "stdout": stdout, "stderr": stderr}

    # -- dispatch ------------------------------------------------------------

    def dispatch(self, request: JobRequest) -> object:
        handler = {
            RequestKind.Status: self._dispatch_status,
            RequestKind.StatusDetail: self._dispatch_detail,
            RequestKind.Cancel: self._dispatch_cancel,
            RequestKind.Submit: self._dispatch_submit,
            RequestKind.Output: self._dispatch_output,
            RequestKind.Refresh: self._dispatch_refresh,
        }[request.kind]
        return handler(request)

    def _render(self, kind: CommandKind, params: dict) -> list[str]:
        try:
            return self.adapter.render_command(kind, params)
        except AdapterError as exc:
            raise DispatchError("Render", str(exc)) from exc

    def _execute(self, command: list[str], user: str | None = None):
        try:
            result = self.connection.execute(command, user=user)
        except TransportError as exc:
            raise DispatchError("Transport", str(exc)) from exc
        if result.exit_code != 0:
            raise DispatchError(
                "Transport", result.stderr.strip() or f"{command[0]} failed"
            )
        return result

    def _now_iso(self) -> str:
        return datetime.fromtimestamp(self.clock(), tz=timezone.utc).isoformat()

    def _dispatch_status(self, request: JobRequest) -> dict:
        user = request.params.get("user")
        if user:
            command = self._render(CommandKind.ListForUser, {"user": user})
        else:
            command = self._render(CommandKind.List, {})
        result = self._execute(command)
        try:
            summaries = self.adapter.parse_job_list(result.stdout)
        except AdapterError as exc:
            raise DispatchError("Parse", str(exc)) from exc
        now_iso = self._now_iso()
        try:
            for summary in summaries:
                existing = self._existing(summary.job_id)
                if existing is not None and existing.finalized:
                    continue
                self.store.upsert_job(summary_to_record(summary, existing, now_iso))
        except store_mod.StoreError as exc:
            raise DispatchError("Store", str(exc)) from exc
        return {
            "jobs": [
                {
                    "jobId": s.job_id,
                    "jobName": s.job_name,
                    "user": s.user,
                    "status": s.status.name,
                    "startedOrSubmittedAt": s.started_or_submitted_at.isoformat(),
                    "queueOrNode": s.queue_or_node,
                    "slots": s.slots,
                }
                for s in summaries
            ]
        }

    def _dispatch_detail(self, request: JobRequest) -> dict:
        job_id = request.params["job_id"]
        command = self._render(CommandKind.Detail, {"job_id": job_id})
        result = self._execute(command)
        try:
            detail = self.adapter.parse_job_detail(result.stdout)
        except AdapterError as exc:
            raise DispatchError("Parse", str(exc)) from exc
        self.note_job_paths(job_id, detail.script_path, detail.output_path, detail.error_path)
        now_iso = self._now_iso()
        try:
            existing = self._existing(job_id)
            if existing is None or not existing.finalized:
                self.store.upsert_job(detail_to_record(detail, existing, now_iso))
        except store_mod.StoreError as exc:
            raise DispatchError("Store", str(exc)) from exc
        record = self.store.get_job(job_id)
        return {"record": record_to_json(record), "detail": detail_to_json(detail)}

    def _dispatch_cancel(self, request: JobRequest) -> dict:
        job_id = request.params["job_id"]
        command = self._render(CommandKind.Cancel, {"job_id": job_id})
        self._execute(command)
        self.pending_cancellations.add(job_id)
        return {"jobId": job_id, "cancelled": True}

    def _dispatch_submit(self, request: JobRequest) -> dict:
        spec: SubmitSpec = request.params["spec"]
        try:
            validate_submit_spec(spec)
        except InvalidParams as exc:
            raise DispatchError("Render", str(exc)) from exc
        command = self._render(CommandKind.Submit, {"spec": spec})
        result = self._execute(command, user=request.principal)
        try:
            job_id = self.adapter.parse_submit_ack(result.stdout)
        except AdapterError as exc:
            raise DispatchError("Parse", str(exc)) from exc
        record = JobRecord(
            job_id=job_id,
            job_name=spec.job_name,
            user=request.principal,
            status=store_mod.JobStatus.Queued,
            path=spec.script_path,
            command=shlex.join(command),
            source_directory=spec.source_directory,
            outpath=spec.output_path,
            memory_requested=spec.memory_requested,
            parallel=1 if spec.parallel else 0,
            cores=spec.cores,
            time_added=self._now_iso(),
        )
        try:
            stored = self.store.upsert_job(record)
        except store_mod.StoreError as exc:
            raise DispatchError("Store", str(exc)) from exc
        return {"jobId": job_id, "record": record_to_json(stored)}

    def _dispatch_output(self, request: JobRequest) -> dict:
        job_id = request.params["job_id"]
        what = request.params.get("what", "tail")
        lines = int(request.params.get("lines", 10))
        try:
            record = self.store.get_job(job_id)
        except store_mod.NotFound as exc:
            raise DispatchError("Store", str(exc)) from exc
        paths = self.job_paths.get(job_id, {})
        script = record.path or paths.get("script", "")
        stdout_path = record.outpath or paths.get("stdout", "")
        stderr_path = paths.get("stderr", "")

        if what == "script":
            if not script:
                raise DispatchError("Store", f"no script path known for job {job_id}")
            return {"content": self._read(script)}
        if what == "tail":
            if not stdout_path:
                raise DispatchError("Store", f"no output path known for job {job_id}")
            return {"lines": self._tail([stdout_path], lines)[stdout_path]}
        if what == "errors":
            if not stderr_path:
                raise DispatchError("Store", f"no error-log path known for job {job_id}")
            scan = self._tail([stderr_path], self.config.error_scan_lines)[stderr_path]
            return {"lines": scan}
        if what == "tail_errors":
            if not stdout_path:
                raise DispatchError("Store", f"no output path known for job {job_id}")
            fetch = [stdout_path] + ([stderr_path] if stderr_path else [])
            blocks = self._tail(fetch, max(lines, self.config.error_scan_lines))
            return {
                "lines": blocks[stdout_path][-lines:],
                "errorLines": blocks.get(stderr_path, []),
            }
        raise DispatchError("Render", f"unknown output request {what!r}")

    def _dispatch_refresh(self, request: JobRequest) -> dict:
        if self.poller is None:
            raise DispatchError("Store", "no poller attached")
        user = request.params.get("user") or request.principal
        report = self.poller.refresh_user(user, self.clock())
        return report.to_json()

    def _read(self, path: str) -> str:
        try:
            result = self.connection.execute(["cat", path])
        except TransportError as exc:
            raise DispatchError("Transport", str(exc)) from exc
        if result.exit_code != 0:
            raise DispatchError("Transport", result.stderr.strip())
        return result.stdout

    def _tail(self, paths: list[str], n: int) -> dict[str, list[str]]:
        """One remote tail over all paths; returns lines per path.

        Missing files come back as empty lists (a queued job has no output
        yet); GNU tail's headed format is produced for single files too so
        the split is uniform.
        """
        command = ["tail", "-n", str(n), "-v"] + paths
        try:
            result = self.connection.execute(command)
        except TransportError as exc:
            raise DispatchError("Transport", str(exc)) from exc
        blocks: dict[str, list[str]] = {path: [] for path in paths}
        current: list[str] | None = None
        for line in result.stdout.splitlines():
            matched = False
            if line.startswith("==> ") and line.endswith(" <=="):
                name = line[4:-4]
                if name in blocks:
                    # blank separator line belongs to the format, not the file
                    if current and current[-1] == "":
                        current.pop()
                    current = blocks[name]
                    matched = True
            if not matched and current is not None:
                current.append(line)
        return blocks

    def _existing(self, job_id: int) -> JobRecord | None:
        try:
            return self.store.get_job(job_id)
        except store_mod.NotFound:
            return None

    def diagnostics(self) -> dict:
        return {
            "metrics": deepcopy(self.metrics),
            "pendingCancellations": sorted(self.pending_cancellations),
            "cacheEntries": len(self._cache),
        }


def record_to_json(record: JobRecord) -> dict:
    """Serialize a record with its archive attribute names."""
    return {
        "jobId": record.job_id,
        "jobName": record.job_name,
        "user": record.user,
        "status": record.status.name,
        "path": record.path,
        "command": record.command,
        "sourceDirectory": record.source_directory,
        "outpath": record.outpath,
        "memoryRequested": record.memory_requested,
        "parallel": record.parallel,
        "cores": record.cores,
        "timeAdded": record.time_added,
        "runTime": record.run_time,
        "timeRemaining": record.time_remaining,
        "currentMemory": record.current_memory,
        "maximumMemory": record.maximum_memory,
        "clusterNode": record.cluster_node,
        "finalRunTime": record.final_run_time,
        "finalStatus": record.final_status,
    }


def detail_to_json(detail) -> dict:
    return {
        "jobId": detail.job_id,
        "scriptPath": detail.script_path,
        "sourceDirectory": detail.source_directory,
        "submitCommand": detail.submit_command,
        "outputPath": detail.output_path,
        "errorPath": detail.error_path,
        "memoryRequested": detail.memory_requested,
        "parallel": detail.parallel,
        "cores": detail.cores,
        "cpuTimeUsed": detail.cpu_time_used,
        "currentMemory": detail.current_memory,
        "maximumMemory": detail.maximum_memory,
        "runTime": detail.run_time,
        "timeRemaining": detail.time_remaining,
    }
