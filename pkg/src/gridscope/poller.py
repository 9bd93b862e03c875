"""Background synchronization between the live cluster and the job archive.

Each tick runs the two-phase update: one listing query, then one detail
query per active job (capped per tick, round-robin across ticks so every job
gets its turn). Jobs that vanish from the listing are reconciled through the
accounting command, which is the only source of terminal status and final
runtime. Every command goes through the gateway's limiter under a reserved
system principal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import store as store_mod
from .adapter import AccountingRecord, AdapterError, CommandKind, JobStatus, NotFinished
from .connection import TransportError
from .gateway import SYSTEM_PRINCIPAL, RequestGateway, Throttled
from .grammar import parse_duration
from .store import HistoryQuery, JobStore
from .sync import detail_to_record, summary_to_record


@dataclass
class PollConfig:
    interval_seconds: float = 30.0
    detail_batch_limit: int = 10
    retry_bound: int = 5
    enabled: bool = True

    def __post_init__(self):
        if self.interval_seconds < 1:
            raise ValueError("interval_seconds must be >= 1")
        if self.detail_batch_limit < 1:
            raise ValueError("detail_batch_limit must be >= 1")


@dataclass
class PollReport:
    listed_jobs: int = 0
    detail_queries_issued: int = 0
    new_jobs: int = 0
    finalized_jobs: int = 0
    errors: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "listedJobs": self.listed_jobs,
            "detailQueriesIssued": self.detail_queries_issued,
            "newJobs": self.new_jobs,
            "finalizedJobs": self.finalized_jobs,
            "errors": list(self.errors),
        }


class StatusPoller:
    """One poller loop per cluster profile; ticks never overlap."""

    def __init__(
        self,
        gateway: RequestGateway,
        store: JobStore,
        config: PollConfig | None = None,
        principal: str = SYSTEM_PRINCIPAL,
    ):
        self.gateway = gateway
        self.adapter = gateway.adapter
        self.store = store
        self.config = config or PollConfig()
        self.principal = principal
        self.last_report: PollReport | None = None
        self._detail_queue: deque[int] = deque()
        self._accounting_retries: dict[int, int] = {}

    # -- public operations -----------------------------------------------

    def tick(self, now: float) -> PollReport:
        report = PollReport()
        summaries = self._list(CommandKind.List, {}, now, report)
        if summaries is None:
            self.last_report = report
            return report
        report.listed_jobs = len(summaries)
        listed_ids = self._upsert_summaries(summaries, now, report)

        self._detail_queue = deque(jid for jid in self._detail_queue if jid in listed_ids)
        queued = set(self._detail_queue)
        for summary in summaries:
            if summary.job_id not in queued:
                self._detail_queue.append(summary.job_id)
        take = min(self.config.detail_batch_limit, len(self._detail_queue))
        for _ in range(take):
            job_id = self._detail_queue.popleft()
            self._query_detail(job_id, now, report)
            self._detail_queue.append(job_id)

        gone = [jid for jid in self.store.non_terminal_ids() if jid not in listed_ids]
        self.reconcile_disappeared(gone, now, report)
        self.last_report = report
        return report

    def refresh_user(self, user: str, now: float) -> PollReport:
        """Ad-hoc update that inspects only one user's jobs."""
        if not user:
            raise ValueError("user must be nonempty")
        report = PollReport()
        summaries = self._list(CommandKind.ListForUser, {"user": user}, now, report)
        if summaries is None:
            return report
        summaries = [s for s in summaries if s.user == user]
        report.listed_jobs = len(summaries)
        listed_ids = self._upsert_summaries(summaries, now, report)

        for summary in summaries[: self.config.detail_batch_limit]:
            self._query_detail(summary.job_id, now, report)

        gone = [
            record.job_id
            for record in self.store.list_jobs(HistoryQuery(user=user))
            if not record.finalized and record.job_id not in listed_ids
        ]
        self.reconcile_disappeared(gone, now, report)
        return report

    def reconcile_disappeared(self, job_ids: list[int], now: float, report: PollReport | None = None) -> int:
        """Finalize jobs that left the listing; returns the finalized count.

        Accounting that is not ready yet (scheduler lag) defers the job to
        the next tick; after retry_bound misses the job is closed out with
        an Unknown terminal status rather than polled forever.
        """
        report = report if report is not None else PollReport()
        finalized = 0
        for job_id in job_ids:
            try:
                acct = self._fetch_accounting(job_id, now)
            except Throttled:
                continue  # budget exhausted; next tick retries, no penalty
            except (TransportError, _AccountingPending) as exc:
                misses = self._accounting_retries.get(job_id, 0) + 1
                self._accounting_retries[job_id] = misses
                if misses <= self.config.retry_bound:
                    continue
                acct = self._unknown_accounting(job_id)
                report.errors.append(
                    f"job {job_id}: accounting unavailable after {misses - 1} retries ({exc})"
                )
            except AdapterError as exc:
                report.errors.append(f"job {job_id}: accounting parse failed: {exc}")
                continue
            try:
                self.store.finalize_job(job_id, acct)
                finalized += 1
            except store_mod.AlreadyFinal:
                finalized += 1  # a previous run got there first; that is success
            except store_mod.StoreError as exc:
                report.errors.append(f"job {job_id}: finalize failed: {exc}")
                continue
            self._accounting_retries.pop(job_id, None)
            self.gateway.pending_cancellations.discard(job_id)
        report.finalized_jobs += finalized
        return finalized

    # -- phases ------------------------------------------------------------

    def _list(self, kind: CommandKind, params: dict, now: float, report: PollReport):
        try:
            command = self.adapter.render_command(kind, params)
            result = self.gateway.throttled_execute(self.principal, command, now)
            if result.exit_code != 0:
                raise TransportError(result.stderr.strip() or "listing failed")
            return self.adapter.parse_job_list(result.stdout)
        except (AdapterError, TransportError, Throttled) as exc:
            report.errors.append(f"listing failed: {exc}")
            return None

    def _upsert_summaries(self, summaries, now: float, report: PollReport) -> set[int]:
        now_iso = datetime.fromtimestamp(now, tz=timezone.utc).isoformat()
        listed: set[int] = set()
        for summary in summaries:
            listed.add(summary.job_id)
            try:
                existing = self._existing(summary.job_id)
                if existing is not None and existing.finalized:
                    continue
                if existing is None:
                    report.new_jobs += 1
                self.store.upsert_job(summary_to_record(summary, existing, now_iso))
            except store_mod.StoreError as exc:
                report.errors.append(f"job {summary.job_id}: store update failed: {exc}")
        return listed

    def _query_detail(self, job_id: int, now: float, report: PollReport) -> None:
        try:
            command = self.adapter.render_command(CommandKind.Detail, {"job_id": job_id})
            result = self.gateway.throttled_execute(self.principal, command, now)
            report.detail_queries_issued += 1
            if result.exit_code != 0:
                raise TransportError(result.stderr.strip() or "detail query failed")
            detail = self.adapter.parse_job_detail(result.stdout)
        except (AdapterError, TransportError, Throttled) as exc:
            report.errors.append(f"job {job_id}: detail failed: {exc}")
            return
        self.gateway.note_job_paths(
            job_id, detail.script_path, detail.output_path, detail.error_path
        )
        try:
            existing = self._existing(job_id)
            if existing is not None and existing.finalized:
                return
            now_iso = datetime.fromtimestamp(now, tz=timezone.utc).isoformat()
            self.store.upsert_job(detail_to_record(detail, existing, now_iso))
        except store_mod.StoreError as exc:
            report.errors.append(f"job {job_id}: store update failed: {exc}")

    def _fetch_accounting(self, job_id: int, now: float) -> AccountingRecord:
        command = self.adapter.render_command(CommandKind.Accounting, {"job_id": job_id})
        result = self.gateway.throttled_execute(self.principal, command, now)
        if result.exit_code != 0:
            raise _AccountingPending(result.stderr.strip() or "accounting not available")
        try:
            return self.adapter.parse_accounting(result.stdout)
        except NotFinished as exc:
            raise _AccountingPending(str(exc)) from exc

    def _unknown_accounting(self, job_id: int) -> AccountingRecord:
        run_time = 0
        record = self._existing(job_id)
        if record is not None and record.run_time:
            try:
                run_time = parse_duration(record.run_time)
            except ValueError:
                pass
        return AccountingRecord(
            job_id=job_id,
            final_status=JobStatus.Unknown,
            final_run_time=run_time,
            maximum_memory=0,
            exit_code=-1,
        )

    def _existing(self, job_id: int):
        try:
            return self.store.get_job(job_id)
        except store_mod.NotFound:
            return None


class _AccountingPending(Exception):
    """Accounting data for a finished job has not landed yet."""
