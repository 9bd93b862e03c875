"""Merge parsed scheduler views into archived job records."""

from __future__ import annotations

from dataclasses import replace

from .adapter import JobDetail, JobSummary
from .grammar import format_duration
from .store import JobRecord


def summary_to_record(summary: JobSummary, existing: JobRecord | None, now_iso: str) -> JobRecord:
    """Fold a listing row into a record, creating one on first sight."""
    base = existing or JobRecord(job_id=summary.job_id, time_added=now_iso)
    return replace(
        base,
        job_name=summary.job_name,
        user=summary.user,
        status=summary.status,
        cores=summary.slots,
        parallel=1 if summary.slots > 1 else base.parallel,
        cluster_node=summary.queue_or_node or base.cluster_node,
    )


def detail_to_record(detail: JobDetail, existing: JobRecord | None, now_iso: str) -> JobRecord:
    """Fold a per-job detail stanza into a record."""
    base = existing or JobRecord(job_id=detail.job_id, time_added=now_iso)
    return replace(
        base,
        path=detail.script_path,
        command=detail.submit_command,
        source_directory=detail.source_directory,
        outpath=detail.output_path,
        memory_requested=detail.memory_requested,
        parallel=1 if detail.parallel else 0,
        cores=detail.cores,
        run_time=format_duration(detail.run_time),
        time_remaining=(
            format_duration(detail.time_remaining) if detail.time_remaining is not None else ""
        ),
        current_memory=detail.current_memory,
        maximum_memory=max(base.maximum_memory, detail.maximum_memory),
    )
