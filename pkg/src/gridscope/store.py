"""Persistent job archive backed by a single-file SQLite database.

The Job table carries one column per archived attribute; statuses are stored
as stable integer codes (see JobStatus values), durations as HH:MM:SS text,
and timestamps as ISO-8601 text. Tags used by analytics live in a side table
keyed by job id so the Job table stays fixed.
"""

from __future__ import annotations

import csv
import io
import sqlite3
import threading
from dataclasses import dataclass, field, fields as dataclass_fields, replace
from pathlib import Path

from .adapter import AccountingRecord, JobStatus
from .grammar import format_duration

SCHEMA_VERSION = 1

# Column order is the export order; tests introspect it.
JOB_COLUMNS = (
    "jobId",
    "jobName",
    "user",
    "status",
    "path",
    "command",
    "sourceDirectory",
    "outpath",
    "memoryRequested",
    "parallel",
    "cores",
    "timeAdded",
    "runTime",
    "timeRemaining",
    "currentMemory",
    "maximumMemory",
    "clusterNode",
    "finalRunTime",
    "finalStatus",
)

_CREATE_JOB = """
CREATE TABLE IF NOT EXISTS Job (
    jobId INTEGER PRIMARY KEY,
    jobName TEXT,
    user VARCHAR(30),
    status INTEGER,
    path TEXT,
    command TEXT,
    sourceDirectory TEXT,
    outpath TEXT,
    memoryRequested TEXT,
    parallel INTEGER,
    cores INTEGER,
    timeAdded VARCHAR(30),
    runTime TEXT,
    timeRemaining TEXT,
    currentMemory INTEGER,
    maximumMemory INTEGER,
    clusterNode TEXT,
    finalRunTime TEXT,
    finalStatus TEXT
)
"""

_CREATE_TAGS = """
CREATE TABLE IF NOT EXISTS JobTag (
    jobId INTEGER NOT NULL,
    tagKey TEXT NOT NULL,
    value TEXT NOT NULL,
    numeric REAL,
    PRIMARY KEY (jobId, tagKey)
)
"""


class StoreError(Exception):
    pass


class NotFound(StoreError):
    pass


class AlreadyFinal(StoreError):
    pass


class ConstraintViolation(StoreError):
    pass


@dataclass(frozen=True)
class JobRecord:
    job_id: int
    job_name: str = ""
    user: str = ""
    status: JobStatus = JobStatus.Unknown
    path: str = ""
    command: str = ""
    source_directory: str = ""
    outpath: str = ""
    memory_requested: str = ""
    parallel: int = 0
    cores: int = 1
    time_added: str = ""
    run_time: str = "00:00:00"
    time_remaining: str = ""
    current_memory: int = 0
    maximum_memory: int = 0
    cluster_node: str = ""
    final_run_time: str = ""
    final_status: str = ""

    @property
    def finalized(self) -> bool:
        return self.final_status != ""


_FIELD_ORDER = tuple(f.name for f in dataclass_fields(JobRecord))


@dataclass(frozen=True)
class HistoryQuery:
    user: str | None = None
    status_in: frozenset[JobStatus] | None = None
    tag_equals: dict[str, str] | None = None
    added_after: str | None = None
    added_before: str | None = None
    allow_all: bool = False

    def __post_init__(self):
        has_filter = any(
            value is not None
            for value in (
                self.user,
                self.status_in,
                self.tag_equals,
                self.added_after,
                self.added_before,
            )
        )
        if not has_filter and not self.allow_all:
            raise ConstraintViolation("query needs a filter or allow_all=True")


def _validate(record: JobRecord) -> None:
    if record.job_id <= 0:
        raise ConstraintViolation(f"jobId must be positive, got {record.job_id}")
    if record.parallel not in (0, 1):
        raise ConstraintViolation(f"parallel must be 0 or 1, got {record.parallel!r}")
    if record.cores < 1:
        raise ConstraintViolation(f"cores must be >= 1, got {record.cores}")
    if record.current_memory < 0 or record.maximum_memory < record.current_memory:
        raise ConstraintViolation(
            f"need maximumMemory >= currentMemory >= 0, got "
            f"{record.maximum_memory} < {record.current_memory}"
        )
    if len(record.user) > 30:
        raise ConstraintViolation("user exceeds 30 characters")


class JobStore:
    """Single-writer multi-reader archive; all access serialized on one lock."""

    def __init__(self, db_path: str | Path):
        self.db_path = str(db_path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock, self._conn:
            self._conn.execute(_CREATE_JOB)
            self._conn.execute(_CREATE_TAGS)
            version = self._conn.execute("PRAGMA user_version").fetchone()[0]
            if version == 0:
                self._conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION}")
            elif version != SCHEMA_VERSION:
                raise StoreError(f"unsupported schema version {version}")

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- mutations -----------------------------------------------------------

    def upsert_job(self, record: JobRecord) -> JobRecord:
        _validate(record)
        with self._lock, self._conn:
            existing = self._get_or_none(record.job_id)
            if existing is None:
                if record.final_status:
                    raise ConstraintViolation("new records cannot carry a finalStatus")
                self._conn.execute(
                    f"INSERT INTO Job ({', '.join(JOB_COLUMNS)}) "
                    f"VALUES ({', '.join('?' for _ in JOB_COLUMNS)})",
                    self._to_row(record),
                )
                return record
            if existing.finalized:
                raise AlreadyFinal(f"job {record.job_id} is finalized")
            merged = replace(
                record,
                time_added=existing.time_added,  # set exactly once
                maximum_memory=max(existing.maximum_memory, record.maximum_memory),
                final_run_time=existing.final_run_time,
                final_status=existing.final_status,
            )
            self._update(merged)
            return merged

    def finalize_job(self, job_id: int, acct: AccountingRecord) -> JobRecord:
        if not acct.final_status.terminal and acct.final_status is not JobStatus.Unknown:
            raise ConstraintViolation(f"{acct.final_status} is not a terminal status")
        with self._lock, self._conn:
            existing = self._get_or_none(job_id)
            if existing is None:
                raise NotFound(f"job {job_id} not in store")
            if existing.finalized:
                raise AlreadyFinal(f"job {job_id} is already finalized")
            final = replace(
                existing,
                status=acct.final_status,
                final_status=acct.final_status.name,
                final_run_time=format_duration(acct.final_run_time),
                maximum_memory=max(existing.maximum_memory, acct.maximum_memory),
                time_remaining="",
            )
            self._update(final)
            return final

    def set_tags(self, job_id: int, tags: dict[str, str | float]) -> None:
        with self._lock, self._conn:
            if self._get_or_none(job_id) is None:
                raise NotFound(f"job {job_id} not in store")
            for key, value in tags.items():
                numeric = float(value) if isinstance(value, (int, float)) else None
                self._conn.execute(
                    "INSERT OR REPLACE INTO JobTag (jobId, tagKey, value, numeric) "
                    "VALUES (?, ?, ?, ?)",
                    (job_id, key, str(value), numeric),
                )

    def purge(self) -> int:
        """Drop every archived job and tag; returns removed job count."""
        with self._lock, self._conn:
            count = self._conn.execute("SELECT COUNT(*) FROM Job").fetchone()[0]
            self._conn.execute("DELETE FROM Job")
            self._conn.execute("DELETE FROM JobTag")
            return count

    # -- queries -------------------------------------------------------------

    def get_job(self, job_id: int) -> JobRecord:
        with self._lock:
            record = self._get_or_none(job_id)
        if record is None:
            raise NotFound(f"job {job_id} not in store")
        return record

    def get_tags(self, job_id: int) -> dict[str, str | float]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT tagKey, value, numeric FROM JobTag WHERE jobId = ?", (job_id,)
            ).fetchall()
        return {r["tagKey"]: (r["numeric"] if r["numeric"] is not None else r["value"]) for r in rows}

    def list_jobs(self, query: HistoryQuery) -> list[JobRecord]:
        clauses: list[str] = []
        params: list = []
        if query.user is not None:
            clauses.append("user = ?")
            params.append(query.user)
        if query.status_in is not None:
            marks = ", ".join("?" for _ in query.status_in)
            clauses.append(f"status IN ({marks})")
            params.extend(sorted(s.value for s in query.status_in))
        if query.added_after is not None:
            clauses.append("timeAdded >= ?")
            params.append(query.added_after)
        if query.added_before is not None:
            clauses.append("timeAdded <= ?")
            params.append(query.added_before)
        if query.tag_equals:
            for key, value in sorted(query.tag_equals.items()):
                clauses.append(
                    "jobId IN (SELECT jobId FROM JobTag WHERE tagKey = ? AND value = ?)"
                )
                params.extend([key, str(value)])
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        sql = f"SELECT * FROM Job {where} ORDER BY timeAdded DESC, jobId DESC"
        with self._lock:
            rows = self._conn.execute(sql, params).fetchall()
        return [self._from_row(row) for row in rows]

    def non_terminal_ids(self) -> list[int]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT jobId FROM Job WHERE finalStatus = '' ORDER BY jobId"
            ).fetchall()
        return [row["jobId"] for row in rows]

    def export_csv(self, out) -> int:
        """Write the whole Job table as CSV in column order; returns row count."""
        writer = csv.writer(out)
        writer.writerow(JOB_COLUMNS)
        count = 0
        for record in self.list_jobs(HistoryQuery(allow_all=True)):
            writer.writerow(self._to_row(record))
            count += 1
        return count

    def export_csv_text(self) -> str:
        buffer = io.StringIO()
        self.export_csv(buffer)
        return buffer.getvalue()

    def schema_columns(self) -> list[str]:
        """Column names as the database itself reports them, in order."""
        with self._lock:
            rows = self._conn.execute("PRAGMA table_info(Job)").fetchall()
        return [row["name"] for row in rows]

    # -- plumbing ------------------------------------------------------------

    def _get_or_none(self, job_id: int) -> JobRecord | None:
        row = self._conn.execute("SELECT * FROM Job WHERE jobId = ?", (job_id,)).fetchone()
        return None if row is None else self._from_row(row)

    def _update(self, record: JobRecord) -> None:
        assignments = ", ".join(f"{col} = ?" for col in JOB_COLUMNS[1:])
        self._conn.execute(
            f"UPDATE Job SET {assignments} WHERE jobId = ?",
            (*self._to_row(record)[1:], record.job_id),
        )

    @staticmethod
    def _to_row(record: JobRecord) -> tuple:
        return (
            record.job_id,
            record.job_name,
            record.user,
            record.status.value,
            record.path,
            record.command,
            record.source_directory,
            record.outpath,
            record.memory_requested,
            record.parallel,
            record.cores,
            record.time_added,
            record.run_time,
            record.time_remaining,
            record.current_memory,
            record.maximum_memory,
            record.cluster_node,
            record.final_run_time,
            record.final_status,
        )

    @staticmethod
    def _from_row(row: sqlite3.Row) -> JobRecord:
        return JobRecord(
            job_id=row["jobId"],
            job_name=row["jobName"],
            user=row["user"],
            status=JobStatus(row["status"]),
            path=row["path"],
            command=row["command"],
            source_directory=row["sourceDirectory"],
            outpath=row["outpath"],
            memory_requested=row["memoryRequested"],
            parallel=row["parallel"],
            cores=row["cores"],
            time_added=row["timeAdded"],
            run_time=row["runTime"],
            time_remaining=row["timeRemaining"],
            current_memory=row["currentMemory"],
            maximum_memory=row["maximumMemory"],
            cluster_node=row["clusterNode"],
            final_run_time=row["finalRunTime"],
            final_status=row["finalStatus"],
        )
