"""Scheduler adapter: abstract job requests in, typed records out.

The SGE-style adapter shipped here renders argv command lines and parses the
plain-text output defined in :mod:`gridscope.grammar`. Other scheduler
families plug in by subclassing :class:`SchedulerAdapter`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from . import grammar


class AdapterError(Exception):
    pass


class UnsupportedKind(AdapterError):
    """The adapter cannot render this command kind."""


class InvalidParams(AdapterError):
    """Request parameters violate the command's preconditions."""


class ParseError(AdapterError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnitError(AdapterError):
    """A memory token carried an unrecognized suffix."""


class NotFinished(AdapterError):
    """Accounting record exists but the job has not finished."""


class JobStatus(Enum):
    Unknown = 0
    Queued = 1
    Running = 2
    Suspended = 3
    Error = 4
    Deleted = 5
    Completed = 6

    @property
    def terminal(self) -> bool:
        return self in (JobStatus.Completed, JobStatus.Error, JobStatus.Deleted)


class CommandKind(Enum):
    List = "list"
    ListForUser = "list_for_user"
    Detail = "detail"
    Cancel = "cancel"
    Submit = "submit"
    Accounting = "accounting"


@dataclass(frozen=True)
class JobSummary:
    job_id: int
    job_name: str
    user: str
    status: JobStatus
    started_or_submitted_at: datetime
    queue_or_node: str
    slots: int


@dataclass(frozen=True)
class JobDetail:
    job_id: int
    script_path: str
    source_directory: str
    submit_command: str
    output_path: str
    error_path: str
    memory_requested: str
    parallel: bool
    cores: int
    cpu_time_used: int
    current_memory: int
    maximum_memory: int
    run_time: int
    time_remaining: int | None


@dataclass(frozen=True)
class SubmitSpec:
    job_name: str
    script_path: str
    source_directory: str
    memory_requested: str = "1G"
    cores: int = 1
    parallel: bool = False
    output_path: str = ""
    extra_args: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class AccountingRecord:
    job_id: int
    final_status: JobStatus
    final_run_time: int
    maximum_memory: int
    exit_code: int


# Raw scheduler state -> status; also closed over the enum's own names so
# that re-mapping an already-mapped value is a no-op.
_STATUS_TABLE = {
    grammar.STATE_QUEUED: JobStatus.Queued,
    grammar.STATE_RUNNING: JobStatus.Running,
    grammar.STATE_SUSPENDED: JobStatus.Suspended,
    "S": JobStatus.Suspended,
    grammar.STATE_ERROR: JobStatus.Error,
    grammar.STATE_DELETED: JobStatus.Deleted,
}
_STATUS_TABLE.update({status.name: status for status in JobStatus})

_FORBIDDEN_NAME = re.compile(r"[\s'\"`;|&<>$\\]")


def map_status(raw: str) -> JobStatus:
    """Map a scheduler state token to a status; unknown tokens are Unknown."""
    return _STATUS_TABLE.get(raw.strip(), JobStatus.Unknown)


def validate_submit_spec(spec: SubmitSpec) -> None:
    if not spec.job_name:
        raise InvalidParams("job name must be nonempty")
    if _FORBIDDEN_NAME.search(spec.job_name):
        raise InvalidParams(f"job name {spec.job_name!r} contains shell-unsafe characters")
    if not spec.script_path:
        raise InvalidParams("script path must be nonempty")
    if spec.cores < 1:
        raise InvalidParams(f"cores must be >= 1, got {spec.cores}")
    if not spec.parallel and spec.cores != 1:
        raise InvalidParams("non-parallel jobs must request exactly 1 core")
    try:
        grammar.parse_memory(spec.memory_requested)
    except ValueError as exc:
        raise InvalidParams(f"bad memory request: {exc}") from exc


class SchedulerAdapter:
    """Renders commands and parses output for one scheduler family."""

    name = "abstract"

    def render_command(self, kind: CommandKind, params: dict) -> list[str]:
        raise NotImplementedError

    def parse_job_list(self, raw: str) -> list[JobSummary]:
        raise NotImplementedError

    def parse_job_detail(self, raw: str) -> JobDetail:
        raise NotImplementedError

    def parse_accounting(self, raw: str) -> AccountingRecord:
        raise NotImplementedError

    def parse_submit_ack(self, raw: str) -> int:
        raise NotImplementedError


class SgeAdapter(SchedulerAdapter):
    """Adapter for the SGE-style grammar frozen in :mod:`gridscope.grammar`."""

    name = "sge"

    def render_command(self, kind: CommandKind, params: dict) -> list[str]:
        if kind is CommandKind.List:
            return [grammar.CMD_LIST, "-u", "*"]
        if kind is CommandKind.ListForUser:
            user = params.get("user", "")
            if not user or _FORBIDDEN_NAME.search(user):
                raise InvalidParams(f"bad user {user!r}")
            return [grammar.CMD_LIST, "-u", user]
        if kind is CommandKind.Detail:
            return [grammar.CMD_LIST, "-j", str(self._job_id(params))]
        if kind is CommandKind.Cancel:
            return [grammar.CMD_CANCEL, str(self._job_id(params))]
        if kind is CommandKind.Accounting:
            return [grammar.CMD_ACCOUNTING, "-j", str(self._job_id(params))]
        if kind is CommandKind.Submit:
            spec = params.get("spec")
            if not isinstance(spec, SubmitSpec):
                raise InvalidParams("submit requires a SubmitSpec under params['spec']")
            validate_submit_spec(spec)
            argv = [
                grammar.CMD_SUBMIT,
                "-N",
                spec.job_name,
                "-wd",
                spec.source_directory,
                "-l",
                f"h_vmem={spec.memory_requested}",
            ]
            if spec.parallel:
                argv += ["-pe", "smp", str(spec.cores)]
            if spec.output_path:
                argv += ["-o", spec.output_path]
            argv += list(spec.extra_args)
            argv.append(spec.script_path)
            return argv
        raise UnsupportedKind(f"no command for {kind!r}")

    @staticmethod
    def _job_id(params: dict) -> int:
        job_id = params.get("job_id")
        if not isinstance(job_id, int) or job_id <= 0:
            raise InvalidParams(f"job_id must be a positive integer, got {job_id!r}")
        return job_id

    def parse_job_list(self, raw: str) -> list[JobSummary]:
        summaries: list[JobSummary] = []
        seen: set[int] = set()
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if lineno <= 2 or not line.strip():
                continue
            tokens = line.split()
            if len(tokens) == 9:
                (sid, _prior, name, user, state, date, time, queue, slots) = tokens
            elif len(tokens) == 8:
                (sid, _prior, name, user, state, date, time, slots) = tokens
                queue = ""
            else:
                raise ParseError(f"expected 8 or 9 columns, got {len(tokens)}", lineno)
            if not sid.isdigit():
                raise ParseError(f"job id {sid!r} is not numeric", lineno)
            job_id = int(sid)
            if job_id in seen:
                raise ParseError(f"duplicate job id {job_id}", lineno)
            seen.add(job_id)
            if not slots.isdigit() or int(slots) < 1:
                raise ParseError(f"bad slots column {slots!r}", lineno)
            try:
                at = grammar.parse_timestamp(f"{date} {time}")
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            summaries.append(
                JobSummary(
                    job_id=job_id,
                    job_name=name,
                    user=user,
                    status=map_status(state),
                    started_or_submitted_at=at,
                    queue_or_node=queue,
                    slots=int(slots),
                )
            )
        return summaries

    def parse_job_detail(self, raw: str) -> JobDetail:
        fields = self._parse_stanza(raw, sep=":")
        if "job_number" not in fields:
            raise ParseError("detail stanza is missing job_number")
        usage = fields.get("usage", "")
        cpu, vmem, maxvmem = 0, 0, 0
        if usage:
            for part in usage.split(","):
                key, _, value = part.strip().partition("=")
                if key == "cpu":
                    cpu = grammar.parse_duration(value)
                elif key == "vmem":
                    vmem = self._memory(value)
                elif key == "maxvmem":
                    maxvmem = self._memory(value)
        resource = fields.get("hard_resource_list", "")
        mem_requested = resource.partition("h_vmem=")[2] or resource
        remaining = fields.get("time_remaining")
        parallel = fields.get("parallel", "0") == "1"
        cores = int(fields.get("slots", "1"))
        if cores < 1:
            raise ParseError(f"slots must be >= 1, got {cores}")
        if not parallel and cores != 1:
            raise ParseError(f"serial job reports {cores} slots")
        return JobDetail(
            job_id=int(fields["job_number"]),
            script_path=fields.get("script_file", ""),
            source_directory=fields.get("sge_o_workdir", ""),
            submit_command=fields.get("cmd", ""),
            output_path=fields.get("stdout_path", ""),
            error_path=fields.get("stderr_path", ""),
            memory_requested=mem_requested,
            parallel=parallel,
            cores=cores,
            cpu_time_used=cpu,
            current_memory=vmem,
            maximum_memory=max(maxvmem, vmem),
            run_time=grammar.parse_duration(fields["runtime"]) if "runtime" in fields else 0,
            time_remaining=grammar.parse_duration(remaining) if remaining else None,
        )

    def parse_accounting(self, raw: str) -> AccountingRecord:
        fields = self._parse_stanza(raw, sep=None)
        if "job_number" not in fields:
            raise ParseError("accounting stanza is missing job_number")
        if "exit_status" not in fields:
            raise NotFinished(f"job {fields['job_number']} has no final accounting yet")
        exit_code = int(fields["exit_status"])
        deleted = fields.get("deleted", "0") == "1"
        if deleted:
            final = JobStatus.Deleted
        elif exit_code == 0:
            final = JobStatus.Completed
        else:
            final = JobStatus.Error
        return AccountingRecord(
            job_id=int(fields["job_number"]),
            final_status=final,
            final_run_time=int(fields.get("ru_wallclock", "0")),
            maximum_memory=self._memory(fields.get("maxvmem", "0")),
            exit_code=exit_code,
        )

    def parse_submit_ack(self, raw: str) -> int:
        """Pull the new job id out of the submit acknowledgement line."""
        for line in raw.splitlines():
            if line.startswith(grammar.SUBMIT_ACK_PREFIX):
                token = line[len(grammar.SUBMIT_ACK_PREFIX) :].split()[0]
                if token.isdigit():
                    return int(token)
        raise ParseError(f"no job id in submit acknowledgement {raw!r}")

    @staticmethod
    def _parse_stanza(raw: str, sep: str | None) -> dict[str, str]:
        fields: dict[str, str] = {}
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            if sep is not None:
                key, found, value = line.partition(sep)
                if not found:
                    raise ParseError(f"expected 'key{sep} value'", lineno)
            else:
                parts = line.split(None, 1)
                key, value = parts[0], parts[1] if len(parts) > 1 else ""
            fields[key.strip()] = value.strip()
        return fields

    @staticmethod
    def _memory(token: str) -> int:
        try:
            return grammar.parse_memory(token)
        except ValueError as exc:
            raise UnitError(str(exc)) from exc
