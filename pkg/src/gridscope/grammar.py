"""Frozen SGE-style command and output grammar.

Both sides of the wire import from here: the adapter renders commands and
parses output against these definitions, and the simulator accepts the same
commands and emits the same output shapes. Changing anything in this module
is a breaking change for every recorded fixture.
"""

from __future__ import annotations

from datetime import datetime
from decimal import Decimal

# Command words understood by the cluster side (real or simulated).
CMD_LIST = "qstat"
CMD_SUBMIT = "qsub"
CMD_CANCEL = "qdel"
CMD_ACCOUNTING = "qacct"

# qstat listing: two header lines, then one whitespace-separated record per
# job. queue@node is blank while a job is still queued, so record lines have
# either all columns or all but that one.
LIST_COLUMNS = (
    "job-ID",
    "prior",
    "name",
    "user",
    "state",
    "submit/start at",
    "queue",
    "slots",
)
LIST_HEADER = (
    "job-ID  prior    name         user         state submit/start at      queue                    slots"
)
LIST_SEPARATOR = "-" * len(LIST_HEADER)

# Scheduler state letters. The parser treats anything else as Unknown.
STATE_QUEUED = "qw"
STATE_RUNNING = "r"
STATE_SUSPENDED = "s"
STATE_ERROR = "Eqw"
STATE_DELETED = "dr"

TIMESTAMP_FORMAT = "%m/%d/%Y %H:%M:%S"

# qstat -j detail stanza keys, in emission order.
DETAIL_KEYS = (
    "job_number",
    "job_name",
    "owner",
    "sge_o_workdir",
    "cmd",
    "script_file",
    "stdout_path",
    "stderr_path",
    "hard_resource_list",
    "parallel",
    "slots",
    "usage",
    "runtime",
    "time_remaining",
)

# qacct -j stanza keys (``key value`` lines, no colon).
ACCOUNTING_KEYS = ("job_number", "exit_status", "deleted", "ru_wallclock", "maxvmem")

SUBMIT_ACK_PREFIX = "Your job "

MEMORY_SUFFIXES = {"K": 10, "M": 20, "G": 30, "T": 40}


def format_memory(nbytes: int) -> str:
    """Render a byte count in the largest binary unit that divides it evenly."""
    if nbytes < 0:
        raise ValueError(f"negative byte count: {nbytes}")
    for suffix in ("T", "G", "M", "K"):
        shift = MEMORY_SUFFIXES[suffix]
        if nbytes and nbytes % (1 << shift) == 0:
            return f"{nbytes >> shift}{suffix}"
    return str(nbytes)


def parse_memory(token: str) -> int:
    """Parse a memory token like ``2.5G`` into bytes (binary suffixes)."""
    token = token.strip()
    if not token:
        raise ValueError("empty memory token")
    suffix = token[-1]
    if suffix in MEMORY_SUFFIXES:
        number, shift = token[:-1], MEMORY_SUFFIXES[suffix]
    elif suffix.isdigit():
        number, shift = token, 0
    else:
        raise ValueError(f"unrecognized memory suffix in {token!r}")
    try:
        scaled = Decimal(number) * (1 << shift)
    except ArithmeticError as exc:
        raise ValueError(f"bad memory value {token!r}") from exc
    return int(scaled.to_integral_value(rounding="ROUND_HALF_UP"))


def format_duration(seconds: int) -> str:
    """Render whole seconds as zero-padded HH:MM:SS (hours may exceed 99)."""
    if seconds < 0:
        raise ValueError(f"negative duration: {seconds}")
    hours, rest = divmod(int(seconds), 3600)
    minutes, secs = divmod(rest, 60)
    return f"{hours:02d}:{minutes:02d}:{secs:02d}"


def parse_duration(text: str) -> int:
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"bad duration {text!r}")
    hours, minutes, secs = (int(p) for p in parts)
    if minutes >= 60 or secs >= 60 or minutes < 0 or secs < 0 or hours < 0:
        raise ValueError(f"bad duration {text!r}")
    return hours * 3600 + minutes * 60 + secs


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, TIMESTAMP_FORMAT)


def emit_list(rows: list[dict]) -> str:
    """Emit a qstat listing for row dicts.

    Expected keys: job_id, prior, name, user, state, at (datetime),
    queue ('' while queued), slots.
    """
    lines = [LIST_HEADER, LIST_SEPARATOR]
    for row in rows:
        cols = [
            f"{row['job_id']:>7d}",
            f"{row['prior']:.5f}",
            f"{row['name']:<12s}",
            f"{row['user']:<12s}",
            f"{row['state']:<5s}",
            format_timestamp(row["at"]),
            f"{row['queue']:<24s}" if row["queue"] else " " * 24,
            f"{row['slots']:>5d}",
        ]
        lines.append(" ".join(cols).rstrip())
    return "\n".join(lines) + "\n"


def emit_detail(fields: dict) -> str:
    """Emit a qstat -j stanza.

    Expected keys mirror DETAIL_KEYS with native types: job_number int,
    parallel bool, slots int, cpu/runtime/time_remaining seconds,
    vmem/maxvmem bytes. usage/runtime are omitted for queued jobs
    (pass running=False); time_remaining is omitted when None.
    """
    lines = [
        f"job_number:         {fields['job_number']}",
        f"job_name:           {fields['job_name']}",
        f"owner:              {fields['owner']}",
        f"sge_o_workdir:      {fields['sge_o_workdir']}",
        f"cmd:                {fields['cmd']}",
        f"script_file:        {fields['script_file']}",
        f"stdout_path:        {fields['stdout_path']}",
        f"stderr_path:        {fields['stderr_path']}",
        f"hard_resource_list: h_vmem={fields['h_vmem']}",
        f"parallel:           {1 if fields['parallel'] else 0}",
        f"slots:              {fields['slots']}",
    ]
    if fields.get("running"):
        usage = ", ".join(
            [
                f"cpu={format_duration(fields['cpu'])}",
                f"vmem={format_memory(fields['vmem'])}",
                f"maxvmem={format_memory(fields['maxvmem'])}",
            ]
        )
        lines.append(f"usage:              {usage}")
        lines.append(f"runtime:            {format_duration(fields['runtime'])}")
    if fields.get("time_remaining") is not None:
        lines.append(f"time_remaining:     {format_duration(fields['time_remaining'])}")
    return "\n".join(lines) + "\n"


def emit_accounting(fields: dict) -> str:
    """Emit a qacct -j stanza (``key value`` lines).

    A record for a job that is still live carries job_number and deleted
    only; exit_status/ru_wallclock/maxvmem appear once the job finished.
    """
    lines = [f"job_number   {fields['job_number']}"]
    if fields.get("finished", True):
        lines.append(f"exit_status  {fields['exit_status']}")
        lines.append(f"deleted      {1 if fields['deleted'] else 0}")
        lines.append(f"ru_wallclock {fields['ru_wallclock']}")
        lines.append(f"maxvmem      {format_memory(fields['maxvmem'])}")
    else:
        lines.append(f"deleted      {1 if fields.get('deleted') else 0}")
    return "\n".join(lines) + "\n"
