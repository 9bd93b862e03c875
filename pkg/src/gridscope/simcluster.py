"""In-process cluster simulator.

A seeded job-lifecycle state machine that accepts the frozen command grammar
and emits the frozen output grammar, so every end-to-end test runs against a
deterministic ground truth instead of a real scheduler. Also carries a tiny
in-memory filesystem so tail/cat work over the sim transport.
"""

from __future__ import annotations

import copy
import random
import shlex
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from . import grammar
from .adapter import JobStatus
from .connection import ExecResult

_BASE_TIME = datetime(2024, 1, 1, 0, 0, 0)

_STATE_LETTERS = {
    JobStatus.Queued: grammar.STATE_QUEUED,
    JobStatus.Running: grammar.STATE_RUNNING,
    JobStatus.Suspended: grammar.STATE_SUSPENDED,
    JobStatus.Error: grammar.STATE_ERROR,
    JobStatus.Deleted: grammar.STATE_DELETED,
}


@dataclass
class SimConfig:
    seed: int = 0
    queue_delay_bounds: tuple[int, int] = (5, 60)
    run_duration_bounds: tuple[int, int] = (30, 600)
    failure_rate: float = 0.0
    stall_mode: bool = False
    accounting_lag: float = 0.0
    time_limit: int | None = None
    default_user: str = "simuser"

    def __post_init__(self):
        if self.queue_delay_bounds[0] < 0 or self.queue_delay_bounds[1] < self.queue_delay_bounds[0]:
            raise ValueError("bad queue delay bounds")
        if self.run_duration_bounds[0] <= 0 or self.run_duration_bounds[1] < self.run_duration_bounds[0]:
            raise ValueError("bad run duration bounds")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure rate must be in [0, 1]")


@dataclass
class SimJob:
    job_id: int
    name: str
    owner: str
    script_path: str
    workdir: str
    memory_requested: str
    cores: int
    parallel: bool
    submit_command: str
    out_path: str
    err_path: str
    state: JobStatus
    submit_at: float
    start_at: float  # planned; actual once started
    planned_duration: int
    planned_exit: int
    memory_curve: list[tuple[int, int]]
    node: str
    end_at: float | None = None
    exit_code: int | None = None
    deleted: bool = False
    started: bool = False

    @property
    def live(self) -> bool:
        return self.end_at is None

    def memory_at(self, elapsed: float) -> tuple[int, int]:
        """(current, max-so-far) bytes after ``elapsed`` seconds of runtime."""
        current = 0
        peak = 0
        for offset, nbytes in self.memory_curve:
            if offset > elapsed:
                break
            current = nbytes
            peak = max(peak, nbytes)
        return current, peak

    def final_metrics(self) -> tuple[int, int]:
        """(wallclock seconds, peak bytes) for a terminal job."""
        if self.end_at is None:
            raise ValueError(f"job {self.job_id} is not terminal")
        if not self.started:
            return 0, 0  # never left the queue
        wallclock = int(self.end_at - self.start_at)
        _, peak = self.memory_at(wallclock)
        return wallclock, peak


@dataclass(frozen=True)
class Transition:
    at: float
    job_id: int
    from_state: JobStatus
    to_state: JobStatus


@dataclass(frozen=True)
class LoggedCommand:
    argv: tuple[str, ...]
    at: float
    user: str | None


class SimCluster:
    """Deterministic scheduler: same seed + same command/clock script, same ledger."""

    def __init__(self, config: SimConfig | None = None, files: dict[str, str] | None = None):
        self.config = config or SimConfig()
        self.files: dict[str, str] = dict(files or {})
        self.clock: float = 0.0
        self.jobs: dict[int, SimJob] = {}
        self.command_log: list[LoggedCommand] = []
        self._rng = random.Random(self.config.seed)
        self._next_id = 101

    # -- clock ---------------------------------------------------------------

    def now_datetime(self, at: float | None = None) -> datetime:
        return _BASE_TIME + timedelta(seconds=self.clock if at is None else at)

    def advance_clock(self, dt: float) -> list[Transition]:
        if dt <= 0:
            raise ValueError("dt must be positive")
        target = self.clock + dt
        transitions: list[Transition] = []
        for job in sorted(self.jobs.values(), key=lambda j: j.job_id):
            if job.state is JobStatus.Queued and job.start_at <= target:
                transitions.append(
                    Transition(job.start_at, job.job_id, JobStatus.Queued, JobStatus.Running)
                )
                job.state = JobStatus.Running
                job.started = True
                self._touch_output(job, f"[{job.name}] started on {job.node}\n")
                self.files.setdefault(job.err_path, "")
            if job.state is JobStatus.Running:
                planned_end = job.start_at + job.planned_duration
                if planned_end <= target:
                    final = JobStatus.Completed if job.planned_exit == 0 else JobStatus.Error
                    transitions.append(
                        Transition(planned_end, job.job_id, JobStatus.Running, final)
                    )
                    job.state = final
                    job.end_at = planned_end
                    job.exit_code = job.planned_exit
                    self._touch_output(
                        job, f"[{job.name}] finished with exit {job.exit_code}\n"
                    )
                    if job.exit_code != 0:
                        self.files[job.err_path] = (
                            self.files.get(job.err_path, "")
                            + f"Error: exited with status {job.exit_code}\n"
                        )
        self.clock = target
        transitions.sort(key=lambda t: (t.at, t.job_id))
        return transitions

    def _touch_output(self, job: SimJob, line: str) -> None:
        self.files[job.out_path] = self.files.get(job.out_path, "") + line

    # -- command surface -----------------------------------------------------

    def handle_command(self, argv: list[str], user: str | None = None) -> ExecResult:
        self.command_log.append(LoggedCommand(tuple(argv), self.clock, user))
        if not argv:
            return self._fail("empty command")
        word = argv[0]
        try:
            if word == grammar.CMD_LIST:
                return self._cmd_qstat(argv)
            if word == grammar.CMD_SUBMIT:
                return self._cmd_qsub(argv, user)
            if word == grammar.CMD_CANCEL:
                return self._cmd_qdel(argv)
            if word == grammar.CMD_ACCOUNTING:
                return self._cmd_qacct(argv)
            if word == "tail":
                return self._cmd_tail(argv)
            if word == "cat":
                return self._cmd_cat(argv)
            if word == "echo":
                return self._ok(" ".join(argv[1:]) + "\n")
        except _CommandError as exc:
            return self._fail(str(exc))
        return self._fail(f"unknown command: {word}")

    def _cmd_qstat(self, argv: list[str]) -> ExecResult:
        if len(argv) == 3 and argv[1] == "-j":
            job = self._find_live_or_fail(argv[2])
            return self._ok(self.emit_detail(job.job_id))
        if len(argv) == 3 and argv[1] == "-u":
            user = None if argv[2] == "*" else argv[2]
            return self._ok(self.emit_list(user=user))
        if len(argv) == 1:
            return self._ok(self.emit_list())
        raise _CommandError(f"bad qstat usage: {shlex.join(argv)}")

    def _cmd_qsub(self, argv: list[str], user: str | None) -> ExecResult:
        name = "job"
        workdir = "/tmp"
        memory = "1G"
        cores = 1
        parallel = False
        out_path = ""
        script = ""
        i = 1
        while i < len(argv):
            token = argv[i]
            if token == "-N":
                name, i = argv[i + 1], i + 2
            elif token == "-wd":
                workdir, i = argv[i + 1], i + 2
            elif token == "-l":
                value = argv[i + 1]
                if value.startswith("h_vmem="):
                    memory = value[len("h_vmem=") :]
                i += 2
            elif token == "-pe":
                cores, parallel, i = int(argv[i + 2]), True, i + 3
            elif token == "-o":
                out_path, i = argv[i + 1], i + 2
            elif token.startswith("-"):
                i += 2  # unknown flag: assume one value and skip
            else:
                script, i = token, i + 1
        if not script:
            raise _CommandError("qsub: no script given")
        if cores < 1:
            raise _CommandError(f"qsub: invalid slot count {cores}")

        job_id = self._next_id
        self._next_id += 1
        owner = user or self.config.default_user
        # the submitted script necessarily exists cluster-side
        self.files.setdefault(script, f"#!/bin/sh\n# {script}\n")
        delay = self._rng.randint(*self.config.queue_delay_bounds)
        duration = self._rng.randint(*self.config.run_duration_bounds)
        fails = self._rng.random() < self.config.failure_rate
        exit_code = self._rng.choice([1, 137, 139]) if fails else 0
        if self.config.time_limit is not None and duration > self.config.time_limit:
            duration, exit_code = self.config.time_limit, 137
        curve = self._draw_memory_curve(duration)
        job = SimJob(
            job_id=job_id,
            name=name,
            owner=owner,
            script_path=script,
            workdir=workdir,
            memory_requested=memory,
            cores=cores,
            parallel=parallel,
            submit_command=shlex.join(argv),
            out_path=out_path or f"{workdir}/{name}.o{job_id}",
            err_path=f"{workdir}/{name}.e{job_id}",
            state=JobStatus.Queued,
            submit_at=self.clock,
            start_at=self.clock + delay,
            planned_duration=duration,
            planned_exit=exit_code,
            memory_curve=curve,
            node=f"all.q@node{(job_id % 4) + 1:03d}",
        )
        self.jobs[job_id] = job
        return self._ok(f'{grammar.SUBMIT_ACK_PREFIX}{job_id} ("{name}") has been submitted\n')

    def _draw_memory_curve(self, duration: int) -> list[tuple[int, int]]:
        steps = self._rng.randint(2, 5)
        mib = 1 << 20
        offsets = sorted(
            {0, *(self._rng.randint(1, max(1, duration - 1)) for _ in range(steps - 1))}
        )
        return [(off, self._rng.randint(1, 128) * 64 * mib) for off in offsets]

    def _cmd_qdel(self, argv: list[str]) -> ExecResult:
        if len(argv) != 2:
            raise _CommandError(f"bad qdel usage: {shlex.join(argv)}")
        job = self._find_live_or_fail(argv[1])
        previous = job.state
        job.state = JobStatus.Deleted
        job.deleted = True
        job.end_at = self.clock
        job.exit_code = 137
        if previous is not JobStatus.Queued:
            self._touch_output(job, f"[{job.name}] killed by request\n")
        return self._ok(f"job {job.job_id} has been marked for deletion\n")

    def _cmd_qacct(self, argv: list[str]) -> ExecResult:
        if len(argv) != 3 or argv[1] != "-j":
            raise _CommandError(f"bad qacct usage: {shlex.join(argv)}")
        job_id = self._parse_id(argv[2])
        job = self.jobs.get(job_id)
        if job is None:
            raise _CommandError(f"error: job id {job_id} not found")
        if job.live:
            return self._ok(grammar.emit_accounting(
                {"job_number": job.job_id, "finished": False, "deleted": job.deleted}
            ))
        assert job.end_at is not None
        if self.clock < job.end_at + self.config.accounting_lag:
            raise _CommandError(f"error: job id {job_id} not found")
        return self._ok(self.emit_accounting(job_id))

    def _cmd_tail(self, argv: list[str]) -> ExecResult:
        n = 10
        verbose = False
        paths: list[str] = []
        i = 1
        while i < len(argv):
            if argv[i] == "-n":
                n, i = int(argv[i + 1]), i + 2
            elif argv[i] == "-v":
                verbose, i = True, i + 1
            else:
                paths.append(argv[i])
                i += 1
        if not paths:
            raise _CommandError("tail: no file given")
        # Mirror GNU tail: headers when -v or multiple files, blank line
        # between blocks, missing files reported on stderr with exit 1.
        chunks: list[str] = []
        stderr = []
        headed = verbose or len(paths) > 1
        for path in paths:
            if path not in self.files:
                stderr.append(
                    f"tail: cannot open '{path}' for reading: No such file or directory"
                )
                continue
            lines = self.files[path].splitlines()
            body = "".join(line + "\n" for line in lines[-n:])
            chunks.append(f"==> {path} <==\n{body}" if headed else body)
        return ExecResult(
            stdout="\n".join(chunks),
            stderr="\n".join(stderr) + ("\n" if stderr else ""),
            exit_code=1 if stderr else 0,
            elapsed=0.0,
        )

    def _cmd_cat(self, argv: list[str]) -> ExecResult:
        if len(argv) != 2:
            raise _CommandError("cat: exactly one file expected")
        path = argv[1]
        if path not in self.files:
            return self._fail(f"cat: {path}: No such file or directory")
        return self._ok(self.files[path])

    # -- emitters ------------------------------------------------------------

    def emit_list(self, user: str | None = None) -> str:
        rows = []
        for job in sorted(self.jobs.values(), key=lambda j: j.job_id):
            if not job.live:
                continue
            if user is not None and job.owner != user:
                continue
            rows.append(
                {
                    "job_id": job.job_id,
                    "prior": 0.5 + (job.job_id % 100) / 1000.0,
                    "name": job.name,
                    "user": job.owner,
                    "state": _STATE_LETTERS[job.state],
                    "at": self.now_datetime(job.start_at if job.started else job.submit_at),
                    "queue": job.node if job.started else "",
                    "slots": job.cores,
                }
            )
        return grammar.emit_list(rows)

    def emit_detail(self, job_id: int) -> str:
        job = self.jobs[job_id]
        running = job.state in (JobStatus.Running, JobStatus.Suspended)
        elapsed = int(self.clock - job.start_at) if running else 0
        vmem, maxvmem = job.memory_at(elapsed) if running else (0, 0)
        remaining = None
        if running and self.config.time_limit is not None:
            remaining = max(0, int(job.start_at + self.config.time_limit - self.clock))
        return grammar.emit_detail(
            {
                "job_number": job.job_id,
                "job_name": job.name,
                "owner": job.owner,
                "sge_o_workdir": job.workdir,
                "cmd": job.submit_command,
                "script_file": job.script_path,
                "stdout_path": job.out_path,
                "stderr_path": job.err_path,
                "h_vmem": job.memory_requested,
                "parallel": job.parallel,
                "slots": job.cores,
                "running": running,
                "cpu": elapsed,  # cpu time modeled as wallclock
                "vmem": vmem,
                "maxvmem": maxvmem,
                "runtime": elapsed,
                "time_remaining": remaining,
            }
        )

    def emit_accounting(self, job_id: int) -> str:
        job = self.jobs[job_id]
        wallclock, peak = job.final_metrics()
        return grammar.emit_accounting(
            {
                "job_number": job.job_id,
                "finished": True,
                "exit_status": job.exit_code,
                "deleted": job.deleted,
                "ru_wallclock": wallclock,
                "maxvmem": peak,
            }
        )

    # -- inspection ----------------------------------------------------------

    def ledger(self) -> list[SimJob]:
        """Immutable ground-truth snapshot of every job ever submitted."""
        return [copy.deepcopy(self.jobs[jid]) for jid in sorted(self.jobs)]

    def quiescent(self) -> bool:
        return all(not job.live for job in self.jobs.values())

    def commands_issued(self, word: str | None = None) -> list[LoggedCommand]:
        if word is None:
            return list(self.command_log)
        return [c for c in self.command_log if c.argv and c.argv[0] == word]

    # -- plumbing ------------------------------------------------------------

    def _find_live_or_fail(self, token: str) -> SimJob:
        job_id = self._parse_id(token)
        job = self.jobs.get(job_id)
        if job is None or not job.live:
            raise _CommandError(f"error: job {job_id} does not exist")
        return job

    @staticmethod
    def _parse_id(token: str) -> int:
        if not token.isdigit():
            raise _CommandError(f"error: bad job id {token!r}")
        return int(token)

    @staticmethod
    def _ok(stdout: str) -> ExecResult:
        return ExecResult(stdout=stdout, stderr="", exit_code=0, elapsed=0.0)

    @staticmethod
    def _fail(message: str) -> ExecResult:
        return ExecResult(stdout="", stderr=message + "\n", exit_code=1, elapsed=0.0)


class _CommandError(Exception):
    pass


def run_scenario(sim: SimCluster, steps: list[dict]) -> list[ExecResult]:
    """Drive a simulator from a scripted step list.

    Each step is {"at": simTime} plus either {"command": argv, "user"?} or
    {"advance": dt}; steps run in order after the clock catches up to `at`.
    """
    results: list[ExecResult] = []
    for step in steps:
        at = float(step.get("at", sim.clock))
        if at > sim.clock:
            sim.advance_clock(at - sim.clock)
        if "command" in step:
            results.append(sim.handle_command(list(step["command"]), user=step.get("user")))
        elif "advance" in step:
            sim.advance_clock(float(step["advance"]))
        else:
            raise ValueError(f"step needs a command or an advance: {step!r}")
    return results


def run_scenario_file(sim: SimCluster, path) -> list[ExecResult]:
    import json
    from pathlib import Path

    return run_scenario(sim, json.loads(Path(path).read_text()))
