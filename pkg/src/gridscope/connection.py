"""Command execution against the cluster over a pluggable transport.

Three transports share one interface: ``ssh`` (OpenSSH client subprocess),
``exec`` (local subprocess, for a gridscope instance running on the cluster's
login node), and ``sim`` (in-process simulator). Throttling is not this
module's job; any number of executions may be in flight.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .keystore import KeyStore, RevokedKey

DEFAULT_TIMEOUT_SECONDS = 30.0


class TransportError(Exception):
    pass


class ConnectFailure(TransportError):
    pass


class AuthFailure(TransportError):
    pass


class CommandTimeout(TransportError):
    pass


class RemoteFileNotFound(TransportError):
    pass


class RemotePermissionDenied(TransportError):
    pass


@dataclass(frozen=True)
class ExecResult:
    stdout: str
    stderr: str
    exit_code: int
    elapsed: float


class Transport:
    name = "abstract"

    def execute(
        self, command: list[str], *, timeout: float, user: str | None = None
    ) -> ExecResult:
        raise NotImplementedError


class ExecTransport(Transport):
    """Run commands as local subprocesses."""

    name = "exec"

    def execute(
        self, command: list[str], *, timeout: float, user: str | None = None
    ) -> ExecResult:
        start = time.monotonic()
        try:
            proc = subprocess.run(command, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise CommandTimeout(f"{command[0]} exceeded {timeout}s") from exc
        except FileNotFoundError as exc:
            raise TransportError(f"no such executable: {command[0]}") from exc
        return ExecResult(
            stdout=proc.stdout,
            stderr=proc.stderr,
            exit_code=proc.returncode,
            elapsed=time.monotonic() - start,
        )


class SshTransport(Transport):
    """Run commands through the OpenSSH client.

    The decrypted private key is materialized as a 0600 temp file only for
    the duration of each call; host keys come from a static known-hosts file.
    """

    name = "ssh"

    def __init__(
        self,
        user: str,
        host: str,
        port: int = 22,
        key_provider=None,
        known_hosts: str | None = None,
        ssh_binary: str = "ssh",
    ):
        self.user = user
        self.host = host
        self.port = port
        self.key_provider = key_provider
        self.known_hosts = known_hosts
        self.ssh_binary = ssh_binary

    def build_argv(self, command: list[str], identity_file: str | None) -> list[str]:
        argv = [self.ssh_binary, "-p", str(self.port), "-o", "BatchMode=yes"]
        if self.known_hosts:
            argv += ["-o", f"UserKnownHostsFile={self.known_hosts}"]
        if identity_file:
            argv += ["-i", identity_file]
        argv.append(f"{self.user}@{self.host}")
        # The remote side joins words with a shell; quote each one so user
        # text can never widen the argv.
        argv.append(" ".join(shlex.quote(token) for token in command))
        return argv

    def execute(
        self, command: list[str], *, timeout: float, user: str | None = None
    ) -> ExecResult:
        start = time.monotonic()
        identity: str | None = None
        tmp = None
        if self.key_provider is not None:
            tmp = tempfile.NamedTemporaryFile(prefix="gridscope_key_", delete=False)
            Path(tmp.name).chmod(0o600)
            tmp.write(self.key_provider())
            tmp.flush()
            identity = tmp.name
        try:
            proc = subprocess.run(
                self.build_argv(command, identity),
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise CommandTimeout(f"ssh command exceeded {timeout}s") from exc
        finally:
            if tmp is not None:
                tmp.close()
                Path(tmp.name).unlink(missing_ok=True)
        if proc.returncode == 255:
            stderr = proc.stderr.lower()
            if "permission denied" in stderr or "publickey" in stderr:
                raise AuthFailure(proc.stderr.strip())
            raise ConnectFailure(proc.stderr.strip() or "ssh connection failed")
        return ExecResult(
            stdout=proc.stdout,
            stderr=proc.stderr,
            exit_code=proc.returncode,
            elapsed=time.monotonic() - start,
        )


class SimTransport(Transport):
    """Drive the in-process simulator; deterministic given its seed/clock."""

    name = "sim"

    def __init__(self, sim, user: str | None = None):
        self.sim = sim
        self.user = user

    def execute(
        self, command: list[str], *, timeout: float, user: str | None = None
    ) -> ExecResult:
        if getattr(self.sim.config, "stall_mode", False):
            raise CommandTimeout(f"{command[0]} exceeded {timeout}s (simulated stall)")
        return self.sim.handle_command(command, user=user or self.user)


class ConnectionManager:
    """Owns all cluster communication for one cluster profile.

    A credential (by key id) may guard any transport; execution refuses
    revoked fingerprints before touching the wire.
    """

    def __init__(
        self,
        transport: Transport,
        keystore: KeyStore | None = None,
        key_id: str | None = None,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
    ):
        self.transport = transport
        self.keystore = keystore
        self.key_id = key_id
        self.timeout_seconds = timeout_seconds

    def execute(self, command: list[str], *, user: str | None = None) -> ExecResult:
        if not command:
            raise TransportError("empty command")
        if self.keystore is not None and self.key_id is not None:
            self.keystore.check_not_revoked(self.key_id)
        return self.transport.execute(command, timeout=self.timeout_seconds, user=user)

    def tail_file(
        self, path: str, n_lines: int, *, user: str | None = None, verbose: bool = False
    ) -> list[str]:
        """Last ``n_lines`` lines of a remote file, via a remote tail."""
        if n_lines < 1:
            raise ValueError("n_lines must be >= 1")
        argv = ["tail", "-n", str(n_lines)]
        if verbose:
            argv.append("-v")
        argv.append(path)
        result = self.execute(argv, user=user)
        if result.exit_code != 0:
            self._raise_file_error(path, result.stderr)
        lines = result.stdout.split("\n")
        if verbose and lines and lines[0].startswith("==>"):
            lines = lines[1:]
        if lines and lines[-1] == "":
            lines.pop()
        return lines

    def read_file(self, path: str, *, user: str | None = None) -> str:
        result = self.execute(["cat", path], user=user)
        if result.exit_code != 0:
            self._raise_file_error(path, result.stderr)
        return result.stdout

    @staticmethod
    def _raise_file_error(path: str, stderr: str) -> None:
        lowered = stderr.lower()
        if "permission denied" in lowered:
            raise RemotePermissionDenied(f"{path}: permission denied")
        if "no such file" in lowered or "not found" in lowered:
            raise RemoteFileNotFound(f"{path}: no such file")
        raise TransportError(stderr.strip() or f"cannot read {path}")
