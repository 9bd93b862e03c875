"""Assemble a running service from configuration."""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass

from . import analytics as analytics_mod
from .api import ApiContext, create_app
from .auth import AuthProvider, ExternalAssertionProvider, LocalTokenProvider, SessionStore
from .config import AppConfig
from .connection import ConnectionManager, ExecTransport, SimTransport, SshTransport, Transport
from .gateway import RequestGateway
from .keystore import KeyStore
from .poller import StatusPoller
from .simcluster import SimCluster, SimConfig
from .store import JobStore

logger = logging.getLogger("gridscope")


@dataclass
class Application:
    config: AppConfig
    store: JobStore
    keystore: KeyStore
    connection: ConnectionManager
    gateway: RequestGateway
    poller: StatusPoller
    context: ApiContext
    sim: SimCluster | None = None

    def create_api(self):
        api = create_app(self.context)
        static_dir = self.config.server.static_dir
        if static_dir:
            from fastapi.staticfiles import StaticFiles

            api.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")
        return api


def build_transport(config: AppConfig, keystore: KeyStore) -> tuple[Transport, SimCluster | None]:
    cluster = config.cluster
    if cluster.transport == "sim":
        sim = SimCluster(SimConfig(seed=cluster.sim_seed))
        return SimTransport(sim, user=cluster.user or None), sim
    if cluster.transport == "exec":
        return ExecTransport(), None
    if cluster.transport == "ssh":
        key_provider = None
        if cluster.key_id:
            passphrase = os.environ.get(cluster.key_passphrase_env, "")
            if not passphrase:
                raise ValueError(
                    f"ssh transport needs the key passphrase in ${cluster.key_passphrase_env}"
                )
            key_id = cluster.key_id
            # closure keeps the passphrase in process memory only
            key_provider = lambda: keystore.load_key(key_id, passphrase)  # noqa: E731
            key_provider()  # fail fast on a wrong passphrase or revoked key
        return (
            SshTransport(
                user=cluster.user,
                host=cluster.host,
                port=cluster.port,
                key_provider=key_provider,
                known_hosts=cluster.known_hosts or None,
            ),
            None,
        )
    raise ValueError(f"unknown transport {cluster.transport!r}")


def build_application(config: AppConfig, clock=None) -> Application:
    from .adapter import SgeAdapter

    store = JobStore(config.server.db_path)
    keystore = KeyStore(
        config.server.keystore_path,
        revocation_path=config.server.revocation_path or None,
    )
    transport, sim = build_transport(config, keystore)
    connection = ConnectionManager(
        transport,
        keystore=keystore,
        key_id=config.cluster.key_id or None,
        timeout_seconds=config.cluster.command_timeout_seconds,
    )
    gateway = RequestGateway(
        adapter=SgeAdapter(),
        connection=connection,
        store=store,
        config=config.gateway_config(),
        clock=clock,
    )
    poller = StatusPoller(gateway, store, config.poll)
    gateway.poller = poller

    providers: dict[str, AuthProvider] = {}
    if config.auth.local_tokens:
        providers["local"] = LocalTokenProvider(config.auth.local_tokens)
    if config.auth.assertion_key_hex:
        providers["assertion"] = ExternalAssertionProvider(
            bytes.fromhex(config.auth.assertion_key_hex), clock=gateway.clock
        )
    sessions = SessionStore(config.auth.session_ttl_seconds, clock=gateway.clock)

    tag_rules = []
    if config.analytics.rules_path:
        tag_rules = analytics_mod.load_rules(config.analytics.rules_path)

    context = ApiContext(
        gateway=gateway,
        store=store,
        sessions=sessions,
        providers=providers,
        poller=poller,
        admin_users=set(config.auth.admin_users),
        analytics=config.analytics,
        tag_rules=tag_rules,
    )
    return Application(
        config=config,
        store=store,
        keystore=keystore,
        connection=connection,
        gateway=gateway,
        poller=poller,
        context=context,
        sim=sim,
    )


class PollerThread:
    """Runs the poller loop; a tick that overruns simply delays the next."""

    def __init__(self, poller: StatusPoller, sim: SimCluster | None = None):
        self.poller = poller
        self.sim = sim
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        if not self.poller.config.enabled:
            logger.info("poller disabled by config")
            return
        self._thread = threading.Thread(target=self._run, name="gridscope-poller", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        interval = self.poller.config.interval_seconds
        while not self._stop.is_set():
            started = time.monotonic()
            try:
                if self.sim is not None:
                    self.sim.advance_clock(interval)
                report = self.poller.tick(time.time())
                if report.errors:
                    logger.warning("poll errors: %s", "; ".join(report.errors))
            except Exception:
                logger.exception("poll tick failed")
            elapsed = time.monotonic() - started
            self._stop.wait(max(0.0, interval - elapsed))

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
