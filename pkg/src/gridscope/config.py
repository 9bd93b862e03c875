"""Configuration: YAML file, GRIDSCOPE_* environment overrides, CLI flags.

Precedence: CLI flag > environment variable > config file > default.
Environment variables are named GRIDSCOPE_<SECTION>_<KEY>, e.g.
GRIDSCOPE_LIMITER_THRESHOLD=5 or GRIDSCOPE_POLL_INTERVAL_SECONDS=15.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .gateway import GatewayConfig
from .poller import PollConfig

ENV_PREFIX = "GRIDSCOPE"


@dataclass
class ClusterConfig:
    transport: str = "sim"  # ssh | exec | sim
    host: str = ""
    user: str = ""
    port: int = 22
    key_id: str = ""
    # env var read once at startup; the passphrase itself is never persisted
    key_passphrase_env: str = "GRIDSCOPE_KEY_PASSPHRASE"
    known_hosts: str = ""
    command_timeout_seconds: float = 30.0
    sim_seed: int = 0


@dataclass
class CacheConfig:
    ttl_seconds: float = 60.0


@dataclass
class AuthConfig:
    session_ttl_seconds: float = 3600.0
    admin_users: list[str] = field(default_factory=list)
    local_tokens: dict[str, str] = field(default_factory=dict)
    assertion_key_hex: str = ""


@dataclass
class AnalyticsConfig:
    rules_path: str = ""
    group_keys: list[str] = field(default_factory=lambda: ["tool"])
    covariate_key: str = "reads"


@dataclass
class ServerConfig:
    port: int = 8787
    db_path: str = "gridscope.db"
    keystore_path: str = "credentials.json"
    revocation_path: str = ""
    static_dir: str = ""


@dataclass
class LimiterConfig:
    threshold: int = 10
    window_seconds: float = 10.0
    backoff_base_seconds: float = 1.0
    backoff_cap_seconds: float = 64.0
    system_threshold: int = 100
    error_scan_lines: int = 200


@dataclass
class AppConfig:
    server: ServerConfig = field(default_factory=ServerConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    limiter: LimiterConfig = field(default_factory=LimiterConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    poll: PollConfig = field(default_factory=PollConfig)
    auth: AuthConfig = field(default_factory=AuthConfig)
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)

    def gateway_config(self) -> GatewayConfig:
        return GatewayConfig(
            threshold=self.limiter.threshold,
            window_seconds=self.limiter.window_seconds,
            backoff_base_seconds=self.limiter.backoff_base_seconds,
            backoff_cap_seconds=self.limiter.backoff_cap_seconds,
            cache_ttl_seconds=self.cache.ttl_seconds,
            system_threshold=self.limiter.system_threshold,
            error_scan_lines=self.limiter.error_scan_lines,
        )


_SECTIONS = {
    "server": ServerConfig,
    "cluster": ClusterConfig,
    "limiter": LimiterConfig,
    "cache": CacheConfig,
    "poll": PollConfig,
    "auth": AuthConfig,
    "analytics": AnalyticsConfig,
}


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Build the app config from an optional YAML file plus env overrides."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ValueError(f"config root must be a mapping, got {type(loaded).__name__}")
            raw = loaded

    config = AppConfig()
    for section_name, section_cls in _SECTIONS.items():
        section_raw = dict(raw.get(section_name) or {})
        known = {f.name: f for f in fields(section_cls)}
        unknown = set(section_raw) - set(known)
        if unknown:
            raise ValueError(f"unknown keys in [{section_name}]: {sorted(unknown)}")
        for field_name in known:
            env_key = f"{ENV_PREFIX}_{section_name}_{field_name}".upper()
            if env_key in env:
                section_raw[field_name] = yaml.safe_load(env[env_key])
        if section_raw:
            merged = section_cls(**{**_defaults(section_cls), **section_raw})
        else:
            merged = section_cls()
        setattr(config, section_name, merged)
    return config


def _defaults(section_cls) -> dict:
    instance = section_cls()
    return {f.name: getattr(instance, f.name) for f in fields(section_cls)}
