"""Sessions and pluggable login providers.

Two providers ship: local shared-token login for self-contained deployments,
and an HMAC-signed external identity assertion that an upstream login
service (an OAuth bridge, SSO proxy, ...) can mint on a user's behalf.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import secrets
import threading
import time
from dataclasses import dataclass


class AuthError(Exception):
    pass


class ProviderUnavailable(AuthError):
    pass


@dataclass(frozen=True)
class Session:
    token: str
    principal: str
    issued_at: float
    expires_at: float


class AuthProvider:
    name = "abstract"

    def authenticate(self, credentials: dict) -> str:
        """Return the verified principal or raise AuthError."""
        raise NotImplementedError


class LocalTokenProvider(AuthProvider):
    """Username + shared secret pairs from the server config."""

    name = "local"

    def __init__(self, tokens: dict[str, str]):
        self.tokens = dict(tokens)

    def authenticate(self, credentials: dict) -> str:
        user = credentials.get("user", "")
        token = credentials.get("token", "")
        expected = self.tokens.get(user)
        if expected is None or not hmac.compare_digest(expected, token):
            raise AuthError("bad user or token")
        return user


class ExternalAssertionProvider(AuthProvider):
    """Accepts ``b64(payload).hexsig`` assertions signed with a shared key.

    Payload is JSON {"principal": ..., "expiresAt": epoch-seconds}.
    """

    name = "assertion"

    def __init__(self, key: bytes, clock=None):
        if not key:
            raise ProviderUnavailable("assertion provider has no signing key")
        self.key = key
        self.clock = clock or time.time

    def sign(self, principal: str, expires_at: float) -> str:
        payload = base64.urlsafe_b64encode(
            json.dumps({"principal": principal, "expiresAt": expires_at}).encode()
        ).decode()
        sig = hmac.new(self.key, payload.encode(), hashlib.sha256).hexdigest()
        return f"{payload}.{sig}"

    def authenticate(self, credentials: dict) -> str:
        assertion = credentials.get("assertion", "")
        payload_b64, _, sig = assertion.partition(".")
        if not payload_b64 or not sig:
            raise AuthError("malformed assertion")
        expected = hmac.new(self.key, payload_b64.encode(), hashlib.sha256).hexdigest()
        if not hmac.compare_digest(expected, sig):
            raise AuthError("bad assertion signature")
        try:
            payload = json.loads(base64.urlsafe_b64decode(payload_b64))
        except (ValueError, binascii.Error) as exc:
            raise AuthError("undecodable assertion payload") from exc
        if payload.get("expiresAt", 0) < self.clock():
            raise AuthError("assertion expired")
        principal = payload.get("principal", "")
        if not principal:
            raise AuthError("assertion carries no principal")
        return principal


class SessionStore:
    """Issues and validates bearer tokens (256-bit, expiring)."""

    def __init__(self, ttl_seconds: float = 3600.0, clock=None):
        self.ttl_seconds = ttl_seconds
        self.clock = clock or time.time
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def issue(self, principal: str) -> Session:
        now = self.clock()
        session = Session(
            token=secrets.token_urlsafe(32),
            principal=principal,
            issued_at=now,
            expires_at=now + self.ttl_seconds,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def validate(self, token: str) -> Session:
        with self._lock:
            session = self._sessions.get(token)
        if session is None:
            raise AuthError("unknown session token")
        if self.clock() >= session.expires_at:
            with self._lock:
                self._sessions.pop(token, None)
            raise AuthError("session expired")
        return session

    def drop(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)
