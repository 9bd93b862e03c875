"""Encrypted credential store and key revocation.

Private keys are sealed with AES-256-GCM under a key derived from the user's
passphrase via PBKDF2-HMAC-SHA256 (per-key random salt). Authenticated
encryption means a wrong passphrase fails loudly instead of yielding
garbage. Passphrases and decrypted keys live only in memory.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

MIN_ITERATIONS = 100_000
DEFAULT_ITERATIONS = 200_000
MIN_PASSPHRASE_LENGTH = 8
_STORE_VERSION = 1
_CIPHER_ID = "aes-256-gcm"


class KeyStoreError(Exception):
    pass


class WeakPassphrase(KeyStoreError):
    pass


class DecryptError(KeyStoreError):
    pass


class UnknownKey(KeyStoreError):
    pass


class RevokedKey(KeyStoreError):
    pass


class StorageError(KeyStoreError):
    pass


@dataclass(frozen=True)
class Credential:
    key_id: str
    user: str
    host: str
    port: int
    salt: bytes
    iterations: int
    nonce: bytes
    ciphertext: bytes
    fingerprint: str


@dataclass
class RevocationList:
    revoked_fingerprints: set[str] = field(default_factory=set)
    updated_at: float = 0.0


def key_fingerprint(key_bytes: bytes) -> str:
    """Stable digest identifying the key material."""
    return "SHA256:" + hashlib.sha256(key_bytes).hexdigest()


def _derive(passphrase: str, salt: bytes, iterations: int) -> bytes:
    kdf = PBKDF2HMAC(algorithm=SHA256(), length=32, salt=salt, iterations=iterations)
    return kdf.derive(passphrase.encode())


class KeyStore:
    """File-backed credential store with a persisted revocation list.

    Writes are serialized; reads only touch in-memory state loaded at
    construction and refreshed on every mutation.
    """

    def __init__(
        self,
        store_path: str | Path,
        revocation_path: str | Path | None = None,
        iterations: int = DEFAULT_ITERATIONS,
        min_passphrase_length: int = MIN_PASSPHRASE_LENGTH,
    ):
        if iterations < MIN_ITERATIONS:
            raise ValueError(f"iterations must be >= {MIN_ITERATIONS}")
        self.store_path = Path(store_path)
        self.revocation_path = (
            Path(revocation_path)
            if revocation_path is not None
            else self.store_path.with_suffix(".revoked")
        )
        self.iterations = iterations
        self.min_passphrase_length = min_passphrase_length
        self._lock = threading.Lock()
        self._credentials: dict[str, Credential] = {}
        self._revocation = RevocationList()
        self._load()

    def store_key(
        self, plaintext_key: bytes, passphrase: str, user: str, host: str, port: int = 22
    ) -> str:
        if not plaintext_key:
            raise KeyStoreError("key material must be nonempty")
        if len(passphrase) < self.min_passphrase_length:
            raise WeakPassphrase(
                f"passphrase shorter than {self.min_passphrase_length} characters"
            )
        salt = os.urandom(16)
        nonce = os.urandom(12)
        sealed = AESGCM(_derive(passphrase, salt, self.iterations)).encrypt(
            nonce, plaintext_key, None
        )
        credential = Credential(
            key_id=secrets.token_hex(8),
            user=user,
            host=host,
            port=port,
            salt=salt,
            iterations=self.iterations,
            nonce=nonce,
            ciphertext=sealed,
            fingerprint=key_fingerprint(plaintext_key),
        )
        with self._lock:
            self._credentials[credential.key_id] = credential
            self._persist_credentials()
        return credential.key_id

    def load_key(self, key_id: str, passphrase: str) -> bytes:
        credential = self.get_credential(key_id)
        if self.is_revoked(credential.fingerprint):
            raise RevokedKey(f"fingerprint {credential.fingerprint} is revoked")
        try:
            key = _derive(passphrase, credential.salt, credential.iterations)
            return AESGCM(key).decrypt(credential.nonce, credential.ciphertext, None)
        except InvalidTag as exc:
            raise DecryptError("wrong passphrase or corrupted credential") from exc

    def get_credential(self, key_id: str) -> Credential:
        credential = self._credentials.get(key_id)
        if credential is None:
            raise UnknownKey(f"no credential with id {key_id!r}")
        return credential

    def list_credentials(self) -> list[Credential]:
        return sorted(self._credentials.values(), key=lambda c: c.key_id)

    def revoke_key(self, fingerprint: str) -> RevocationList:
        with self._lock:
            self._revocation.revoked_fingerprints.add(fingerprint)
            self._revocation.updated_at = time.time()
            self._persist_revocation()
            return RevocationList(
                set(self._revocation.revoked_fingerprints), self._revocation.updated_at
            )

    def is_revoked(self, fingerprint: str) -> bool:
        return fingerprint in self._revocation.revoked_fingerprints

    def check_not_revoked(self, key_id: str) -> None:
        credential = self.get_credential(key_id)
        if self.is_revoked(credential.fingerprint):
            raise RevokedKey(f"fingerprint {credential.fingerprint} is revoked")

    @property
    def revocation_list(self) -> RevocationList:
        return RevocationList(
            set(self._revocation.revoked_fingerprints), self._revocation.updated_at
        )

    def _load(self) -> None:
        if self.store_path.exists():
            try:
                blob = json.loads(self.store_path.read_text())
            except (OSError, ValueError) as exc:
                raise StorageError(f"cannot read credential store: {exc}") from exc
            if blob.get("version") != _STORE_VERSION:
                raise StorageError(f"unsupported store version {blob.get('version')!r}")
            for key_id, entry in blob.get("keys", {}).items():
                self._credentials[key_id] = Credential(
                    key_id=key_id,
                    user=entry["user"],
                    host=entry["host"],
                    port=entry["port"],
                    salt=base64.b64decode(entry["salt"]),
                    iterations=entry["iterations"],
                    nonce=base64.b64decode(entry["nonce"]),
                    ciphertext=base64.b64decode(entry["ciphertext"]),
                    fingerprint=entry["fingerprint"],
                )
        if self.revocation_path.exists():
            lines = self.revocation_path.read_text().splitlines()
            self._revocation.revoked_fingerprints = {ln.strip() for ln in lines if ln.strip()}
            self._revocation.updated_at = self.revocation_path.stat().st_mtime

    def _persist_credentials(self) -> None:
        blob = {
            "version": _STORE_VERSION,
            "keys": {
                c.key_id: {
                    "user": c.user,
                    "host": c.host,
                    "port": c.port,
                    "salt": base64.b64encode(c.salt).decode(),
                    "iterations": c.iterations,
                    "cipher": _CIPHER_ID,
                    "nonce": base64.b64encode(c.nonce).decode(),
                    "ciphertext": base64.b64encode(c.ciphertext).decode(),
                    "fingerprint": c.fingerprint,
                }
                for c in self._credentials.values()
            },
        }
        self._atomic_write(self.store_path, json.dumps(blob, indent=1))

    def _persist_revocation(self) -> None:
        lines = "\n".join(sorted(self._revocation.revoked_fingerprints))
        self._atomic_write(self.revocation_path, lines + "\n" if lines else "")

    @staticmethod
    def _atomic_write(path: Path, content: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_text(content)
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc
