"""Authentication scaffold and centralized controller authorization.

Credentials live in a small line-oriented file beside the database
(``login:saltHex:hashHex``). Hashes bind login name, password and a random
salt through HMAC-SHA256 so that equal passwords under different logins
yield different hashes.
"""

from __future__ import annotations

import hmac
import hashlib
import secrets
import string
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from .html import h1, htxt, struct
from .session import SESSION_LOGIN

HASH_PRIMITIVE = "hmac-sha256"
_PASSWORD_ALPHABET = string.ascii_uppercase + string.ascii_lowercase + string.digits


@dataclass(frozen=True)
class Granted:
    @property
    def granted(self) -> bool:
        return True


@dataclass(frozen=True)
class Denied:
    reason: str

    def __post_init__(self):
        if not self.reason:
            raise ValueError("a denial needs a reason")

    @property
    def granted(self) -> bool:
        return False


AccessResult = Union[Granted, Denied]


@dataclass(frozen=True)
class NewEntity:
    pass


@dataclass(frozen=True)
class ListEntities:
    pass


@dataclass(frozen=True)
class ShowEntity:
    entity: object


@dataclass(frozen=True)
class UpdateEntity:
    entity: object


@dataclass(frozen=True)
class DeleteEntity:
    entity: object


AccessType = Union[NewEntity, ListEntities, ShowEntity, UpdateEntity, DeleteEntity]


def check_authorization(policy: Callable, controller: Callable) -> Callable:
    """Run the controller only when the policy grants access.

    ``policy`` receives the request context and returns an AccessResult; on
    denial an error page with the reason is shown and the controller is
    never invoked.
    """

    def guarded(ctx):
        result = policy(ctx)
        if result.granted:
            return controller(ctx)
        return [h1([htxt("Access denied")]), struct("p", (), [htxt(result.reason)])]

    return guarded


def default_operation_allowed(access_type: AccessType, ctx=None) -> AccessResult:
    return Granted()


def disallow_delete(access_type: AccessType, ctx=None) -> AccessResult:
    if isinstance(access_type, DeleteEntity):
        return Denied("Delete not allowed!")
    return Granted()


def current_login(ctx) -> Optional[str]:
    return ctx.get_session_data(SESSION_LOGIN)


# ---------------------------------------------------------------------------
# Credentials
# ---------------------------------------------------------------------------


def hash_credential(login: str, password: str, salt: bytes) -> str:
    if len(salt) < 16:
        raise ValueError("salt must be at least 16 bytes")
    message = login.encode() + b"\x00" + password.encode()
    return hmac.new(salt, message, hashlib.sha256).hexdigest()


def make_random_password(length: int = 12) -> str:
    return "".join(secrets.choice(_PASSWORD_ALPHABET) for _ in range(length))


class CredentialStore:
    """File-backed credential table: one ``login:saltHex:hashHex`` per line."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def _read(self) -> dict[str, tuple[bytes, str]]:
        table = {}
        for line in self.path.read_text().splitlines():
            if not line.strip():
                continue
            login, salt_hex, hash_hex = line.split(":", 2)
            table[login] = (bytes.fromhex(salt_hex), hash_hex)
        return table

    def set_password(self, login: str, password: str) -> None:
        if ":" in login:
            raise ValueError("login names must not contain ':'")
        with self._lock:
            table = self._read()
            salt = secrets.token_bytes(16)
            table[login] = (salt, hash_credential(login, password, salt))
            lines = [
                f"{name}:{salt.hex()}:{digest}"
                for name, (salt, digest) in sorted(table.items())
            ]
            self.path.write_text("\n".join(lines) + "\n")

    def verify(self, login: str, password: str) -> bool:
        entry = self._read().get(login)
        if entry is None:
            return False
        salt, digest = entry
        return hmac.compare_digest(digest, hash_credential(login, password, salt))


# ---------------------------------------------------------------------------
# Login / logout controllers
# ---------------------------------------------------------------------------


def login_controller(ctx):
    """Login form; on success the login name lands in the session."""
    from .wui import run_form, w_pair, w_password, w_required_string, with_rendering, render_labels

    spec = with_rendering(
        w_pair(w_required_string(), w_password()),
        render_labels(["Login", "Password"]),
    )

    def on_submit(credentials):
        login, password = credentials

        def submit_ctrl(hctx):
            store = hctx.app.credentials
            if store is not None and store.verify(login, password):
                hctx.put_session_data(login, SESSION_LOGIN)
                hctx.set_page_message(f"Logged in as {login}")
                return hctx.app.run_reference(hctx, hctx.app.default_reference)
            hctx.set_page_message("Invalid login or password")
            return login_controller(hctx)

        return submit_ctrl

    current = current_login(ctx)
    heading = [h1([htxt("Login")])]
    if current is not None:
        heading.append(struct("p", (), [htxt(f"Currently logged in as {current}")]))
    return heading + run_form(ctx, spec, ("", ""), on_submit, submit_label="login")


def logout_controller(ctx):
    ctx.remove_session_data(SESSION_LOGIN)
    ctx.set_page_message("Logged out")
    return ctx.app.run_reference(ctx, ctx.app.default_reference)
