"""Cookie-backed session identity and a typed, named session-data store.

The store is a single synchronized structure shared by all requests. Each
slot holds at most one value per session; entries expire after a horizon of
inactivity (default 60 minutes). The clock is injectable for tests.
"""

from __future__ import annotations

import re
import secrets
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .html import HandlerRef, fresh_token

SESSION_COOKIE = "spicey_session"
DEFAULT_EXPIRY_SECONDS = 60 * 60
HANDLER_CAPACITY = 100

_SESSION_ID_RE = re.compile(r"[0-9a-f]{32}$")


@dataclass(frozen=True)
class SessionSlot:
    """A globally named slot of per-session data."""

    name: str


PAGE_MESSAGE = SessionSlot("pageMessage")
SESSION_LOGIN = SessionSlot("sessionLogin")
ACTIVE_PROCESS = SessionSlot("activeProcess")
HANDLER_REGISTRY = SessionSlot("handlerRegistry")


def fresh_session_id() -> str:
    return secrets.token_hex(16)


def valid_session_id(value: str) -> bool:
    return bool(_SESSION_ID_RE.match(value or ""))


class SessionStore:
    def __init__(
        self,
        expiry_seconds: float = DEFAULT_EXPIRY_SECONDS,
        clock: Callable[[], float] = time.time,
    ):
        self.expiry_seconds = expiry_seconds
        self.clock = clock
        self._lock = threading.RLock()
        self._entries: dict[tuple[str, str], tuple[float, Any]] = {}

    def _fresh(self, touched: float) -> bool:
        return self.clock() - touched <= self.expiry_seconds

    def get(self, slot: SessionSlot, session_id: str) -> Optional[Any]:
        with self._lock:
            entry = self._entries.get((slot.name, session_id))
            if entry is None or not self._fresh(entry[0]):
                return None
            return entry[1]

    def put(self, value: Any, slot: SessionSlot, session_id: str) -> None:
        with self._lock:
            self._entries[(slot.name, session_id)] = (self.clock(), value)

    def remove(self, slot: SessionSlot, session_id: str) -> None:
        with self._lock:
            self._entries.pop((slot.name, session_id), None)

    def mutate(self, slot: SessionSlot, session_id: str, fn: Callable[[Any], Any]) -> Any:
        """Atomically replace the slot value with ``fn(current)``."""
        with self._lock:
            current = self.get(slot, session_id)
            value = fn(current)
            self._entries[(slot.name, session_id)] = (self.clock(), value)
            return value

    def purge_expired(self, now: Optional[float] = None) -> int:
        if now is None:
            now = self.clock()
        with self._lock:
            stale = [
                key
                for key, (touched, _) in self._entries.items()
                if now - touched > self.expiry_seconds
            ]
            for key in stale:
                del self._entries[key]
            return len(stale)

    # -- page messages ------------------------------------------------------

    def set_page_message(self, message: str, session_id: str) -> None:
        self.put(message, PAGE_MESSAGE, session_id)

    def get_page_message(self, session_id: str) -> str:
        with self._lock:
            message = self.get(PAGE_MESSAGE, session_id)
            self.remove(PAGE_MESSAGE, session_id)
            return message if message is not None else ""

    # -- handler registry ---------------------------------------------------

    def register_handler(self, handler: Callable, session_id: str) -> HandlerRef:
        """FIFO-bounded registration of a continuation; returns its token."""
        token = fresh_token()
        with self._lock:
            registry = self.get(HANDLER_REGISTRY, session_id)
            if registry is None:
                registry = OrderedDict()
            registry[token] = handler
            while len(registry) > HANDLER_CAPACITY:
                registry.popitem(last=False)
            self.put(registry, HANDLER_REGISTRY, session_id)
        return HandlerRef(token)

    def resolve_handler(self, token: str, session_id: str) -> Optional[Callable]:
        """Look up a registered handler; tokens stay valid until evicted."""
        with self._lock:
            registry = self.get(HANDLER_REGISTRY, session_id)
            if registry is None:
                return None
            return registry.get(token)
