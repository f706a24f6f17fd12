"""Shared fixtures: the Blog model, a form scraper, and a live-app launcher."""

from __future__ import annotations

import socket
import subprocess
import sys
import time
from html.parser import HTMLParser
from pathlib import Path

import pytest

from spicey.erd import parse_erd
from spicey.scaffold import generate

FIXTURES = Path(__file__).parent / "fixtures"
BLOG_TERM = FIXTURES / "blog.erdterm"


@pytest.fixture(scope="session")
def blog_erd():
    return parse_erd(BLOG_TERM.read_text())


class FormScraper(HTMLParser):
    """Collects form fields and submit buttons from a rendered page.

    ``fields`` maps names to submitted values as a browser would send them
    for an untouched form; ``buttons`` maps submit labels to field names.
    """

    def __init__(self, text: str):
        super().__init__()
        self.fields: dict[str, list[str]] = {}
        self.buttons: dict[str, str] = {}
        self.selects: dict[str, dict] = {}
        self._select: str | None = None
        self._option: tuple[str, bool] | None = None
        self.feed(text)

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "input":
            kind = attrs.get("type", "text")
            name = attrs.get("name")
            if not name:
                return
            if kind == "submit":
                self.buttons[attrs.get("value", "")] = name
            elif kind == "checkbox":
                if "checked" in attrs:
                    self.fields.setdefault(name, []).append(attrs.get("value", "on"))
            else:
                self.fields.setdefault(name, []).append(attrs.get("value", ""))
        elif tag == "select":
            name = attrs.get("name")
            self._select = name
            self.selects[name] = {
                "options": [],
                "selected": [],
                "multiple": "multiple" in attrs,
            }
        elif tag == "option" and self._select is not None:
            self._option = (attrs.get("value", ""), "selected" in attrs)

    def handle_data(self, data):
        if self._option is not None and data.strip():
            value, selected = self._option
            info = self.selects[self._select]
            info["options"].append((value, data.strip()))

    def handle_endtag(self, tag):
        if tag == "option" and self._option is not None:
            value, selected = self._option
            info = self.selects[self._select]
            if not any(o[0] == value for o in info["options"]):
                info["options"].append((value, ""))
            if selected:
                info["selected"].append(value)
            self._option = None
        elif tag == "select" and self._select is not None:
            info = self.selects[self._select]
            values = info["selected"]
            if not values and not info["multiple"] and info["options"]:
                values = [info["options"][0][0]]
            for v in values:
                self.fields.setdefault(self._select, []).append(v)
            self._select = None

    def submission(self, label: str, overrides: dict | None = None) -> list[tuple[str, str]]:
        """Form data for pressing the named submit button."""
        data = {name: list(vs) for name, vs in self.fields.items()}
        for name, value in (overrides or {}).items():
            data[name] = value if isinstance(value, list) else [value]
        pairs = [(self.buttons[label], label)]
        for name, values in data.items():
            pairs += [(name, v) for v in values]
        return pairs


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class LiveApp:
    """A generated application running in a subprocess."""

    def __init__(self, app_dir: Path, db_path: Path | None = None, env=None):
        import os

        self.app_dir = Path(app_dir)
        self.port = free_port()
        self.base = f"http://127.0.0.1:{self.port}"
        self.db_path = db_path or self.app_dir / "data" / "test.db"
        full_env = dict(os.environ)
        full_env.update(env or {})
        self.proc = subprocess.Popen(
            [
                sys.executable,
                str(self.app_dir / "main.py"),
                "--port",
                str(self.port),
                "--db",
                str(self.db_path),
            ],
            cwd=self.app_dir,
            env=full_env,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        self._wait_ready()

    def _wait_ready(self, timeout: float = 10.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            if self.proc.poll() is not None:
                raise RuntimeError("application process exited during startup")
            try:
                with socket.create_connection(("127.0.0.1", self.port), timeout=0.2):
                    return
            except OSError:
                time.sleep(0.05)
        raise RuntimeError("application did not start listening in time")

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


@pytest.fixture(scope="session")
def blog_app_dir(tmp_path_factory, blog_erd):
    """A generated Blog application tree, shared across tests that boot it."""
    out = tmp_path_factory.mktemp("blogapp")
    generate(blog_erd, out, force=True)
    return out
