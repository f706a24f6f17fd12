"""Request loop of assembled applications.

A controller is a callable from the request context to a page body (a list
of HTML expressions); the runtime wraps that body in the standard layout
with the route menu and the read-once page message, and owns all cookie,
form and dispatch plumbing. Requests may be served concurrently; shared
state lives behind the synchronized session store and database.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import parse_qsl, unquote

from .html import (
    FormEnv,
    HANDLER_FIELD_PREFIX,
    HandlerRef,
    HtmlExp,
    PageLayout,
    h1,
    htxt,
    render_document,
    struct,
)
from .routing import ERROR_CONTROLLER, Route, controller_params, dispatch, menu_from_routes
from .session import (
    SESSION_COOKIE,
    SessionSlot,
    SessionStore,
    fresh_session_id,
    valid_session_id,
)
from .processes import NO_PROCESSES, Processes

DEFAULT_PORT = 8080

Controller = Callable[["RequestContext"], list]

_CONTENT_TYPES = {
    ".css": "text/css",
    ".html": "text/html",
    ".ico": "image/x-icon",
    ".js": "text/javascript",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".txt": "text/plain",
}


@dataclass
class Response:
    status: int
    body: bytes
    content_type: str = "text/html; charset=utf-8"
    set_cookie: Optional[str] = None


@dataclass
class RequestContext:
    app: "Application"
    method: str
    segments: list[str]
    form: FormEnv
    session_id: str
    fresh_session: bool
    params: list[str] = field(default_factory=list)

    # -- session convenience -------------------------------------------------

    def get_session_data(self, slot: SessionSlot):
        return self.app.sessions.get(slot, self.session_id)

    def put_session_data(self, value, slot: SessionSlot) -> None:
        self.app.sessions.put(value, slot, self.session_id)

    def remove_session_data(self, slot: SessionSlot) -> None:
        self.app.sessions.remove(slot, self.session_id)

    def set_page_message(self, message: str) -> None:
        self.app.sessions.set_page_message(message, self.session_id)

    def register_handler(self, handler: Controller) -> HandlerRef:
        return self.app.sessions.register_handler(handler, self.session_id)

    def error_page(self, message: str) -> list:
        return display_error(message)(self)


def display_error(message: str) -> Controller:
    """A controller showing the message prominently; no state is changed."""

    def controller(ctx):
        shown = message if message else "operation failed"
        return [h1([htxt("Error")]), struct("p", (("class", "error"),), [htxt(shown)])]

    return controller


def _error_controller(ctx) -> list:
    return display_error("no such page")(ctx)


class Application:
    """Everything a running app needs: routes, controllers, shared state."""

    def __init__(
        self,
        name: str,
        routes: Callable[[RequestContext], list[Route]],
        controllers: dict[str, Controller],
        default_reference: str,
        processes: Processes = NO_PROCESSES,
        db=None,
        credentials=None,
        sessions: Optional[SessionStore] = None,
        static_dir=None,
    ):
        self.name = name
        self.routes = routes
        self.controllers = dict(controllers)
        self.controllers.setdefault(ERROR_CONTROLLER, _error_controller)
        self.default_reference = default_reference
        self.processes = processes
        self.db = db
        self.credentials = credentials
        self.sessions = sessions or SessionStore()
        self.static_dir = Path(static_dir) if static_dir is not None else None

    def run_reference(self, ctx: RequestContext, reference: str) -> list:
        controller = self.controllers.get(reference, self.controllers[ERROR_CONTROLLER])
        return controller(ctx)

    # -- request handling ----------------------------------------------------

    def handle(
        self,
        method: str,
        path: str,
        body: bytes = b"",
        cookie_header: str = "",
    ) -> Response:
        try:
            return self._handle(method, path, body, cookie_header)
        except Exception:
            page = "<!DOCTYPE html>\n<html><body><h1>Internal error</h1></body></html>\n"
            return Response(500, page.encode())

    def _handle(self, method: str, path: str, body: bytes, cookie_header: str) -> Response:
        path = path.split("?", 1)[0]
        segments = [s for s in path.split("/") if s]
        if segments and segments[0] == "public":
            return self._serve_static(segments[1:])

        cookies = _parse_cookies(cookie_header)
        session_id = cookies.get(SESSION_COOKIE, "")
        fresh = not valid_session_id(session_id)
        if fresh:
            session_id = fresh_session_id()

        form = FormEnv()
        if method == "POST":
            values: dict[str, list[str]] = {}
            for name, value in parse_qsl(body.decode(), keep_blank_values=True):
                values.setdefault(name, []).append(value)
            form = FormEnv(values)

        ctx = RequestContext(
            app=self,
            method=method,
            segments=segments,
            form=form,
            session_id=session_id,
            fresh_session=fresh,
        )

        handler_token = None
        if method == "POST":
            for name in form.names():
                if name.startswith(HANDLER_FIELD_PREFIX):
                    handler_token = name[len(HANDLER_FIELD_PREFIX):]
                    break

        if handler_token is not None:
            handler = self.sessions.resolve_handler(handler_token, session_id)
            if handler is None:
                page_body = [
                    h1([htxt("Form expired")]),
                    struct(
                        "p",
                        (),
                        [htxt("This form has expired; please navigate to the page again.")],
                    ),
                ]
            else:
                page_body = handler(ctx)
        else:
            first = unquote(segments[0]) if segments else ""
            routes = self.routes(ctx)
            reference = dispatch(first, routes)
            ctx.params = controller_params(segments)
            page_body = self.run_reference(ctx, reference)

        layout = PageLayout(
            title=self.name,
            menu=[menu_from_routes(self.routes(ctx))],
            message=self.sessions.get_page_message(session_id),
        )
        document = render_document(layout, page_body)
        cookie = None
        if fresh:
            cookie = f"{SESSION_COOKIE}={session_id}; Path=/; HttpOnly"
        return Response(200, document.encode(), set_cookie=cookie)

    def _serve_static(self, segments: list[str]) -> Response:
        if self.static_dir is None or not segments:
            return Response(404, b"not found", content_type="text/plain")
        target = (self.static_dir / Path(*[unquote(s) for s in segments])).resolve()
        root = self.static_dir.resolve()
        if root not in target.parents and target != root:
            return Response(404, b"not found", content_type="text/plain")
        if not target.is_file():
            return Response(404, b"not found", content_type="text/plain")
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return Response(200, target.read_bytes(), content_type=content_type)

    # -- HTTP ----------------------------------------------------------------

    def make_server(self, port: int = DEFAULT_PORT, host: str = "127.0.0.1"):
        app = self

        class Handler(BaseHTTPRequestHandler):
            def _respond(self, method: str):
                length = int(self.headers.get("Content-Length", "0") or "0")
                body = self.rfile.read(length) if length else b""
                response = app.handle(
                    method, self.path, body, self.headers.get("Cookie", "")
                )
                self.send_response(response.status)
                self.send_header("Content-Type", response.content_type)
                self.send_header("Content-Length", str(len(response.body)))
                if response.set_cookie:
                    self.send_header("Set-Cookie", response.set_cookie)
                self.end_headers()
                self.wfile.write(response.body)

            def do_GET(self):
                self._respond("GET")

            def do_POST(self):
                self._respond("POST")

            def log_message(self, fmt, *args):
                pass

        return ThreadingHTTPServer((host, port), Handler)

    def serve(self, port: int = DEFAULT_PORT, host: str = "127.0.0.1"):
        """Run until interrupted."""
        server = self.make_server(port, host)
        try:
            server.serve_forever()
        finally:
            server.server_close()


def _parse_cookies(header: str) -> dict[str, str]:
    cookies = {}
    for part in header.split(";"):
        if "=" in part:
            name, value = part.split("=", 1)
            cookies[name.strip()] = value.strip()
    return cookies


def next_controller(ctx: RequestContext, controller: Controller) -> HandlerRef:
    """Register a controller continuation for embedding in buttons and links."""
    return ctx.register_handler(controller)
