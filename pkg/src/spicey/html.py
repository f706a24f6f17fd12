"""HTML documents as a value tree, plus serialization and page layout."""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from typing import Union

#: Tags serialized self-closed, without children.
VOID_ELEMENTS = frozenset(
    {"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta"}
)

#: Reserved form-field prefixes wired by the request runtime.
FORM_TOKEN_FIELD = "__form"
HANDLER_FIELD_PREFIX = "__h_"


@dataclass(frozen=True)
class Text:
    """A text node; content is stored already escaped."""

    content: str


@dataclass(frozen=True)
class Struct:
    tag: str
    attrs: tuple[tuple[str, str], ...] = ()
    children: tuple["HtmlExp", ...] = ()


HtmlExp = Union[Text, Struct]


def escape(s: str) -> str:
    return (
        s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def htxt(s: str) -> Text:
    return Text(escape(s))


def struct(tag: str, attrs=(), children=()) -> Struct:
    return Struct(tag, tuple(tuple(a) for a in attrs), tuple(children))


def par(children) -> Struct:
    return struct("p", (), children)


def italic(children) -> Struct:
    return struct("i", (), children)


def bold(children) -> Struct:
    return struct("b", (), children)


def h1(children) -> Struct:
    return struct("h1", (), children)


def h2(children) -> Struct:
    return struct("h2", (), children)


def ulist(items) -> Struct:
    return struct("ul", (), [struct("li", (), item) for item in items])


def href(url: str, children) -> Struct:
    return struct("a", (("href", url),), children)


def table(rows) -> Struct:
    """Rows are lists of cells; each cell is a list of HtmlExp."""
    return struct(
        "table",
        (),
        [
            struct("tr", (), [struct("td", (), cell) for cell in row])
            for row in rows
        ],
    )


@dataclass(frozen=True)
class HandlerRef:
    """Opaque reference to a server-side continuation registered for a session."""

    token: str


def fresh_token() -> str:
    return secrets.token_hex(16)


def button(label: str, handler: HandlerRef) -> Struct:
    return struct(
        "input",
        (("type", "submit"), ("name", HANDLER_FIELD_PREFIX + handler.token), ("value", label)),
    )


def text_field(name: str, value: str) -> Struct:
    return struct("input", (("type", "text"), ("name", name), ("value", value)))


def password_field(name: str) -> Struct:
    return struct("input", (("type", "password"), ("name", name), ("value", "")))


def hidden_field(name: str, value: str) -> Struct:
    return struct("input", (("type", "hidden"), ("name", name), ("value", value)))


def select_field(name: str, options, selected: int = -1, multiple: bool = False) -> Struct:
    """Selection box over option labels; the submitted value is the index."""
    attrs = [("name", name)]
    if multiple:
        attrs.append(("multiple", "multiple"))
    opts = []
    for i, label in enumerate(options):
        oattrs = [("value", str(i))]
        if (multiple and isinstance(selected, (set, frozenset)) and i in selected) or i == selected:
            oattrs.append(("selected", "selected"))
        opts.append(struct("option", oattrs, [htxt(label)]))
    return struct("select", attrs, opts)


def text_of(h: HtmlExp) -> str:
    """Concatenation of all text leaves in document order."""
    if isinstance(h, Text):
        return h.content
    return "".join(text_of(c) for c in h.children)


class FormEnv:
    """Submitted form data; absent fields read as empty lists."""

    def __init__(self, values: dict[str, list[str]] | None = None):
        self._values = dict(values or {})

    def all(self, name: str) -> list[str]:
        return list(self._values.get(name, []))

    def first(self, name: str) -> str | None:
        vs = self._values.get(name)
        return vs[0] if vs else None

    def has(self, name: str) -> bool:
        return bool(self._values.get(name))

    def names(self) -> list[str]:
        return list(self._values)

    def __repr__(self):
        return f"FormEnv({self._values!r})"


def serialize(h: HtmlExp) -> str:
    if isinstance(h, Text):
        return h.content
    attrs = "".join(f' {name}="{escape(value)}"' for name, value in h.attrs)
    if h.tag in VOID_ELEMENTS:
        return f"<{h.tag}{attrs} />"
    inner = "".join(serialize(c) for c in h.children)
    return f"<{h.tag}{attrs}>{inner}</{h.tag}>"


@dataclass
class PageLayout:
    title: str = "Spicey Application"
    stylesheet: str = "/public/style.css"
    menu: list = field(default_factory=list)  # list of HtmlExp
    message: str = ""


def render_document(layout: PageLayout, body, form_token: str | None = None) -> str:
    """Full HTML page: head, menu region, message region, one content region.

    The whole content region is a single POST form so that submit buttons
    anywhere in the body reach the handler runtime. Output is deterministic
    for equal inputs; pass ``form_token`` explicitly to fix the form marker.
    """
    if form_token is None:
        form_token = fresh_token()
    head = struct(
        "head",
        (),
        [
            struct("meta", (("charset", "utf-8"),)),
            struct("title", (), [htxt(layout.title)]),
            struct("link", (("rel", "stylesheet"), ("href", layout.stylesheet))),
        ],
    )
    message_children = [htxt(layout.message)] if layout.message else []
    content = struct(
        "form",
        (("method", "post"), ("action", "")),
        [hidden_field(FORM_TOKEN_FIELD, form_token)] + list(body),
    )
    page_body = struct(
        "body",
        (),
        [
            struct("div", (("id", "menu"),), list(layout.menu)),
            struct("div", (("id", "message"),), message_children),
            struct("div", (("id", "content"), ("class", "spicey-content")), [content]),
        ],
    )
    html = struct("html", (), [head, page_body])
    return "<!DOCTYPE html>\n" + serialize(html) + "\n"
