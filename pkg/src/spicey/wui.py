"""Composable, typed web-form specifications.

A :class:`WuiSpec` pairs the rendering of a widget tree for a value with a
validating decode of submitted form data back into a value. Decoding the
fields produced by rendering a value (with no user edits) yields that value
again; on invalid input the decode returns a re-renderable widget tree that
keeps the user's raw input and carries inline error messages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from typing import Any, Callable, Optional, Union

from .html import (
    FormEnv,
    HtmlExp,
    Struct,
    htxt,
    password_field,
    select_field,
    struct,
    table,
    text_field,
)


@dataclass(frozen=True)
class Ok:
    value: Any


@dataclass(frozen=True)
class Invalid:
    """Failed decode, carrying the form re-rendered with inline errors."""

    html: HtmlExp
    errors: int


Decoded = Union[Ok, Invalid]


def error_span(message: str) -> Struct:
    return struct("span", (("class", "error"),), [htxt(message)])


def count_error_spans(h: HtmlExp) -> int:
    if not isinstance(h, Struct):
        return 0
    own = 1 if ("class", "error") in h.attrs else 0
    return own + sum(count_error_spans(c) for c in h.children)


def vertical(parts: list[HtmlExp]) -> Struct:
    return struct("div", (("class", "wui"),), [struct("div", (), [p]) for p in parts])


def render_labels(labels: list[str]) -> Callable[[list[HtmlExp]], Struct]:
    """Two-column label/widget table; label count must match widget count."""

    def arrange(parts: list[HtmlExp]) -> Struct:
        rows = [[[htxt(label)], [part]] for label, part in zip(labels, parts)]
        # extra parts (inline error reports) become label-less rows
        rows += [[[], [part]] for part in parts[len(labels):]]
        return table(rows)

    arrange.expected_parts = len(labels)
    return arrange


@dataclass
class _Parts:
    ok: bool
    value: Any
    parts: list  # widget re-rendering from the submitted environment
    errors: int


@dataclass(frozen=True)
class WuiSpec:
    """A form spec over values of some type.

    ``parts_render``/``parts_decode`` produce the top-level widget list; the
    arrangement folds that list into a single HTML tree.
    """

    parts_render: Callable[[str, Any], list]
    parts_decode: Callable[[str, FormEnv], _Parts]
    arity: int = 1
    arrange: Callable[[list], HtmlExp] = vertical
    error_message: Optional[str] = None

    def render(self, path: str, value: Any) -> HtmlExp:
        return self.arrange(self.parts_render(path, value))

    def decode(self, path: str, env: FormEnv) -> Decoded:
        result = self.parts_decode(path, env)
        if result.ok:
            return Ok(result.value)
        return Invalid(self.arrange(result.parts), result.errors)


def with_rendering(spec: WuiSpec, arrange: Callable[[list], HtmlExp]) -> WuiSpec:
    expected = getattr(arrange, "expected_parts", None)
    if expected is not None and expected != spec.arity:
        raise ValueError(
            f"arrangement expects {expected} widgets but the spec has {spec.arity}"
        )
    return replace(spec, arrange=arrange)


def with_error_message(spec: WuiSpec, message: str) -> WuiSpec:
    return replace(spec, error_message=message)


def with_condition(
    spec: WuiSpec, predicate: Callable[[Any], bool], message: str | None = None
) -> WuiSpec:
    """Accept only values satisfying the predicate."""

    def parts_decode(path: str, env: FormEnv) -> _Parts:
        result = spec.parts_decode(path, env)
        if result.ok and not predicate(result.value):
            msg = message or spec.error_message or "invalid input"
            return _Parts(False, None, result.parts + [error_span(msg)], result.errors + 1)
        return result

    return replace(spec, parts_decode=parts_decode)


# ---------------------------------------------------------------------------
# Leaf widgets
# ---------------------------------------------------------------------------


def _leaf(render_widget, parse):
    """Single-input spec from a widget renderer and a text parser.

    ``render_widget(path, text)`` builds the input element; ``parse(text)``
    returns the value or raises ``ValueError`` with the error message.
    """

    def parts_render(path: str, value: Any) -> list:
        return [render_widget(path, value, None)]

    def parts_decode(path: str, env: FormEnv) -> _Parts:
        raw = env.first(path) or ""
        try:
            return _Parts(True, parse(raw), [render_widget(path, None, raw)], 0)
        except ValueError as exc:
            widget = struct(
                "span", (), [render_widget(path, None, raw), error_span(str(exc))]
            )
            return _Parts(False, None, [widget], 1)

    return WuiSpec(parts_render, parts_decode)


def w_string() -> WuiSpec:
    def widget(path, value, raw):
        return text_field(path, raw if raw is not None else value)

    return _leaf(widget, lambda raw: raw)


def w_password() -> WuiSpec:
    def widget(path, value, raw):
        return password_field(path)

    def parts_render(path, value):
        return [password_field(path)]

    def parts_decode(path, env):
        return _Parts(True, env.first(path) or "", [password_field(path)], 0)

    return WuiSpec(parts_render, parts_decode)


def w_required_string() -> WuiSpec:
    return with_condition(w_string(), lambda s: s != "", "a value is required")


def w_int() -> WuiSpec:
    def widget(path, value, raw):
        return text_field(path, raw if raw is not None else str(value))

    def parse(raw: str) -> int:
        try:
            return int(raw.strip(), 10)
        except ValueError:
            raise ValueError("not an integer")

    return _leaf(widget, parse)


def w_float() -> WuiSpec:
    def widget(path, value, raw):
        return text_field(path, raw if raw is not None else repr(float(value)))

    def parse(raw: str) -> float:
        try:
            return float(raw.strip())
        except ValueError:
            raise ValueError("not a number")

    return _leaf(widget, parse)


def w_bool() -> WuiSpec:
    def parts_render(path, value):
        attrs = [("type", "checkbox"), ("name", path), ("value", "True")]
        if value:
            attrs.append(("checked", "checked"))
        return [struct("input", attrs)]

    def parts_decode(path, env):
        value = env.first(path) == "True"
        return _Parts(True, value, parts_render(path, value), 0)

    return WuiSpec(parts_render, parts_decode)


_DATE_UNITS = ("year", "month", "day", "hour", "minute", "second")


def w_date_type() -> WuiSpec:
    """Calendar time as six numeric sub-fields (Y/M/D/h/m/s)."""

    def field_values(value: datetime) -> list[str]:
        return [
            str(value.year),
            str(value.month),
            str(value.day),
            str(value.hour),
            str(value.minute),
            str(value.second),
        ]

    def widget(path, texts):
        cells = []
        for i, text in enumerate(texts):
            cells.append(
                struct(
                    "input",
                    (
                        ("type", "text"),
                        ("name", f"{path}_{i}"),
                        ("value", text),
                        ("size", "4"),
                        ("title", _DATE_UNITS[i]),
                    ),
                )
            )
        return struct("span", (("class", "wui-date"),), cells)

    def parts_render(path, value):
        return [widget(path, field_values(value))]

    def parts_decode(path, env):
        texts = [env.first(f"{path}_{i}") or "" for i in range(6)]
        try:
            numbers = [int(t.strip(), 10) for t in texts]
            value = datetime(*numbers)
        except ValueError:
            bad = struct("span", (), [widget(path, texts), error_span("invalid date")])
            return _Parts(False, None, [bad], 1)
        return _Parts(True, value, [widget(path, texts)], 0)

    return WuiSpec(parts_render, parts_decode)


def w_select(show: Callable[[Any], str], choices: list) -> WuiSpec:
    """Selection box; the submitted value is the choice index."""
    if not choices:
        raise ValueError("w_select requires a nonempty choice list")
    labels = [show(c) for c in choices]

    def index_of(value) -> int:
        for i, c in enumerate(choices):
            if c == value:
                return i
        return 0

    def parts_render(path, value):
        return [select_field(path, labels, selected=index_of(value))]

    def parts_decode(path, env):
        raw = env.first(path) or ""
        try:
            index = int(raw, 10)
            if not 0 <= index < len(choices):
                raise ValueError
        except ValueError:
            bad = struct(
                "span",
                (),
                [select_field(path, labels), error_span("invalid selection")],
            )
            return _Parts(False, None, [bad], 1)
        widget = select_field(path, labels, selected=index)
        return _Parts(True, choices[index], [widget], 0)

    return WuiSpec(parts_render, parts_decode)


def w_multi_select(show: Callable[[Any], str], choices: list) -> WuiSpec:
    """Multi-selection over a choice list, decoding to a deduplicated sublist
    in choice order. An empty choice list is allowed and always decodes to []."""
    labels = [show(c) for c in choices]

    def selected_set(values: list) -> set[int]:
        return {i for i, c in enumerate(choices) if c in values}

    def parts_render(path, value):
        return [select_field(path, labels, selected=selected_set(value), multiple=True)]

    def parts_decode(path, env):
        indices = set()
        for raw in env.all(path):
            try:
                index = int(raw, 10)
                if not 0 <= index < len(choices):
                    raise ValueError
            except ValueError:
                bad = struct(
                    "span",
                    (),
                    [
                        select_field(path, labels, multiple=True),
                        error_span("invalid selection"),
                    ],
                )
                return _Parts(False, None, [bad], 1)
            indices.add(index)
        widget = select_field(path, labels, selected=indices, multiple=True)
        return _Parts(True, [choices[i] for i in sorted(indices)], [widget], 0)

    return WuiSpec(parts_render, parts_decode)


# ---------------------------------------------------------------------------
# Tuple combinators
# ---------------------------------------------------------------------------


def w_tuple(*specs: WuiSpec) -> WuiSpec:
    """Combine component specs into a spec over tuples, in order."""
    if len(specs) < 2:
        raise ValueError("w_tuple needs at least two components")

    def parts_render(path, value):
        if len(value) != len(specs):
            raise ValueError(f"expected a {len(specs)}-tuple")
        return [
            spec.render(f"{path}_{i}", component)
            for i, (spec, component) in enumerate(zip(specs, value))
        ]

    def parts_decode(path, env):
        values = []
        parts = []
        errors = 0
        for i, spec in enumerate(specs):
            result = spec.decode(f"{path}_{i}", env)
            if isinstance(result, Ok):
                values.append(result.value)
                # redisplay from the submitted environment, without errors
                sub = spec.parts_decode(f"{path}_{i}", env)
                parts.append(spec.arrange(sub.parts))
            else:
                errors += result.errors
                parts.append(result.html)
        return _Parts(errors == 0, tuple(values) if errors == 0 else None, parts, errors)

    return WuiSpec(parts_render, parts_decode, arity=len(specs))


def w_pair(a: WuiSpec, b: WuiSpec) -> WuiSpec:
    return w_tuple(a, b)


def w_triple(a: WuiSpec, b: WuiSpec, c: WuiSpec) -> WuiSpec:
    return w_tuple(a, b, c)


def w4_tuple(a, b, c, d) -> WuiSpec:
    return w_tuple(a, b, c, d)


def w5_tuple(a, b, c, d, e) -> WuiSpec:
    return w_tuple(a, b, c, d, e)


def w6_tuple(a, b, c, d, e, f) -> WuiSpec:
    return w_tuple(a, b, c, d, e, f)


# ---------------------------------------------------------------------------
# Form execution
# ---------------------------------------------------------------------------

ROOT_PATH = "f0"


def run_form(ctx, spec: WuiSpec, initial, on_submit, submit_label: str = "submit"):
    """Render a form plus submit button and register its decode handler.

    ``on_submit`` maps the decoded value to a controller. On invalid input the
    handler re-renders the form (user input retained, errors inline) under a
    fresh handler registration.
    """
    from .html import button, h2

    def handler(hctx):
        decoded = spec.decode(ROOT_PATH, hctx.form)
        if isinstance(decoded, Ok):
            return on_submit(decoded.value)(hctx)
        token = hctx.register_handler(handler)
        return [decoded.html, button(submit_label, token)]

    token = ctx.register_handler(handler)
    return [spec.render(ROOT_PATH, initial), button(submit_label, token)]
