"""URL routing: route tables, first-match dispatch, and the derived menu.

Controller references are plain strings naming top-level controllers (for
example ``"ListEntryController"``); the application's assembly unit maps
each reference to its implementation, which keeps route tables free of
import cycles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union
from urllib.parse import unquote

from .html import HtmlExp, href, htxt, struct

#: Reference returned when no route matches and for internal error pages.
ERROR_CONTROLLER = "ErrorController"


@dataclass(frozen=True)
class Exact:
    name: str

    def matches(self, path: str) -> bool:
        return path == self.name


@dataclass(frozen=True)
class Prefix:
    name: str

    def matches(self, path: str) -> bool:
        return path.startswith(self.name)


@dataclass(frozen=True)
class Always:
    def matches(self, path: str) -> bool:
        return True


@dataclass(frozen=True)
class Custom:
    predicate: Callable[[str], bool]

    def matches(self, path: str) -> bool:
        return bool(self.predicate(path))


RouteMatcher = Union[Exact, Prefix, Always, Custom]


@dataclass(frozen=True)
class Route:
    display_name: str
    matcher: RouteMatcher
    target: str  # controller reference


def dispatch(path: str, routes: list[Route]) -> str:
    """First route whose matcher accepts the path; error reference otherwise."""
    for route in routes:
        if route.matcher.matches(path):
            return route.target
    return ERROR_CONTROLLER


def controller_params(segments: list[str]) -> list[str]:
    """URL path segments after the controller segment, percent-decoded."""
    return [unquote(s) for s in segments[1:]]


def menu_from_routes(routes: list[Route]) -> HtmlExp:
    """Navigation list with one link per Exact route, in route order."""
    items = [
        struct("li", (), [href("/" + r.matcher.name, [htxt(r.display_name)])])
        for r in routes
        if isinstance(r.matcher, Exact)
    ]
    return struct("ul", (("class", "menu"),), items)
