"""Declarative multi-step user processes over controller references.

A process is a state machine: named start states, a state-to-controller
mapping, and a transition function consulted whenever a controller finishes
an interaction. The current state lives in the session; at most one process
is active per session, and starting a new one replaces it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .html import h1, htxt, href, struct, ulist
from .session import ACTIVE_PROCESS


@dataclass(frozen=True)
class Processes:
    """Specification of the available user processes.

    ``next_state`` returns the successor state or ``None`` to terminate; if a
    spec has several possible successors the author picks the first.
    """

    start_states: tuple = ()  # (description, state) pairs
    controller_of: Callable[[Any], str] = lambda st: ""
    next_state: Callable[[Any, Optional[str]], Any] = lambda st, result: None


NO_PROCESSES = Processes()


def _spec(ctx) -> Processes:
    return ctx.app.processes


def start_process(ctx, start_index: int):
    """Activate the chosen start state and run its controller."""
    spec = _spec(ctx)
    if not 0 <= start_index < len(spec.start_states):
        return ctx.error_page(f"no such process: {start_index}")
    _, state = spec.start_states[start_index]
    ctx.put_session_data(state, ACTIVE_PROCESS)
    return _run_state(ctx, spec, state)


def next_in_process_or(ctx, default_controller, result: Optional[str] = None):
    """Continue the active process, or run the default controller.

    A successor state with no further successor is terminal: its controller
    still runs, but the process ends with it.
    """
    spec = _spec(ctx)
    current = ctx.get_session_data(ACTIVE_PROCESS)
    if current is None:
        return default_controller(ctx)
    successor = spec.next_state(current, result)
    if successor is None:
        ctx.remove_session_data(ACTIVE_PROCESS)
        return default_controller(ctx)
    ctx.put_session_data(successor, ACTIVE_PROCESS)
    return _run_state(ctx, spec, successor)


def _run_state(ctx, spec: Processes, state):
    try:
        reference = spec.controller_of(state)
        controller = ctx.app.controllers[reference]
    except (KeyError, ValueError):
        ctx.remove_session_data(ACTIVE_PROCESS)
        return ctx.error_page(f"no controller for process state {state!r}")
    if spec.next_state(state, None) is None:
        # terminal state: show its page, then the process is over
        ctx.remove_session_data(ACTIVE_PROCESS)
    return controller(ctx)


def process_route_controller(ctx):
    """Route target for ``/processes``: menu, or ``/processes/start/<i>``."""
    if len(ctx.params) >= 2 and ctx.params[0] == "start":
        try:
            index = int(ctx.params[1])
        except ValueError:
            return ctx.error_page(f"bad process index {ctx.params[1]!r}")
        return start_process(ctx, index)
    return process_menu_controller(ctx)


def process_menu_controller(ctx):
    """List all start states as links that launch the process."""
    spec = _spec(ctx)
    if not spec.start_states:
        return [h1([htxt("Processes")]), struct("p", (), [htxt("No processes defined.")])]
    items = [
        [href(f"/processes/start/{i}", [htxt(description)])]
        for i, (description, _) in enumerate(spec.start_states)
    ]
    return [h1([htxt("Processes")]), ulist(items)]
