"""User processes: starting, advancing, terminating state machines."""

from spicey.html import h1, htxt, serialize, text_of
from spicey.processes import (
    NO_PROCESSES,
    Processes,
    next_in_process_or,
    process_menu_controller,
    process_route_controller,
    start_process,
)
from spicey.server import Application, RequestContext
from spicey.session import ACTIVE_PROCESS, SessionStore
from spicey.html import FormEnv


def page(name):
    def controller(ctx):
        return [h1([htxt(name)])]

    return controller


TAG_AND_ENTRY = Processes(
    start_states=(("Insert new tag and entry", 0),),
    controller_of={0: "NewTagController", 1: "NewEntryController", 2: "ListTagController"}.get,
    next_state=lambda state, result: {0: 1, 1: 2}.get(state),
)


def make_ctx(processes=TAG_AND_ENTRY, controllers=None, params=()):
    app = Application(
        name="T",
        routes=lambda ctx: [],
        controllers=controllers
        or {
            "NewTagController": page("new tag"),
            "NewEntryController": page("new entry"),
            "ListTagController": page("list tag"),
            "HomeController": page("home"),
        },
        default_reference="HomeController",
        processes=processes,
        sessions=SessionStore(),
    )
    return RequestContext(
        app=app,
        method="GET",
        segments=[],
        form=FormEnv(),
        session_id="a" * 32,
        fresh_session=False,
        params=list(params),
    )


def body_text(body):
    return "".join(text_of(h) for h in body)


def test_start_process_runs_first_controller_and_stores_state():
    ctx = make_ctx()
    body = start_process(ctx, 0)
    assert body_text(body) == "new tag"
    assert ctx.get_session_data(ACTIVE_PROCESS) == 0


def test_start_process_rejects_bad_index():
    ctx = make_ctx()
    assert "Error" in body_text(start_process(ctx, 7))
    assert ctx.get_session_data(ACTIVE_PROCESS) is None


def test_next_without_active_process_runs_default():
    ctx = make_ctx()
    body = next_in_process_or(ctx, page("fallback"))
    assert body_text(body) == "fallback"


def test_process_advances_through_all_states():
    ctx = make_ctx()
    start_process(ctx, 0)
    body = next_in_process_or(ctx, page("fallback"))
    assert body_text(body) == "new entry"
    assert ctx.get_session_data(ACTIVE_PROCESS) == 1
    body = next_in_process_or(ctx, page("fallback"))
    assert body_text(body) == "list tag"
    # the last state has no successor: the process ends with its page
    assert ctx.get_session_data(ACTIVE_PROCESS) is None
    body = next_in_process_or(ctx, page("fallback"))
    assert body_text(body) == "fallback"


def test_single_state_process_clears_immediately():
    spec = Processes(
        start_states=(("only", 5),),
        controller_of=lambda st: "NewTagController",
        next_state=lambda st, result: None,
    )
    ctx = make_ctx(processes=spec)
    body = start_process(ctx, 0)
    assert body_text(body) == "new tag"
    assert ctx.get_session_data(ACTIVE_PROCESS) is None


def test_unknown_controller_reference_aborts_process():
    spec = Processes(
        start_states=(("broken", 0),),
        controller_of=lambda st: "MissingController",
        next_state=lambda st, result: 1,
    )
    ctx = make_ctx(processes=spec)
    body = start_process(ctx, 0)
    assert "Error" in body_text(body)
    assert ctx.get_session_data(ACTIVE_PROCESS) is None


def test_starting_a_process_replaces_the_active_one():
    spec = Processes(
        start_states=(("first", 0), ("second", 9)),
        controller_of=lambda st: "NewTagController" if st in (0, 1) else "ListTagController",
        next_state=lambda st, result: {0: 1, 9: 10}.get(st),
    )
    ctx = make_ctx(processes=spec)
    start_process(ctx, 0)
    start_process(ctx, 1)
    assert ctx.get_session_data(ACTIVE_PROCESS) == 9


def test_menu_lists_start_links():
    ctx = make_ctx()
    out = serialize(process_menu_controller(ctx)[1])
    assert '<a href="/processes/start/0">Insert new tag and entry</a>' in out


def test_menu_with_no_processes():
    ctx = make_ctx(processes=NO_PROCESSES)
    assert "No processes defined." in body_text(process_menu_controller(ctx))


def test_route_controller_dispatches_start_params():
    ctx = make_ctx(params=["start", "0"])
    assert body_text(process_route_controller(ctx)) == "new tag"
    assert ctx.get_session_data(ACTIVE_PROCESS) == 0
    ctx = make_ctx(params=["start", "nope"])
    assert "Error" in body_text(process_route_controller(ctx))
    ctx = make_ctx(params=[])
    assert "Insert new tag and entry" in body_text(process_route_controller(ctx))
