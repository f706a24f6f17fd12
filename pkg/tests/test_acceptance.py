"""End-to-end acceptance checks over the generated Blog application.

Each test covers one acceptance criterion and prints a single
``ACCEPTANCE <n> <description>: PASS/FAIL`` line to the terminal.
"""

import importlib.util
import random
import re
import shutil
import sys
import time
from contextlib import contextmanager
from datetime import datetime

import pytest
import requests

from spicey.erd import parse_erd
from spicey.routing import dispatch
from spicey.scaffold import generate
from spicey.session import ACTIVE_PROCESS, SESSION_COOKIE, SessionSlot, SessionStore
from spicey.storage import Database, derive_schema, query_all
from spicey.wui import (
    Ok,
    ROOT_PATH,
    w_bool,
    w_date_type,
    w_float,
    w_int,
    w_multi_select,
    w_select,
    w_string,
    w_tuple,
)

from tests.conftest import BLOG_TERM, FormScraper, LiveApp
from tests.test_storage import run_random_ops
from tests.test_wui import form_env_of


@contextmanager
def criterion(capsys, number, description):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {description}: FAIL")
        raise
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} {description}: PASS")


def submit(http, base, page_text, label, overrides=None):
    scraper = FormScraper(page_text)
    return http.post(base + "/", data=scraper.submission(label, overrides)).text


def snapshot_db(schema, db_path, tmp_path):
    """Open a copy of a live database file for direct inspection."""
    copy = tmp_path / f"snapshot-{time.time_ns()}.db"
    shutil.copy(db_path, copy)
    journal = db_path.with_name(db_path.name + ".journal")
    if journal.exists():
        shutil.copy(journal, copy.with_name(copy.name + ".journal"))
    return Database(schema, copy)


ENTRY_FORM = {
    "title": "f0_0",
    "text": "f0_1",
    "author": "f0_2",
    "date": "f0_3",
    "tags": "f0_4",
}


def entry_overrides(title, text="body", author="me"):
    fields = {
        ENTRY_FORM["title"]: title,
        ENTRY_FORM["text"]: text,
        ENTRY_FORM["author"]: author,
    }
    for i, v in enumerate(["2026", "8", "24", "10", "30", "0"]):
        fields[f"{ENTRY_FORM['date']}_{i}"] = v
    return fields


@pytest.fixture(scope="module")
def blog_schema(blog_erd):
    return derive_schema(blog_erd)


def test_acceptance_1_blog_end_to_end(capsys, blog_app_dir, tmp_path):
    with criterion(capsys, 1, "Blog end-to-end scripted HTTP session"):
        started = time.time()
        with LiveApp(blog_app_dir, db_path=tmp_path / "Blog.db") as app:
            http = requests.Session()
            # create an Entry (no tags exist yet)
            page = http.get(app.base + "/newEntry").text
            page = submit(http, app.base, page, "create", entry_overrides("First Post"))
            assert "Entry created" in page
            # create a Comment selecting that Entry
            page = http.get(app.base + "/newComment").text
            page = submit(
                http, app.base, page, "create",
                {"f0_0": "nice read", "f0_1": "reader",
                 "f0_2_0": "2026", "f0_2_1": "8", "f0_2_2": "24",
                 "f0_2_3": "11", "f0_2_4": "0", "f0_2_5": "0"},
            )
            assert "Comment created" in page
            # create two Tags
            for name in ("news", "tech"):
                page = http.get(app.base + "/newTag").text
                page = submit(http, app.base, page, "create", {"f0": name})
                assert "Tag created" in page
            # edit the Entry selecting both Tags
            page = http.get(app.base + "/listEntry").text
            page = submit(http, app.base, page, "edit")
            assert "Edit Entry" in page
            page = submit(http, app.base, page, "change",
                          {ENTRY_FORM["tags"]: ["0", "1"]})
            assert "Entry updated" in page
            # all list pages show the created data
            assert "First Post" in http.get(app.base + "/listEntry").text
            assert "nice read" in http.get(app.base + "/listComment").text
            tags_page = http.get(app.base + "/listTag").text
            assert "news" in tags_page and "tech" in tags_page
            # the entry's show page reflects the tag selection
            page = http.get(app.base + "/listEntry").text
            shown = submit(http, app.base, page, "show")
            assert "news" in shown and "tech" in shown
        assert time.time() - started < 30


def test_acceptance_2_constraint_safety(capsys, blog_app_dir, blog_schema, tmp_path):
    with criterion(capsys, 2, "constraint safety over HTTP with store inspection"):
        db_path = tmp_path / "Blog.db"
        with LiveApp(blog_app_dir, db_path=db_path) as app:
            http = requests.Session()
            page = http.get(app.base + "/newEntry").text
            assert "Entry created" in submit(
                http, app.base, page, "create", entry_overrides("Unique Title")
            )
            page = http.get(app.base + "/newComment").text
            assert "Comment created" in submit(
                http, app.base, page, "create",
                {"f0_0": "c", "f0_1": "a",
                 "f0_2_0": "2026", "f0_2_1": "1", "f0_2_2": "1",
                 "f0_2_3": "0", "f0_2_4": "0", "f0_2_5": "0"},
            )

            # (a) duplicate Title is rejected and the count is unchanged
            page = http.get(app.base + "/newEntry").text
            result = submit(
                http, app.base, page, "create", entry_overrides("Unique Title", "other")
            )
            assert "unique violation on Entry.Title" in result
            with snapshot_db(blog_schema, db_path, tmp_path) as db:
                assert len(db.run_query(query_all("Entry"))) == 1

            # (b) deleting the commented Entry is rejected
            page = http.get(app.base + "/listEntry").text
            confirm = submit(http, app.base, page, "delete")
            assert "Confirm deletion" in confirm
            result = submit(http, app.base, confirm, "delete")
            assert "still referenced by 1 Comment instance(s)" in result
            with snapshot_db(blog_schema, db_path, tmp_path) as db:
                assert len(db.run_query(query_all("Entry"))) == 1
                assert len(db.run_query(query_all("Comment"))) == 1

            # (c) deleting a Tag removes its links but no Entries
            page = http.get(app.base + "/newTag").text
            assert "Tag created" in submit(http, app.base, page, "create", {"f0": "temp"})
            page = http.get(app.base + "/listEntry").text
            page = submit(http, app.base, page, "edit")
            assert "Entry updated" in submit(
                http, app.base, page, "change", {ENTRY_FORM["tags"]: ["0"]}
            )
            with snapshot_db(blog_schema, db_path, tmp_path) as db:
                tag = db.run_query(query_all("Tag"))[0]
                assert db.run_query(query_all("Entry").related_to("Tagging", tag.key))
            page = http.get(app.base + "/listTag").text
            confirm = submit(http, app.base, page, "delete")
            result = submit(http, app.base, confirm, "delete")
            assert "Tag deleted" in result
            with snapshot_db(blog_schema, db_path, tmp_path) as db:
                assert db.run_query(query_all("Tag")) == []
                assert len(db.run_query(query_all("Entry"))) == 1
                import json

                assert json.loads(db.dump_state())["links"]["Tagging"] == []


def test_acceptance_3_persistence_property_suite(capsys, blog_schema):
    with criterion(capsys, 3, "1000 random operation sequences match the model oracle"):
        started = time.time()
        rng = random.Random(20260824)
        for _ in range(1000):
            run_random_ops(Database(blog_schema), rng, rng.randrange(1, 201))
        assert time.time() - started < 60


def _random_leaf(rng):
    kind = rng.randrange(7)
    if kind == 0:
        return w_string(), "".join(rng.choice("abc XYZ&<>\"'") for _ in range(rng.randrange(8)))
    if kind == 1:
        return w_int(), rng.randrange(-10**9, 10**9)
    if kind == 2:
        return w_float(), rng.uniform(-1e6, 1e6)
    if kind == 3:
        return w_bool(), rng.random() < 0.5
    if kind == 4:
        return w_date_type(), datetime(
            rng.randrange(1, 10000), rng.randrange(1, 13), rng.randrange(1, 29),
            rng.randrange(24), rng.randrange(60), rng.randrange(60),
        )
    if kind == 5:
        choices = [f"c{i}" for i in range(rng.randrange(1, 6))]
        return w_select(str, choices), rng.choice(choices)
    choices = [f"m{i}" for i in range(rng.randrange(0, 6))]
    picked = [c for c in choices if rng.random() < 0.5]
    return w_multi_select(str, choices), picked


def _random_spec(rng, depth):
    if depth <= 0 or rng.random() < 0.4:
        return _random_leaf(rng)
    parts = [_random_spec(rng, depth - 1) for _ in range(rng.randrange(2, 5))]
    return w_tuple(*[p[0] for p in parts]), tuple(p[1] for p in parts)


def test_acceptance_4_wui_round_trip(capsys):
    with criterion(capsys, 4, "500 random form specs satisfy decode after render"):
        rng = random.Random(99)
        for _ in range(500):
            spec, value = _random_spec(rng, 3)
            env = form_env_of(spec.render(ROOT_PATH, value))
            assert spec.decode(ROOT_PATH, env) == Ok(value)


def test_acceptance_5_routing_dispatch(capsys, blog_app_dir):
    with criterion(capsys, 5, "generated Blog route table dispatches exactly"):
        spec = importlib.util.spec_from_file_location(
            "blog_routes_under_test", blog_app_dir / "config" / "routes.py"
        )
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        routes = module.get_routes(None)
        assert dispatch("newEntry", routes) == "NewEntryController"
        assert dispatch("listEntry", routes) == "ListEntryController"
        assert dispatch("newComment", routes) == "NewCommentController"
        assert dispatch("listComment", routes) == "ListCommentController"
        assert dispatch("newTag", routes) == "NewTagController"
        assert dispatch("listTag", routes) == "ListTagController"
        assert dispatch("login", routes) == "LoginController"
        assert dispatch("processes", routes) == "ProcessListController"
        for unknown in ("", "nope", "newentry", "listEntryX", "ListEntry"):
            assert dispatch(unknown, routes) == "ListEntryController"


def test_acceptance_6_session_isolation(capsys):
    with criterion(capsys, 6, "session isolation over 200 random interleavings"):
        slot = SessionSlot("acceptance")
        rng = random.Random(6)
        for trial in range(200):
            store = SessionStore()
            sessions = ["a" * 32, "b" * 32]
            model = {s: {"data": None, "message": ""} for s in sessions}
            for _ in range(rng.randrange(5, 30)):
                sid = rng.choice(sessions)
                action = rng.randrange(4)
                if action == 0:
                    value = f"{trial}-{rng.randrange(100)}"
                    store.put(value, slot, sid)
                    model[sid]["data"] = value
                elif action == 1:
                    assert store.get(slot, sid) == model[sid]["data"]
                elif action == 2:
                    message = f"msg-{sid[:1]}-{rng.randrange(100)}"
                    store.set_page_message(message, sid)
                    model[sid]["message"] = message
                else:
                    # page messages are read-once and per-session
                    assert store.get_page_message(sid) == model[sid]["message"]
                    model[sid]["message"] = ""
            for sid in sessions:
                assert store.get(slot, sid) == model[sid]["data"]
                assert store.get_page_message(sid) == model[sid]["message"]


def test_acceptance_7_disallow_delete_swap(capsys, blog_erd, tmp_path):
    with criterion(capsys, 7, "disallow-delete policy blocks every delete attempt"):
        app_dir = tmp_path / "locked"
        generate(blog_erd, app_dir)
        access = app_dir / "config" / "access_control.py"
        patched = access.read_text().replace(
            "return Granted()", "return disallow_delete(access_type, ctx)"
        )
        access.write_text(patched)
        with LiveApp(app_dir, db_path=tmp_path / "Blog.db") as app:
            http = requests.Session()
            page = http.get(app.base + "/newEntry").text
            assert "Entry created" in submit(
                http, app.base, page, "create", entry_overrides("Keep Me")
            )
            page = http.get(app.base + "/newTag").text
            assert "Tag created" in submit(http, app.base, page, "create", {"f0": "t"})
            for list_page in ("/listEntry", "/listTag"):
                page = http.get(app.base + list_page).text
                denied = submit(http, app.base, page, "delete")
                assert "Delete not allowed!" in denied
            assert "Keep Me" in http.get(app.base + "/listEntry").text
            assert ">t<" in http.get(app.base + "/listTag").text


def test_acceptance_8_process_walkthrough(capsys, blog_app_dir, tmp_path):
    with criterion(capsys, 8, "tag-and-entry process walkthrough terminates cleanly"):
        sys.path.insert(0, str(blog_app_dir))
        try:
            for name in list(sys.modules):
                if name.split(".")[0] in (
                    "system", "config", "models", "views", "controllers"
                ):
                    del sys.modules[name]
            importlib.invalidate_caches()
            from system.assembly import build_application

            app = build_application(db_path=tmp_path / "Blog.db", sessions=SessionStore())
        finally:
            sys.path.remove(str(blog_app_dir))

        response = app.handle("GET", "/processes")
        sid = re.search(rf"{SESSION_COOKIE}=([0-9a-f]{{32}})", response.set_cookie).group(1)
        cookie = f"{SESSION_COOKIE}={sid}"
        assert "/processes/start/0" in response.body.decode()

        def post_form(page_text, label, overrides):
            pairs = FormScraper(page_text).submission(label, overrides)
            from urllib.parse import urlencode

            body = urlencode(pairs).encode()
            return app.handle("POST", "/", body=body, cookie_header=cookie).body.decode()

        page = app.handle(
            "GET", "/processes/start/0", cookie_header=cookie
        ).body.decode()
        assert "Create Tag" in page
        assert app.sessions.get(ACTIVE_PROCESS, sid) == 0

        page = post_form(page, "create", {"f0": "wizard-tag"})
        assert "Create Entry" in page
        assert app.sessions.get(ACTIVE_PROCESS, sid) == 1

        page = post_form(page, "create", entry_overrides("Wizard Entry"))
        assert "Tag list" in page and "wizard-tag" in page
        assert app.sessions.get(ACTIVE_PROCESS, sid) is None
        app.db.close()


def test_acceptance_9_generator_determinism_and_check(capsys, blog_erd, tmp_path):
    with criterion(capsys, 9, "deterministic generation and check exit codes"):
        a, b = tmp_path / "a", tmp_path / "b"
        generate(blog_erd, a)
        generate(blog_erd, b)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        for rel in files:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

        from tests.test_scaffold import run_cli

        corpus = {
            "blog.erdterm": (BLOG_TERM.read_text(), 0),
            "min.erdterm": (
                'ERD "A" [Entity "E" [Attribute "X" (IntDom Nothing) NoKey False]] []',
                0,
            ),
            "defaults.erdterm": (
                'ERD "B" [Entity "E" [Attribute "X" (FloatDom (Just 1.5)) NoKey True]] []',
                0,
            ),
            "pair.erdterm": (
                'ERD "C" [Entity "E" [Attribute "X" (IntDom Nothing) NoKey False],'
                ' Entity "F" [Attribute "Y" (IntDom Nothing) NoKey False]]'
                ' [Relationship "R" [REnd "E" "a" (Exactly 1), REnd "F" "b" (Between 0 Infinite)]]',
                0,
            ),
            "bounded.erdterm": (
                'ERD "D" [Entity "E" [Attribute "X" (IntDom Nothing) NoKey False],'
                ' Entity "F" [Attribute "Y" (IntDom Nothing) NoKey False]]'
                ' [Relationship "R" [REnd "E" "a" (Between 0 2), REnd "F" "b" (Between 0 3)]]',
                0,
            ),
            "syntax.erdterm": ("ERD [", 1),
            "lowercase.erdterm": (
                'ERD "x" [Entity "E" [Attribute "A" (IntDom Nothing) NoKey False]] []',
                1,
            ),
            "nullkey.erdterm": (
                'ERD "F" [Entity "E" [Attribute "A" (IntDom Nothing) Unique True]] []',
                1,
            ),
            "onetoone.erdterm": (
                'ERD "G" [Entity "E" [Attribute "A" (IntDom Nothing) NoKey False]]'
                ' [Relationship "R" [REnd "E" "a" (Exactly 1), REnd "E" "b" (Exactly 1)]]',
                1,
            ),
            "baddefault.erdterm": (
                'ERD "H" [Entity "E" [Attribute "A" (BoolDom (Just 3)) NoKey False]] []',
                1,
            ),
        }
        assert len(corpus) == 10
        for name, (source, expected) in corpus.items():
            path = tmp_path / name
            path.write_text(source)
            assert run_cli("check", str(path)).returncode == expected, name
