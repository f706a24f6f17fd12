"""HTML tree construction, escaping, serialization, and page layout."""

import re

from hypothesis import given
from hypothesis import strategies as st

from spicey.html import (
    FORM_TOKEN_FIELD,
    FormEnv,
    HandlerRef,
    PageLayout,
    Struct,
    Text,
    button,
    escape,
    fresh_token,
    h1,
    hidden_field,
    href,
    htxt,
    par,
    render_document,
    select_field,
    serialize,
    struct,
    table,
    text_field,
    text_of,
    ulist,
)


def test_escape_covers_metacharacters():
    assert escape('<a href="x">&') == "&lt;a href=&quot;x&quot;&gt;&amp;"


@given(st.text(st.characters(blacklist_categories=("Cs",)), max_size=200))
def test_escaped_text_never_leaks_raw_metacharacters(s):
    out = escape(s)
    assert "<" not in out and ">" not in out and '"' not in out
    assert not re.search(r"&(?!amp;|lt;|gt;|quot;)", out)


def test_htxt_escapes_content():
    assert htxt("<b>") == Text("&lt;b&gt;")
    assert serialize(htxt('say "hi" & bye')) == "say &quot;hi&quot; &amp; bye"


def test_serialize_nested_structures():
    doc = par([htxt("see "), href("/x?a=1&b=2", [htxt("here")])])
    assert serialize(doc) == '<p>see <a href="/x?a=1&amp;b=2">here</a></p>'


def test_serialize_void_elements_self_close():
    assert serialize(text_field("n", "v")) == '<input type="text" name="n" value="v" />'
    assert serialize(struct("br")) == "<br />"


def test_table_builds_rows_and_cells():
    doc = table([[[htxt("a")], [htxt("b")]], [[htxt("c")]]])
    assert serialize(doc) == "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td></tr></table>"


def test_ulist_wraps_items():
    assert serialize(ulist([[htxt("x")], [htxt("y")]])) == "<ul><li>x</li><li>y</li></ul>"


def test_button_encodes_handler_token():
    ref = HandlerRef("ab" * 16)
    out = serialize(button("save", ref))
    assert f'name="__h_{"ab" * 16}"' in out and 'value="save"' in out


def test_select_field_marks_selection_and_indices():
    out = serialize(select_field("s", ["x", "y"], selected=1))
    assert '<option value="0">x</option>' in out
    assert '<option value="1" selected="selected">y</option>' in out


def test_select_field_multiple_selection_set():
    out = serialize(select_field("s", ["x", "y", "z"], selected={0, 2}, multiple=True))
    assert 'multiple="multiple"' in out
    assert out.count('selected="selected"') == 2


def test_text_of_concatenates_leaves():
    doc = par([htxt("a"), struct("b", (), [htxt("b")]), htxt("c")])
    assert text_of(doc) == "abc"


def test_form_env_absent_fields_are_empty():
    env = FormEnv({"a": ["1", "2"]})
    assert env.all("a") == ["1", "2"]
    assert env.first("a") == "1"
    assert env.first("missing") is None
    assert env.all("missing") == []
    assert not env.has("missing")


def test_fresh_tokens_are_unique_hex():
    tokens = {fresh_token() for _ in range(50)}
    assert len(tokens) == 50
    assert all(re.fullmatch(r"[0-9a-f]{32}", t) for t in tokens)


def test_render_document_layout_regions():
    layout = PageLayout(title="T", menu=[htxt("m")], message="hello")
    doc = render_document(layout, [h1([htxt("body")])], form_token="t" * 32)
    assert doc.startswith("<!DOCTYPE html>\n")
    assert '<link rel="stylesheet" href="/public/style.css" />' in doc
    assert '<div id="menu">m</div>' in doc
    assert '<div id="message">hello</div>' in doc
    assert '<div id="content" class="spicey-content">' in doc
    assert doc.count("<form") == 1
    assert f'name="{FORM_TOKEN_FIELD}" value="{"t" * 32}"' in doc


def test_render_document_deterministic_with_fixed_token():
    layout = PageLayout(title="T")
    body = [par([htxt("x")])]
    one = render_document(layout, body, form_token="a" * 32)
    two = render_document(layout, body, form_token="a" * 32)
    assert one == two


def test_render_document_empty_message_region_is_empty():
    doc = render_document(PageLayout(), [], form_token="a" * 32)
    assert '<div id="message"></div>' in doc


def test_hidden_field_serialization():
    assert (
        serialize(hidden_field("k", "v"))
        == '<input type="hidden" name="k" value="v" />'
    )
