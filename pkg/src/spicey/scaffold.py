"""Compile an ``.erdterm`` description into a runnable web application tree.

The emitted tree follows the MVC layout (``models/``, ``views/``,
``controllers/``, ``config/``, ``system/``, ``scripts/``, ``public/``) and
consists of thin typed wrappers over the runtime library. Generation is a
pure function of the ERD: two runs over identical input produce
byte-identical trees.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from .erd import (
    ERD,
    Attribute,
    Between,
    Domain,
    DomainKind,
    Entity,
    ERDError,
    Exactly,
    ManyToMany,
    OneToMany,
    classify_relationships,
    validate_erd,
)


class GenerateError(Exception):
    pass


def snake(name: str) -> str:
    text = re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", name).lower()
    if keyword.iskeyword(text):
        text += "_"
    return text


def plural(name: str) -> str:
    if re.search(r"[^aeiou]y$", name, re.IGNORECASE):
        return name[:-1] + "ies"
    if name.endswith(("s", "x", "sh", "ch")):
        return name + "es"
    return name + "s"


_ZERO_VALUES = {
    DomainKind.INT: "0",
    DomainKind.FLOAT: "0.0",
    DomainKind.BOOL: "False",
    DomainKind.STRING: '""',
    DomainKind.DATE: "datetime.now().replace(microsecond=0)",
}

_WIDGETS = {
    DomainKind.INT: "w_int()",
    DomainKind.FLOAT: "w_float()",
    DomainKind.BOOL: "w_bool()",
    DomainKind.DATE: "w_date_type()",
}

_TUPLE_COMBINATORS = {2: "w_pair", 3: "w_triple", 4: "w4_tuple", 5: "w5_tuple", 6: "w6_tuple"}


def _py_literal(value) -> str:
    if isinstance(value, datetime):
        return (
            f"datetime({value.year}, {value.month}, {value.day}, "
            f"{value.hour}, {value.minute}, {value.second})"
        )
    return repr(value)


def _initial_expr(attr: Attribute) -> str:
    if attr.domain.default is not None:
        return _py_literal(attr.domain.default)
    return _ZERO_VALUES[attr.domain.kind]


def _widget_expr(attr: Attribute) -> str:
    if attr.domain.kind is DomainKind.STRING:
        return "w_string()" if attr.null_allowed else "w_required_string()"
    return _WIDGETS[attr.domain.kind]


@dataclass
class _EntityInfo:
    entity: Entity
    owners: list[OneToMany]  # this entity carries the FK
    members: list[ManyToMany]  # this entity is end A

    @property
    def name(self) -> str:
        return self.entity.name

    @property
    def snake(self) -> str:
        return snake(self.entity.name)

    @property
    def attrs(self) -> tuple[Attribute, ...]:
        return self.entity.attributes

    @property
    def component_count(self) -> int:
        return len(self.attrs) + len(self.owners) + len(self.members)

    @property
    def short_attr(self) -> Optional[Attribute]:
        for attr in self.attrs:
            if attr.unique:
                return attr
        return None

    @property
    def labels(self) -> list[str]:
        return (
            [a.name for a in self.attrs]
            + [o.one_end.role for o in self.owners]
            + [m.end_b.role for m in self.members]
        )


class _Generator:
    def __init__(self, erd: ERD):
        self.erd = erd
        self.model_module = snake(erd.name)
        shapes = classify_relationships(erd)
        self.shapes = shapes
        self.entities = [
            _EntityInfo(
                entity,
                owners=[
                    s
                    for s in shapes
                    if isinstance(s, OneToMany) and s.many_end.entity == entity.name
                ],
                members=[
                    s
                    for s in shapes
                    if isinstance(s, ManyToMany) and s.end_a.entity == entity.name
                ],
            )
            for entity in erd.entities
        ]
        self.by_name = {info.name: info for info in self.entities}

    def info(self, name: str) -> _EntityInfo:
        return self.by_name[name]

    # -- shared naming -------------------------------------------------------

    def creation_name(self, info: _EntityInfo) -> str:
        if not info.owners:
            return f"new_{info.snake}"
        suffix = "_and_".join(
            f"{snake(o.one_end.entity)}_{snake(o.relationship.name)}_key"
            for o in info.owners
        )
        return f"new_{info.snake}_with_{suffix}"

    def query_all_name(self, info: _EntityInfo) -> str:
        return f"query_all_{plural(info.snake)}"

    # -- tree ----------------------------------------------------------------

    def build_tree(self) -> dict[str, str]:
        tree: dict[str, str] = {}
        tree["main.py"] = self.gen_main()
        tree["README.md"] = self.gen_readme()
        tree["models/__init__.py"] = ""
        tree[f"models/{self.model_module}.py"] = self.gen_model()
        tree["views/__init__.py"] = ""
        tree[f"views/{self.model_module}_entities_to_html.py"] = self.gen_entities_to_html()
        tree["controllers/__init__.py"] = ""
        tree["config/__init__.py"] = ""
        tree["config/routes.py"] = self.gen_routes()
        tree["config/access_control.py"] = self.gen_access_control()
        tree["config/user_processes.py"] = self.gen_user_processes()
        tree["system/__init__.py"] = ""
        tree["system/assembly.py"] = self.gen_assembly()
        tree["scripts/run.sh"] = self.gen_run_script()
        tree["scripts/check.sh"] = self.gen_check_script()
        tree["scripts/add_user.py"] = self.gen_add_user()
        tree["public/style.css"] = STYLE_CSS
        for info in self.entities:
            tree[f"views/{info.snake}_view.py"] = self.gen_view(info)
            tree[f"controllers/{info.snake}_controller.py"] = self.gen_controller(info)
        return tree

    # -- models --------------------------------------------------------------

    def gen_model(self) -> str:
        e = self.erd
        lines = [
            f'"""Data model for {e.name}: schema and typed database operations."""',
            "",
            "from datetime import datetime",
            "",
            "from spicey.erd import (",
            "    ERD, Entity, Attribute, Domain, DomainKind, Relationship, REnd,",
            "    Exactly, Between,",
            ")",
            "from spicey.storage import (",
            "    Database, EntityKey, derive_schema, null_last, query_all,",
            ")",
            "",
            "ERD_SPEC = ERD(",
            f"    name={e.name!r},",
            "    entities=(",
        ]
        for entity in e.entities:
            lines.append(f"        Entity({entity.name!r}, (")
            for attr in entity.attributes:
                default = (
                    "" if attr.domain.default is None
                    else f", {_py_literal(attr.domain.default)}"
                )
                lines.append(
                    f"            Attribute({attr.name!r}, "
                    f"Domain(DomainKind.{attr.domain.kind.name}{default}), "
                    f"unique={attr.unique}, null_allowed={attr.null_allowed}),"
                )
            lines.append("        )),")
        lines.append("    ),")
        lines.append("    relationships=(")
        for rel in e.relationships:
            lines.append(f"        Relationship(")
            lines.append(f"            {rel.name!r},")
            for end in rel.ends:
                card = end.cardinality
                if isinstance(card, Exactly):
                    card_expr = f"Exactly({card.n})"
                else:
                    card_expr = f"Between({card.low}, {card.high!r})"
                lines.append(f"            REnd({end.entity!r}, {end.role!r}, {card_expr}),")
            lines.append("        ),")
        lines.append("    ),")
        lines.append(")")
        lines += [
            "",
            "SCHEMA = derive_schema(ERD_SPEC)",
            "",
            "",
            "def open_database(path):",
            "    return Database(SCHEMA, path)",
        ]
        for info in self.entities:
            lines += self._model_entity_block(info)
        lines += self._model_query_block()
        return "\n".join(lines) + "\n"

    def _model_entity_block(self, info: _EntityInfo) -> list[str]:
        attr_params = [snake(a.name) for a in info.attrs]
        owner_params = [f"{snake(o.relationship.name)}_key" for o in info.owners]
        member_params = [f"{snake(m.relationship.name)}_keys" for m in info.members]
        attrs_dict = ", ".join(
            f"{a.name!r}: {snake(a.name)}" for a in info.attrs
        )
        owners_dict = ", ".join(
            f"{o.relationship.name!r}: {p}"
            for o, p in zip(info.owners, owner_params)
        )
        create_params = (
            ["db"]
            + attr_params
            + owner_params
            + [f"{p}=()" for p in member_params]
        )
        lines = [
            "",
            "",
            f"# -- {info.name} {'-' * max(1, 69 - len(info.name))}",
            "",
            f"def {self.creation_name(info)}({', '.join(create_params)}):",
            f"    attrs = {{{attrs_dict}}}",
        ]
        links_dict = ", ".join(
            f"{m.relationship.name!r}: list({p})"
            for m, p in zip(info.members, member_params)
        )
        lines.append(
            f"    return db.new_entity({info.name!r}, attrs, "
            f"owners={{{owners_dict}}}, links={{{links_dict}}})"
        )
        update_params = ["db", info.snake] + [f"{p}=None" for p in member_params]
        lines += ["", "", f"def update_{info.snake}({', '.join(update_params)}):"]
        if info.members:
            sets = ", ".join(
                f"{m.relationship.name!r}: list({p})"
                for m, p in zip(info.members, member_params)
            )
            guard = " or ".join(f"{p} is not None" for p in member_params)
            lines += [
                "    links = None",
                f"    if {guard}:",
                "        links = {}",
            ]
            for m, p in zip(info.members, member_params):
                lines += [
                    f"        if {p} is not None:",
                    f"            links[{m.relationship.name!r}] = list({p})",
                ]
            lines.append(f"    return db.update_entity({info.snake}, links=links)")
        else:
            lines.append(f"    return db.update_entity({info.snake})")
        order_names = ", ".join(f"{a.name!r}" for a in info.attrs)
        trailing = "," if len(info.attrs) == 1 else ""
        lines += [
            "",
            "",
            f"def delete_{info.snake}(db, key):",
            "    return db.delete_entity(key)",
            "",
            "",
            f"def get_{info.snake}(db, key):",
            "    return db.get_entity(key)",
            "",
            "",
            f"def {self.query_all_name(info)}(db):",
            f"    return db.run_query(query_all({info.name!r}))",
            "",
            "",
            f"def {info.snake}_order_key({info.snake}):",
            f"    return tuple(null_last({info.snake}.attrs[name]) "
            f"for name in ({order_names}{trailing}))",
            "",
            "",
            f"def leq_{info.snake}(a, b):",
            f"    return {info.snake}_order_key(a) <= {info.snake}_order_key(b)",
        ]
        return lines

    def _model_query_block(self) -> list[str]:
        lines: list[str] = []
        for shape in self.shapes:
            rel = shape.relationship.name
            if isinstance(shape, OneToMany):
                many, one = shape.many_end.entity, shape.one_end.entity
                lines += [
                    "",
                    "",
                    f"def query_{plural(snake(many))}_of_{snake(one)}(db, {snake(one)}_key):",
                    f"    return db.run_query(query_all({many!r})"
                    f".related_to({rel!r}, {snake(one)}_key))",
                ]
            else:
                a, b = shape.end_a.entity, shape.end_b.entity
                for subject, other in ((b, a), (a, b)):
                    lines += [
                        "",
                        "",
                        f"def query_{plural(snake(subject))}_of_{snake(other)}"
                        f"(db, {snake(other)}_key):",
                        f"    return db.run_query(query_all({subject!r})"
                        f".related_to({rel!r}, {snake(other)}_key))",
                    ]
        return lines

    # -- entity HTML representations ----------------------------------------

    def gen_entities_to_html(self) -> str:
        lines = [
            f'"""Labels and short/list renderings of {self.erd.name} entities."""',
            "",
            "from spicey.html import htxt",
            "",
            "",
            "def show_attribute(value):",
            "    if value is None:",
            '        return ""',
            '    if hasattr(value, "strftime"):',
            '        return value.strftime("%Y-%m-%d %H:%M:%S")',
            "    return str(value)",
        ]
        for info in self.entities:
            labels = ", ".join(repr(l) for l in info.labels)
            lines += [
                "",
                "",
                f"{info.snake.upper()}_LABELS = [{labels}]",
                "",
                "",
                f"def {info.snake}_to_short_view({info.snake}):",
            ]
            if info.short_attr is not None:
                lines.append(
                    f"    return show_attribute({info.snake}.attrs[{info.short_attr.name!r}])"
                )
            else:
                lines.append(f"    return str({info.snake}.key.value)")
            cells = ", ".join(
                f"[htxt(show_attribute({info.snake}.attrs[{a.name!r}]))]"
                for a in info.attrs
            )
            lines += [
                "",
                "",
                f"def {info.snake}_to_list_view({info.snake}):",
                f"    return [{cells}]",
            ]
        return "\n".join(lines) + "\n"

    # -- views ---------------------------------------------------------------

    def _owner_param(self, o: OneToMany) -> str:
        return snake(o.relationship.name)

    def _member_param(self, m: ManyToMany) -> str:
        return snake(m.relationship.name)

    def gen_view(self, info: _EntityInfo) -> str:
        owner_choices = [f"{self._owner_param(o)}_choices" for o in info.owners]
        member_choices = [f"{self._member_param(m)}_choices" for m in info.members]
        choices = owner_choices + member_choices
        current = [f"current_{self._owner_param(o)}" for o in info.owners] + [
            f"current_{self._member_param(m)}" for m in info.members
        ]
        short_views = sorted(
            {self.info(o.one_end.entity).snake for o in info.owners}
            | {self.info(m.end_b.entity).snake for m in info.members}
        )
        wui_imports = sorted(
            {_widget_expr(a).split("(")[0] for a in info.attrs}
            | ({"w_select"} if info.owners else set())
            | ({"w_multi_select"} if info.members else set())
            | {"render_labels", "run_form", "with_rendering"}
            | (
                {_TUPLE_COMBINATORS[info.component_count]}
                if 2 <= info.component_count <= 6
                else ({"w_tuple"} if info.component_count > 6 else set())
            )
        )
        html_names = "button, h1, htxt, table"
        view_imports = ", ".join(
            sorted(
                [f"{info.snake.upper()}_LABELS", f"{info.snake}_to_list_view", "show_attribute"]
                + [f"{s}_to_short_view" for s in sorted(set(short_views) | {info.snake})]
            )
        )
        lines = [
            f'"""Views for {info.name} entities."""',
            "",
            "from datetime import datetime",
            "",
            f"from spicey.html import {html_names}",
            "from spicey.server import next_controller",
            "from spicey.wui import (",
            f"    {', '.join(wui_imports)},",
            ")",
            "",
            f"from models.{self.model_module} import {info.snake}_order_key",
            f"from views.{self.model_module}_entities_to_html import (",
            f"    {view_imports},",
            ")",
            "",
            "",
            f"def w_{info.snake}({', '.join(choices)}):",
        ]
        widgets = [_widget_expr(a) for a in info.attrs]
        widgets += [
            f"w_select({self.info(o.one_end.entity).snake}_to_short_view, "
            f"{self._owner_param(o)}_choices)"
            for o in info.owners
        ]
        widgets += [
            f"w_multi_select({self.info(m.end_b.entity).snake}_to_short_view, "
            f"{self._member_param(m)}_choices)"
            for m in info.members
        ]
        if info.component_count == 1:
            spec_expr = widgets[0]
            lines.append("    return with_rendering(")
            lines.append(f"        {spec_expr},")
        else:
            combinator = _TUPLE_COMBINATORS.get(info.component_count, "w_tuple")
            lines.append("    return with_rendering(")
            lines.append(f"        {combinator}(")
            for w in widgets:
                lines.append(f"            {w},")
            lines.append("        ),")
        lines.append(f"        render_labels({info.snake.upper()}_LABELS),")
        lines.append("    )")

        initial_create = [_initial_expr(a) for a in info.attrs]
        initial_create += [f"{c}[0]" for c in owner_choices]
        initial_create += ["[]" for _ in member_choices]
        initial_edit = [f"{info.snake}.attrs[{a.name!r}]" for a in info.attrs]
        initial_edit += current

        lines += [
            "",
            "",
            f"def create_{info.snake}_view(ctx, {''.join(c + ', ' for c in choices)}on_create):",
            f"    initial = {self._tuple_expr(initial_create, info)}",
            f'    return [h1([htxt("Create {info.name}")])] + run_form(',
            f"        ctx, w_{info.snake}({', '.join(choices)}), initial, on_create,",
            '        submit_label="create",',
            "    )",
            "",
            "",
            f"def edit_{info.snake}_view(ctx, {info.snake}, "
            f"{''.join(c + ', ' for c in current)}{''.join(c + ', ' for c in choices)}on_update):",
            f"    initial = {self._tuple_expr(initial_edit, info)}",
            f'    return [h1([htxt("Edit {info.name}")])] + run_form(',
            f"        ctx, w_{info.snake}({', '.join(choices)}), initial, on_update,",
            '        submit_label="change",',
            "    )",
            "",
            "",
            f"def show_{info.snake}_view(ctx, {info.snake}"
            f"{''.join(', ' + c for c in current)}):",
            "    rows = [",
        ]
        for a in info.attrs:
            lines.append(
                f"        [[htxt({a.name!r})], "
                f"[htxt(show_attribute({info.snake}.attrs[{a.name!r}]))]],"
            )
        for o in info.owners:
            other = self.info(o.one_end.entity).snake
            lines.append(
                f"        [[htxt({o.one_end.role!r})], "
                f"[htxt({other}_to_short_view(current_{self._owner_param(o)}))]],"
            )
        for m in info.members:
            other = self.info(m.end_b.entity).snake
            lines.append(
                f"        [[htxt({m.end_b.role!r})], "
                f'[htxt(", ".join({other}_to_short_view(x) '
                f"for x in current_{self._member_param(m)}))]],"
            )
        lines += [
            "    ]",
            f'    return [h1([htxt("{info.name}")]), table(rows)]',
            "",
            "",
            f"def list_{info.snake}_view(ctx, {plural(info.snake)}, "
            "show_ctrl, edit_ctrl, delete_ctrl):",
            f"    rows = [[[htxt(label)] for label in "
            f"{info.snake.upper()}_LABELS[:3]]]",
            f"    for {info.snake} in sorted({plural(info.snake)}, "
            f"key={info.snake}_order_key):",
            f"        rows.append({info.snake}_to_list_view({info.snake}) + [[",
            f'            button("show", next_controller(ctx, show_ctrl({info.snake}))),',
            f'            button("edit", next_controller(ctx, edit_ctrl({info.snake}))),',
            f'            button("delete", next_controller(ctx, delete_ctrl({info.snake}))),',
            "        ]])",
            f'    return [h1([htxt("{info.name} list")]), table(rows)]',
        ]
        return "\n".join(lines) + "\n"

    def _tuple_expr(self, items: list[str], info: _EntityInfo) -> str:
        if info.component_count == 1:
            return items[0]
        return "(" + ", ".join(items) + ")"

    def _unpack_targets(self, info: _EntityInfo) -> list[str]:
        return (
            [snake(a.name) for a in info.attrs]
            + [f"chosen_{self._owner_param(o)}" for o in info.owners]
            + [f"chosen_{self._member_param(m)}" for m in info.members]
        )

    # -- controllers ---------------------------------------------------------

    def gen_controller(self, info: _EntityInfo) -> str:
        model_names = sorted(
            {
                self.creation_name(info),
                f"update_{info.snake}",
                f"delete_{info.snake}",
                f"get_{info.snake}",
                self.query_all_name(info),
            }
            | {self.query_all_name(self.info(o.one_end.entity)) for o in info.owners}
            | {f"get_{self.info(o.one_end.entity).snake}" for o in info.owners}
            | {self.query_all_name(self.info(m.end_b.entity)) for m in info.members}
            | {
                f"query_{plural(snake(m.end_b.entity))}_of_{info.snake}"
                for m in info.members
            }
        )
        view_names = ", ".join(
            f"{kind}_{info.snake}_view" for kind in ("create", "edit", "list", "show")
        )
        policy = f"{info.snake}_operation_allowed"
        unpack = ", ".join(self._unpack_targets(info))
        if info.component_count > 1:
            unpack_line = f"                ({unpack}) = value"
        else:
            unpack_line = f"                {unpack} = value"
        creation_args = (
            ["hctx.app.db"]
            + [snake(a.name) for a in info.attrs]
            + [f"chosen_{self._owner_param(o)}.key" for o in info.owners]
            + [
                f"{self._member_param(m)}_keys="
                f"[x.key for x in chosen_{self._member_param(m)}]"
                for m in info.members
            ]
        )
        choices = [f"{self._owner_param(o)}_choices" for o in info.owners] + [
            f"{self._member_param(m)}_choices" for m in info.members
        ]
        current = [f"current_{self._owner_param(o)}" for o in info.owners] + [
            f"current_{self._member_param(m)}" for m in info.members
        ]
        lines = [
            f'"""Controllers for {info.name} entities."""',
            "",
            "from spicey.auth import (",
            "    DeleteEntity, ListEntities, NewEntity, ShowEntity, UpdateEntity,",
            "    check_authorization,",
            ")",
            "from spicey.html import button, h1, htxt, par",
            "from spicey.processes import next_in_process_or",
            "from spicey.server import display_error",
            "",
            f"from config.access_control import {policy}",
            f"from models.{self.model_module} import (",
            f"    {', '.join(model_names)},",
            ")",
            f"from views.{self.model_module}_entities_to_html import {info.snake}_to_short_view",
            f"from views.{info.snake}_view import (",
            f"    {view_names},",
            ")",
            "",
            "",
            f"def list_{info.snake}_controller(ctx):",
            "    def run(rctx):",
            f"        {plural(info.snake)} = {self.query_all_name(info)}(rctx.app.db)",
            f"        return list_{info.snake}_view(",
            f"            rctx, {plural(info.snake)}, show_{info.snake}_controller,",
            f"            edit_{info.snake}_controller, delete_{info.snake}_controller,",
            "        )",
            f"    return check_authorization(lambda c: {policy}(ListEntities(), c), run)(ctx)",
            "",
            "",
            f"def new_{info.snake}_controller(ctx):",
            "    def run(rctx):",
        ]
        for o in info.owners:
            one = self.info(o.one_end.entity)
            lines += [
                f"        {self._owner_param(o)}_choices = "
                f"{self.query_all_name(one)}(rctx.app.db)",
                f"        if not {self._owner_param(o)}_choices:",
                f'            return display_error("no {one.name} available for '
                f'{o.relationship.name}")(rctx)',
            ]
        for m in info.members:
            other = self.info(m.end_b.entity)
            lines.append(
                f"        {self._member_param(m)}_choices = "
                f"{self.query_all_name(other)}(rctx.app.db)"
            )
        lines += [
            "",
            "        def on_create(value):",
            "            def submit(hctx):",
            unpack_line,
            f"                result = {self.creation_name(info)}(",
            f"                    {', '.join(creation_args)},",
            "                )",
            "                if result.committed:",
            f'                    hctx.set_page_message("{info.name} created")',
            f"                    return next_in_process_or(hctx, "
            f"list_{info.snake}_controller, None)",
            "                return display_error(result.reason)(hctx)",
            "            return submit",
            "",
            f"        return create_{info.snake}_view(rctx, "
            f"{''.join(c + ', ' for c in choices)}on_create)",
            f"    return check_authorization(lambda c: {policy}(NewEntity(), c), run)(ctx)",
            "",
            "",
            f"def show_{info.snake}_controller({info.snake}):",
            "    def controller(ctx):",
            "        def run(rctx):",
        ]
        lines += self._related_lookup_lines(info, indent="            ")
        lines += [
            f"            return show_{info.snake}_view(rctx, {info.snake}"
            f"{''.join(', ' + c for c in current)})",
            f"        return check_authorization(lambda c: {policy}"
            f"(ShowEntity({info.snake}), c), run)(ctx)",
            "    return controller",
            "",
            "",
            f"def edit_{info.snake}_controller({info.snake}):",
            "    def controller(ctx):",
            "        def run(rctx):",
        ]
        lines += self._related_lookup_lines(info, indent="            ")
        for o in info.owners:
            one = self.info(o.one_end.entity)
            lines.append(
                f"            {self._owner_param(o)}_choices = "
                f"{self.query_all_name(one)}(rctx.app.db)"
            )
        for m in info.members:
            other = self.info(m.end_b.entity)
            lines.append(
                f"            {self._member_param(m)}_choices = "
                f"{self.query_all_name(other)}(rctx.app.db)"
            )
        update_attr_kwargs = ", ".join(f"{a.name}={snake(a.name)}" for a in info.attrs)
        update_fk_kwargs = ", ".join(
            f"{o.relationship.name}=chosen_{self._owner_param(o)}.key" for o in info.owners
        )
        updated_expr = f"{info.snake}.with_attrs({update_attr_kwargs})"
        if info.owners:
            updated_expr += f".with_fks({update_fk_kwargs})"
        update_args = ["hctx.app.db", "updated"] + [
            f"{self._member_param(m)}_keys=[x.key for x in chosen_{self._member_param(m)}]"
            for m in info.members
        ]
        lines += [
            "",
            "            def on_update(value):",
            "                def submit(hctx):",
            "    " + unpack_line,
            f"                    updated = {updated_expr}",
            f"                    result = update_{info.snake}(",
            f"                        {', '.join(update_args)},",
            "                    )",
            "                    if result.committed:",
            f'                        hctx.set_page_message("{info.name} updated")',
            f"                        return next_in_process_or(hctx, "
            f"list_{info.snake}_controller, None)",
            "                    return display_error(result.reason)(hctx)",
            "                return submit",
            "",
            f"            return edit_{info.snake}_view(",
            f"                rctx, {info.snake}, "
            f"{''.join(c + ', ' for c in current)}{''.join(c + ', ' for c in choices)}on_update,",
            "            )",
            f"        return check_authorization(lambda c: {policy}"
            f"(UpdateEntity({info.snake}), c), run)(ctx)",
            "    return controller",
            "",
            "",
            f"def delete_{info.snake}_controller({info.snake}):",
            "    def controller(ctx):",
            "        def run(rctx):",
            "            def confirmed(hctx):",
            f"                if get_{info.snake}(hctx.app.db, {info.snake}.key) is None:",
            f'                    hctx.set_page_message("{info.name} no longer exists")',
            f"                    return list_{info.snake}_controller(hctx)",
            f"                result = delete_{info.snake}(hctx.app.db, {info.snake}.key)",
            "                if result.committed:",
            f'                    hctx.set_page_message("{info.name} deleted")',
            "                else:",
            "                    hctx.set_page_message(result.reason)",
            f"                return list_{info.snake}_controller(hctx)",
            "",
            "            token = rctx.register_handler(confirmed)",
            "            return [",
            '                h1([htxt("Confirm deletion")]),',
            f"                par([htxt('Really delete {info.name} \"' + "
            f"{info.snake}_to_short_view({info.snake}) + '\"?')]),",
            '                button("delete", token),',
            "            ]",
            f"        return check_authorization(lambda c: {policy}"
            f"(DeleteEntity({info.snake}), c), run)(ctx)",
            "    return controller",
        ]
        return "\n".join(lines) + "\n"

    def _related_lookup_lines(self, info: _EntityInfo, indent: str) -> list[str]:
        lines = []
        for o in info.owners:
            one = self.info(o.one_end.entity)
            lines.append(
                f"{indent}current_{self._owner_param(o)} = get_{one.snake}("
                f"rctx.app.db, {info.snake}.fks[{o.relationship.name!r}])"
            )
        for m in info.members:
            other = self.info(m.end_b.entity)
            lines.append(
                f"{indent}current_{self._member_param(m)} = "
                f"query_{plural(other.snake)}_of_{info.snake}("
                f"rctx.app.db, {info.snake}.key)"
            )
        return lines

    # -- config --------------------------------------------------------------

    def gen_routes(self) -> str:
        references = []
        route_lines = []
        for info in self.entities:
            references += [f"New{info.name}Controller", f"List{info.name}Controller"]
            route_lines += [
                f'        Route("new {info.name}", Exact("new{info.name}"), '
                f'"New{info.name}Controller"),',
                f'        Route("list {info.name}", Exact("list{info.name}"), '
                f'"List{info.name}Controller"),',
            ]
        references += ["LoginController", "ProcessListController"]
        first = self.entities[0].name
        refs = "\n".join(f"    {r!r}," for r in references)
        return (
            '"""Route table: URL names to controller references."""\n'
            "\n"
            "from spicey.routing import Always, Exact, Route\n"
            "\n"
            "CONTROLLER_REFERENCES = (\n"
            f"{refs}\n"
            ")\n"
            "\n"
            "\n"
            "def get_routes(ctx):\n"
            "    return [\n"
            + "\n".join(route_lines)
            + "\n"
            '        Route("Login", Exact("login"), "LoginController"),\n'
            '        Route("Processes", Exact("processes"), "ProcessListController"),\n'
            f'        Route("default", Always(), "List{first}Controller"),\n'
            "    ]\n"
        )

    def gen_access_control(self) -> str:
        lines = [
            '"""Authorization policies, one per entity; edit these to restrict',
            "operations (see spicey.auth.disallow_delete for a ready-made",
            'example policy)."""',
            "",
            "from spicey.auth import Denied, Granted, disallow_delete  # noqa: F401",
        ]
        for info in self.entities:
            lines += [
                "",
                "",
                f"def {info.snake}_operation_allowed(access_type, ctx):",
                "    return Granted()",
            ]
        return "\n".join(lines) + "\n"

    def gen_user_processes(self) -> str:
        names = {info.name for info in self.entities}
        if self.erd.name == "Blog" and {"Tag", "Entry"} <= names:
            return (
                '"""User processes: multi-step interaction sequences."""\n'
                "\n"
                "from spicey.processes import Processes\n"
                "\n"
                "_CONTROLLERS = {\n"
                '    0: "NewTagController",\n'
                '    1: "NewEntryController",\n'
                '    2: "ListTagController",\n'
                "}\n"
                "\n"
                "_SUCCESSORS = {0: 1, 1: 2}\n"
                "\n"
                "\n"
                "def _controller_of(state):\n"
                "    return _CONTROLLERS[state]\n"
                "\n"
                "\n"
                "def _next_state(state, result):\n"
                "    return _SUCCESSORS.get(state)\n"
                "\n"
                "\n"
                "USER_PROCESSES = Processes(\n"
                '    start_states=(("Insert new tag and entry", 0),),\n'
                "    controller_of=_controller_of,\n"
                "    next_state=_next_state,\n"
                ")\n"
            )
        return (
            '"""User processes: multi-step interaction sequences (none defined)."""\n'
            "\n"
            "from spicey.processes import Processes\n"
            "\n"
            "USER_PROCESSES = Processes()\n"
        )

    # -- assembly / entry point ---------------------------------------------

    def gen_assembly(self) -> str:
        imports = []
        mapping = []
        for info in self.entities:
            imports.append(
                f"from controllers.{info.snake}_controller import (\n"
                f"    list_{info.snake}_controller, new_{info.snake}_controller,\n"
                ")"
            )
            mapping += [
                f'    "New{info.name}Controller": new_{info.snake}_controller,',
                f'    "List{info.name}Controller": list_{info.snake}_controller,',
            ]
        mapping += [
            '    "LoginController": login_controller,',
            '    "ProcessListController": process_route_controller,',
        ]
        return (
            '"""Binds controller references to implementations and builds the app."""\n'
            "\n"
            "from pathlib import Path\n"
            "\n"
            "from spicey.auth import CredentialStore, login_controller\n"
            "from spicey.processes import process_route_controller\n"
            "from spicey.server import Application\n"
            "\n"
            "from config.routes import get_routes\n"
            "from config.user_processes import USER_PROCESSES\n"
            + "\n".join(imports)
            + "\n"
            f"from models.{self.model_module} import open_database\n"
            "\n"
            "PROJECT_ROOT = Path(__file__).resolve().parent.parent\n"
            "\n"
            "CONTROLLER_MAP = {\n"
            + "\n".join(mapping)
            + "\n"
            "}\n"
            "\n"
            "\n"
            "def build_application(db_path=None, sessions=None):\n"
            '    data_dir = PROJECT_ROOT / "data"\n'
            "    if db_path is None:\n"
            f'        db_path = data_dir / "{self.erd.name}.db"\n'
            "    db = open_database(db_path)\n"
            f'    credentials = CredentialStore(data_dir / "{self.erd.name}.auth")\n'
            "    return Application(\n"
            f'        name="{self.erd.name}",\n'
            "        routes=get_routes,\n"
            "        controllers=CONTROLLER_MAP,\n"
            f'        default_reference="List{self.entities[0].name}Controller",\n'
            "        processes=USER_PROCESSES,\n"
            "        db=db,\n"
            "        credentials=credentials,\n"
            "        sessions=sessions,\n"
            '        static_dir=PROJECT_ROOT / "public",\n'
            "    )\n"
        )

    def gen_main(self) -> str:
        return (
            "#!/usr/bin/env python3\n"
            f'"""Start the {self.erd.name} web application."""\n'
            "\n"
            "import argparse\n"
            "import os\n"
            "import sys\n"
            "from pathlib import Path\n"
            "\n"
            "ROOT = Path(__file__).resolve().parent\n"
            "sys.path.insert(0, str(ROOT))\n"
            "\n"
            "\n"
            "def main():\n"
            f'    parser = argparse.ArgumentParser(description="Run the {self.erd.name} '
            'application")\n'
            '    parser.add_argument(\n'
            '        "--port", type=int,\n'
            '        default=int(os.environ.get("SPICEY_PORT", "8080")),\n'
            "    )\n"
            '    parser.add_argument("--db", default=None, help="database file path")\n'
            "    args = parser.parse_args()\n"
            "\n"
            "    from system.assembly import build_application\n"
            "\n"
            "    app = build_application(db_path=args.db)\n"
            "    print(\n"
            f'        "{self.erd.name} listening on http://127.0.0.1:%d/" % args.port,\n'
            "        file=sys.stderr,\n"
            "    )\n"
            "    try:\n"
            "        app.serve(args.port)\n"
            "    except KeyboardInterrupt:\n"
            "        pass\n"
            "\n"
            "\n"
            'if __name__ == "__main__":\n'
            "    main()\n"
        )

    def gen_run_script(self) -> str:
        return (
            "#!/bin/sh\n"
            "# Start the application (flags are forwarded to main.py).\n"
            'exec python3 "$(dirname "$0")/../main.py" "$@"\n'
        )

    def gen_check_script(self) -> str:
        return (
            "#!/bin/sh\n"
            "# Byte-compile all generated modules and import the assembly.\n"
            'cd "$(dirname "$0")/.." || exit 1\n'
            "python3 -m compileall -q . || exit 1\n"
            "python3 -c \"import sys; sys.path.insert(0, '.'); "
            'import system.assembly" || exit 1\n'
            'echo "ok"\n'
        )

    def gen_add_user(self) -> str:
        return (
            "#!/usr/bin/env python3\n"
            '"""Add or update a login in the credential table."""\n'
            "\n"
            "import argparse\n"
            "import getpass\n"
            "import sys\n"
            "from pathlib import Path\n"
            "\n"
            "sys.path.insert(0, str(Path(__file__).resolve().parent.parent))\n"
            "\n"
            "from spicey.auth import CredentialStore\n"
            "\n"
            "\n"
            "def main():\n"
            '    parser = argparse.ArgumentParser(description="Add a user")\n'
            '    parser.add_argument("login")\n'
            '    parser.add_argument("--password", default=None)\n'
            "    args = parser.parse_args()\n"
            "    password = args.password or getpass.getpass()\n"
            "    root = Path(__file__).resolve().parent.parent\n"
            f'    store = CredentialStore(root / "data" / "{self.erd.name}.auth")\n'
            "    store.set_password(args.login, password)\n"
            '    print(f"stored credentials for {args.login}")\n'
            "\n"
            "\n"
            'if __name__ == "__main__":\n'
            "    main()\n"
        )

    def gen_readme(self) -> str:
        entities = ", ".join(info.name for info in self.entities)
        return (
            f"# {self.erd.name}\n"
            "\n"
            f"A generated web application for the {self.erd.name} data model\n"
            f"(entities: {entities}).\n"
            "\n"
            "## Run\n"
            "\n"
            "    python3 main.py --port 8080 --db data/"
            f"{self.erd.name}.db\n"
            "\n"
            "or `scripts/run.sh`. The port can also be set through the\n"
            "`SPICEY_PORT` environment variable.\n"
            "\n"
            "## Layout\n"
            "\n"
            "- `models/` typed database operations derived from the ER model\n"
            "- `views/` form specifications and page renderings\n"
            "- `controllers/` request handling, one module per entity\n"
            "- `config/` routes, authorization policies, user processes\n"
            "- `system/` application assembly\n"
            "- `scripts/` run/check/user-management helpers\n"
            "- `public/` static assets\n"
            "\n"
            "## Authentication\n"
            "\n"
            f"Credentials live in `data/{self.erd.name}.auth`\n"
            "(`login:saltHex:hashHex`, managed by `scripts/add_user.py`). To\n"
            "promote users to a first-class entity, add a `User` entity to the\n"
            "ER model, regenerate, and port the logins into it; then adapt\n"
            "`spicey.auth.login_controller` usage in `system/assembly.py`.\n"
            "\n"
            "## Authorization\n"
            "\n"
            "Edit `config/access_control.py`; every controller is wrapped in a\n"
            "`check_authorization` call against the policy of its entity.\n"
        )


STYLE_CSS = """\
body { font-family: sans-serif; margin: 2em; color: #222; }
#menu ul.menu { list-style: none; padding: 0; }
#menu ul.menu li { display: inline-block; margin-right: 1em; }
#menu a { text-decoration: none; color: #246; font-weight: bold; }
#message { color: #262; font-style: italic; min-height: 1.2em; }
table { border-collapse: collapse; margin: 1em 0; }
td { border: 1px solid #bbb; padding: 0.3em 0.6em; }
h1 { color: #246; }
span.error { color: #a00; margin-left: 0.5em; }
input[type="submit"] { margin-right: 0.3em; }
"""


def build_tree(erd: ERD) -> dict[str, str]:
    """Output-path to file-contents mapping for a validated ERD."""
    errors = validate_erd(erd)
    if errors:
        raise ERDError(errors)
    return _Generator(erd).build_tree()


def generate(erd: ERD, out_dir: Path, force: bool = False) -> list[str]:
    """Write the generated tree; returns the relative paths written."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise GenerateError(
            f"output directory {out_dir} is not empty (use --force to overwrite)"
        )
    tree = build_tree(erd)
    written = []
    for rel_path in sorted(tree):
        target = out_dir / rel_path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(tree[rel_path])
        if rel_path.startswith("scripts/") or rel_path == "main.py":
            target.chmod(0o755)
        written.append(rel_path)
    return written
