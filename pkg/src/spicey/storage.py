"""Constraint-preserving embedded storage derived from a validated ERD.

The engine keeps all rows in memory and persists committed transactions to a
single append-log file (length-prefixed records behind a ``SPCY1`` header).
A write-ahead journal next to the log makes commits atomic: the pending
record is journaled and fsynced before it is appended to the log, so an
interrupted commit is either replayed or discarded on reopen.

Writers are serialized by a global lock; reads evaluate against a consistent
snapshot. A failed transaction leaves the observable state untouched.
"""

from __future__ import annotations

import json
import os
import struct as binstruct
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .erd import (
    ERD,
    Attribute,
    DomainKind,
    ERDError,
    ManyToMany,
    OneToMany,
    classify_relationships,
    validate_erd,
)

MAGIC = b"SPCY1"


@dataclass(frozen=True)
class EntityKey:
    entity: str
    value: int


@dataclass(frozen=True)
class EntityValue:
    entity: str
    key: EntityKey
    attrs: dict  # attribute name -> typed value (None for null)
    fks: dict  # relationship name -> EntityKey of the one side

    def with_attrs(self, **changes) -> "EntityValue":
        attrs = dict(self.attrs)
        attrs.update(changes)
        return replace(self, attrs=attrs)

    def with_fks(self, **changes) -> "EntityValue":
        fks = dict(self.fks)
        fks.update(changes)
        return replace(self, fks=fks)


@dataclass(frozen=True)
class Committed:
    payload: Any = None

    @property
    def committed(self) -> bool:
        return True


@dataclass(frozen=True)
class Failed:
    reason: str

    @property
    def committed(self) -> bool:
        return False


TransactionResult = Union[Committed, Failed]


class _Abort(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# ---------------------------------------------------------------------------
# Schema derivation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FkColumn:
    relationship: str
    target: str  # one-side entity
    many_max: Optional[int]  # finite bound on rows sharing one owner, None = no bound


@dataclass(frozen=True)
class EntityTable:
    name: str
    attributes: tuple[Attribute, ...]
    fk_columns: tuple[FkColumn, ...]

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)


@dataclass(frozen=True)
class JoinTable:
    """ManyToMany realization with a uniqueness constraint on the key pair."""

    relationship: str
    entity_a: str
    entity_b: str
    max_a_per_b: Optional[int]  # bound from end A's cardinality
    max_b_per_a: Optional[int]  # bound from end B's cardinality


@dataclass(frozen=True)
class Schema:
    erd: ERD
    tables: dict  # entity name -> EntityTable
    joins: dict  # relationship name -> JoinTable

    def relations_of(self, entity: str) -> list[str]:
        """Join-table relationships touching the entity."""
        return [
            name
            for name, join in self.joins.items()
            if entity in (join.entity_a, join.entity_b)
        ]


def derive_schema(erd: ERD) -> Schema:
    errors = validate_erd(erd)
    if errors:
        raise ERDError(errors)
    fk_cols: dict[str, list[FkColumn]] = {e.name: [] for e in erd.entities}
    joins: dict[str, JoinTable] = {}
    for shape in classify_relationships(erd):
        if isinstance(shape, OneToMany):
            fk_cols[shape.many_end.entity].append(
                FkColumn(
                    relationship=shape.relationship.name,
                    target=shape.one_end.entity,
                    many_max=shape.many_end.cardinality.max,
                )
            )
        else:
            assert isinstance(shape, ManyToMany)
            joins[shape.relationship.name] = JoinTable(
                relationship=shape.relationship.name,
                entity_a=shape.end_a.entity,
                entity_b=shape.end_b.entity,
                max_a_per_b=shape.end_a.cardinality.max,
                max_b_per_a=shape.end_b.cardinality.max,
            )
    tables = {
        e.name: EntityTable(e.name, e.attributes, tuple(fk_cols[e.name]))
        for e in erd.entities
    }
    return Schema(erd, tables, joins)


# ---------------------------------------------------------------------------
# Value (de)serialization
# ---------------------------------------------------------------------------


def _encode_attr(value, kind: DomainKind):
    if value is None:
        return None
    if kind is DomainKind.DATE:
        return int(value.replace(tzinfo=timezone.utc).timestamp())
    return value


def _decode_attr(raw, kind: DomainKind):
    if raw is None:
        return None
    if kind is DomainKind.DATE:
        return datetime.fromtimestamp(raw, tz=timezone.utc).replace(tzinfo=None)
    return raw


_PYTYPES = {
    DomainKind.INT: int,
    DomainKind.FLOAT: float,
    DomainKind.BOOL: bool,
    DomainKind.STRING: str,
    DomainKind.DATE: datetime,
}


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    """Side-effect-free description: scan, relationship joins, predicates."""

    entity: str
    joins: tuple = ()  # (relationship name, EntityKey of the other side)
    attr_filters: tuple = ()  # (attribute name, value)
    predicates: tuple = ()  # callables on EntityValue

    def related_to(self, relationship: str, key: EntityKey) -> "Query":
        return replace(self, joins=self.joins + ((relationship, key),))

    def where_attr(self, name: str, value) -> "Query":
        return replace(self, attr_filters=self.attr_filters + ((name, value),))

    def where(self, predicate: Callable[[EntityValue], bool]) -> "Query":
        return replace(self, predicates=self.predicates + (predicate,))


def query_all(entity: str) -> Query:
    return Query(entity)


def null_last(value):
    """Sort-key wrapper placing nulls after every concrete value."""
    return (value is None, 0 if value is None else value)


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


@dataclass
class _State:
    rows: dict  # entity -> {int key -> EntityValue}
    links: dict  # relationship -> set[(a_int, b_int)]
    next_key: dict  # entity -> int

    def copy(self) -> "_State":
        return _State(
            rows={e: dict(t) for e, t in self.rows.items()},
            links={r: set(s) for r, s in self.links.items()},
            next_key=dict(self.next_key),
        )


class Transaction:
    """Mutation buffer validated against the snapshot plus earlier buffer ops."""

    def __init__(self, db: "Database", state: _State):
        self._db = db
        self._schema = db.schema
        self._state = state
        self.ops: list[dict] = []
        self._payload = None

    # -- reads --------------------------------------------------------------

    def get(self, key: EntityKey) -> Optional[EntityValue]:
        return self._state.rows.get(key.entity, {}).get(key.value)

    def query(self, q: Query) -> list[EntityValue]:
        return _evaluate(self._schema, self._state, q)

    # -- mutations ----------------------------------------------------------

    def new(self, entity: str, attrs: dict, owners=None, links=None) -> EntityValue:
        table = self._table(entity)
        owners = dict(owners or {})
        attrs = self._checked_attrs(table, attrs)
        fks = self._checked_fks(table, owners, exclude_key=None)
        key_int = self._state.next_key.setdefault(entity, 1)
        self._state.next_key[entity] = key_int + 1
        value = EntityValue(entity, EntityKey(entity, key_int), attrs, fks)
        self._check_unique(table, value)
        self._check_fk_bounds(table, value)
        self._state.rows.setdefault(entity, {})[key_int] = value
        link_arg = self._set_links(entity, key_int, links or {})
        self.ops.append(
            {
                "op": "new",
                "entity": entity,
                "key": key_int,
                "attrs": self._encode_attrs(table, attrs),
                "fks": {r: k.value for r, k in fks.items()},
                "links": link_arg,
            }
        )
        return value

    def update(self, value: EntityValue, links=None) -> None:
        table = self._table(value.entity)
        existing = self.get(value.key)
        if existing is None:
            raise _Abort(f"unknown key {value.entity}:{value.key.value}")
        attrs = self._checked_attrs(table, value.attrs)
        fks = self._checked_fks(table, dict(value.fks), exclude_key=value.key)
        new_value = EntityValue(value.entity, value.key, attrs, fks)
        self._check_unique(table, new_value)
        self._check_fk_bounds(table, new_value)
        self._state.rows[value.entity][value.key.value] = new_value
        link_arg = None
        if links is not None:
            self._clear_links(value.entity, value.key.value, only=set(links))
            link_arg = self._set_links(value.entity, value.key.value, links)
        self.ops.append(
            {
                "op": "update",
                "entity": value.entity,
                "key": value.key.value,
                "attrs": self._encode_attrs(table, attrs),
                "fks": {r: k.value for r, k in fks.items()},
                "links": link_arg,
            }
        )

    def delete(self, key: EntityKey) -> None:
        table = self._table(key.entity)
        if self.get(key) is None:
            raise _Abort(f"unknown key {key.entity}:{key.value}")
        for other in self._schema.tables.values():
            for fk in other.fk_columns:
                if fk.target != key.entity:
                    continue
                count = sum(
                    1
                    for row in self._state.rows.get(other.name, {}).values()
                    if row.fks.get(fk.relationship) == key
                )
                if count:
                    raise _Abort(
                        f"entity still referenced by {count} {other.name} instance(s)"
                    )
        for rel in self._schema.relations_of(key.entity):
            join = self._schema.joins[rel]
            pairs = self._state.links.setdefault(rel, set())
            if join.entity_a == key.entity:
                pairs.difference_update({p for p in pairs if p[0] == key.value})
            if join.entity_b == key.entity:
                pairs.difference_update({p for p in pairs if p[1] == key.value})
        del self._state.rows[key.entity][key.value]
        self.ops.append({"op": "delete", "entity": key.entity, "key": key.value})

    # -- helpers ------------------------------------------------------------

    def _table(self, entity: str) -> EntityTable:
        table = self._schema.tables.get(entity)
        if table is None:
            raise _Abort(f"unknown entity {entity}")
        return table

    def _checked_attrs(self, table: EntityTable, attrs: dict) -> dict:
        checked = {}
        for attr in table.attributes:
            name = f"{table.name}.{attr.name}"
            if attr.name not in attrs:
                raise _Abort(f"missing attribute {name}")
            value = attrs[attr.name]
            if value is None:
                if not attr.null_allowed:
                    raise _Abort(f"null not allowed for {name}")
            else:
                pytype = _PYTYPES[attr.domain.kind]
                if not isinstance(value, pytype) or (
                    pytype is not bool and isinstance(value, bool)
                ):
                    raise _Abort(f"type mismatch for {name}")
                if attr.domain.kind is DomainKind.DATE:
                    value = value.replace(microsecond=0)
            checked[attr.name] = value
        extra = set(attrs) - {a.name for a in table.attributes}
        if extra:
            raise _Abort(f"unknown attribute {table.name}.{sorted(extra)[0]}")
        return checked

    def _checked_fks(self, table: EntityTable, owners: dict, exclude_key) -> dict:
        fks = {}
        for fk in table.fk_columns:
            owner = owners.pop(fk.relationship, None)
            if owner is None:
                raise _Abort(f"missing required {fk.target} reference")
            if not isinstance(owner, EntityKey) or owner.entity != fk.target:
                raise _Abort(f"reference for {fk.relationship} must be a {fk.target} key")
            if self._state.rows.get(fk.target, {}).get(owner.value) is None:
                raise _Abort(f"dangling key {fk.target}:{owner.value}")
            fks[fk.relationship] = owner
        if owners:
            raise _Abort(f"unknown relationship {sorted(owners)[0]} for {table.name}")
        return fks

    def _check_unique(self, table: EntityTable, value: EntityValue) -> None:
        rows = self._state.rows.get(table.name, {})
        for attr in table.attributes:
            if not attr.unique:
                continue
            for row in rows.values():
                if row.key == value.key:
                    continue
                if row.attrs.get(attr.name) == value.attrs[attr.name]:
                    raise _Abort(f"unique violation on {table.name}.{attr.name}")

    def _check_fk_bounds(self, table: EntityTable, value: EntityValue) -> None:
        rows = self._state.rows.get(table.name, {})
        for fk in table.fk_columns:
            if fk.many_max is None:
                continue
            owner = value.fks[fk.relationship]
            count = 1 + sum(
                1
                for row in rows.values()
                if row.key != value.key and row.fks.get(fk.relationship) == owner
            )
            if count > fk.many_max:
                raise _Abort(
                    f"cardinality bound exceeded for {fk.relationship} "
                    f"at {owner.entity}:{owner.value}"
                )

    def _clear_links(self, entity: str, key_int: int, only: set) -> None:
        for rel in self._schema.relations_of(entity):
            if rel not in only:
                continue
            join = self._schema.joins[rel]
            pairs = self._state.links.setdefault(rel, set())
            if join.entity_a == entity:
                pairs.difference_update({p for p in pairs if p[0] == key_int})
            else:
                pairs.difference_update({p for p in pairs if p[1] == key_int})

    def _set_links(self, entity: str, key_int: int, links: dict) -> dict:
        encoded = {}
        for rel, keys in links.items():
            join = self._schema.joins.get(rel)
            if join is None or entity not in (join.entity_a, join.entity_b):
                raise _Abort(f"unknown relationship {rel} for {entity}")
            subject_is_a = join.entity_a == entity
            other_entity = join.entity_b if subject_is_a else join.entity_a
            pairs = self._state.links.setdefault(rel, set())
            seen = []
            for other in keys:
                if not isinstance(other, EntityKey) or other.entity != other_entity:
                    raise _Abort(f"link for {rel} must be a {other_entity} key")
                if self._state.rows.get(other_entity, {}).get(other.value) is None:
                    raise _Abort(f"dangling key {other_entity}:{other.value}")
                if other.value not in seen:
                    seen.append(other.value)
            for other_int in seen:
                pair = (key_int, other_int) if subject_is_a else (other_int, key_int)
                pairs.add(pair)
            self._check_link_bounds(join, pairs)
            encoded[rel] = sorted(seen)
        return encoded

    def _check_link_bounds(self, join: JoinTable, pairs: set) -> None:
        if join.max_b_per_a is not None:
            per_a: dict[int, int] = {}
            for a, _ in pairs:
                per_a[a] = per_a.get(a, 0) + 1
                if per_a[a] > join.max_b_per_a:
                    raise _Abort(
                        f"cardinality bound exceeded for {join.relationship} "
                        f"at {join.entity_a}:{a}"
                    )
        if join.max_a_per_b is not None:
            per_b: dict[int, int] = {}
            for _, b in pairs:
                per_b[b] = per_b.get(b, 0) + 1
                if per_b[b] > join.max_a_per_b:
                    raise _Abort(
                        f"cardinality bound exceeded for {join.relationship} "
                        f"at {join.entity_b}:{b}"
                    )

    def _encode_attrs(self, table: EntityTable, attrs: dict) -> dict:
        return {
            attr.name: _encode_attr(attrs[attr.name], attr.domain.kind)
            for attr in table.attributes
        }


def _evaluate(schema: Schema, state: _State, q: Query) -> list[EntityValue]:
    if q.entity not in schema.tables:
        raise KeyError(f"unknown entity {q.entity}")
    rows = list(state.rows.get(q.entity, {}).values())
    for rel, key in q.joins:
        if rel in schema.joins:
            join = schema.joins[rel]
            pairs = state.links.get(rel, set())
            if q.entity == join.entity_a and key.entity == join.entity_b:
                wanted = {a for a, b in pairs if b == key.value}
            elif q.entity == join.entity_b and key.entity == join.entity_a:
                wanted = {b for a, b in pairs if a == key.value}
            else:
                raise KeyError(f"relationship {rel} does not join {q.entity} and {key.entity}")
            rows = [r for r in rows if r.key.value in wanted]
        else:
            table = schema.tables[q.entity]
            fk = next((f for f in table.fk_columns if f.relationship == rel), None)
            if fk is not None and fk.target == key.entity:
                rows = [r for r in rows if r.fks.get(rel) == key]
            else:
                # the subject is the one side: follow the FK from the given row
                other_table = schema.tables.get(key.entity)
                other_fk = None
                if other_table is not None:
                    other_fk = next(
                        (f for f in other_table.fk_columns if f.relationship == rel), None
                    )
                if other_fk is None or other_fk.target != q.entity:
                    raise KeyError(
                        f"relationship {rel} does not join {q.entity} and {key.entity}"
                    )
                other_row = state.rows.get(key.entity, {}).get(key.value)
                wanted_key = other_row.fks.get(rel) if other_row else None
                rows = [r for r in rows if wanted_key is not None and r.key == wanted_key]
    for name, value in q.attr_filters:
        rows = [r for r in rows if r.attrs.get(name) == value]
    for predicate in q.predicates:
        rows = [r for r in rows if predicate(r)]
    return sorted(rows, key=lambda r: r.key.value)


# ---------------------------------------------------------------------------
# Database
# ---------------------------------------------------------------------------


class Database:
    def __init__(self, schema: Schema, path: Optional[Union[str, Path]] = None):
        self.schema = schema
        self._lock = threading.RLock()
        self._state = _State(
            rows={name: {} for name in schema.tables},
            links={name: set() for name in schema.joins},
            next_key={name: 1 for name in schema.tables},
        )
        self._txn_id = 0
        self._path = Path(path) if path is not None else None
        self._log = None
        if self._path is not None:
            self._open_files()

    # -- public API ---------------------------------------------------------

    def run_transaction(self, body: Callable[[Transaction], Any]) -> TransactionResult:
        """Execute a mutation sequence atomically; rolls back on any failure."""
        with self._lock:
            scratch = self._state.copy()
            txn = Transaction(self, scratch)
            try:
                payload = body(txn)
            except _Abort as exc:
                return Failed(exc.reason)
            if txn.ops:
                self._txn_id += 1
                self._persist({"txn": self._txn_id, "ops": txn.ops})
            self._state = scratch
            return Committed(payload)

    def new_entity(self, entity: str, attrs: dict, owners=None, links=None):
        return self.run_transaction(lambda t: t.new(entity, attrs, owners, links))

    def update_entity(self, value: EntityValue, links=None) -> TransactionResult:
        return self.run_transaction(lambda t: t.update(value, links))

    def delete_entity(self, key: EntityKey) -> TransactionResult:
        return self.run_transaction(lambda t: t.delete(key))

    def get_entity(self, key: EntityKey) -> Optional[EntityValue]:
        with self._lock:
            return self._state.rows.get(key.entity, {}).get(key.value)

    def run_query(self, q: Query) -> list[EntityValue]:
        with self._lock:
            return _evaluate(self.schema, self._state, q)

    def dump_state(self) -> bytes:
        """Canonical serialization of the observable state, for comparisons."""
        with self._lock:
            doc = {
                "rows": {
                    entity: {
                        str(k): {
                            "attrs": {
                                a.name: _encode_attr(
                                    row.attrs[a.name], a.domain.kind
                                )
                                for a in self.schema.tables[entity].attributes
                            },
                            "fks": {r: key.value for r, key in sorted(row.fks.items())},
                        }
                        for k, row in sorted(table.items())
                    }
                    for entity, table in sorted(self._state.rows.items())
                },
                "links": {
                    rel: sorted(list(p) for p in pairs)
                    for rel, pairs in sorted(self._state.links.items())
                },
            }
            return json.dumps(doc, sort_keys=True).encode()

    def close(self) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- persistence --------------------------------------------------------

    @property
    def _journal_path(self) -> Path:
        return self._path.with_name(self._path.name + ".journal")

    def _open_files(self) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        if not self._path.exists():
            self._path.write_bytes(MAGIC)
        records = _read_records(self._path)
        pending = None
        if self._journal_path.exists():
            journal_records = _read_records(self._journal_path)
            if journal_records:
                pending = journal_records[-1]
        last_txn = records[-1]["txn"] if records else 0
        if pending is not None and pending["txn"] > last_txn:
            with open(self._path, "ab") as f:
                f.write(_frame(pending))
            records.append(pending)
        for record in records:
            self._replay(record)
            self._txn_id = record["txn"]
        self._log = open(self._path, "ab")
        self._write_journal(None)

    def _replay(self, record: dict) -> None:
        state = self._state
        for op in record["ops"]:
            entity = op["entity"]
            key_int = op["key"]
            if op["op"] == "delete":
                row = state.rows[entity].pop(key_int)
                for rel in self.schema.relations_of(entity):
                    join = self.schema.joins[rel]
                    pairs = state.links[rel]
                    if join.entity_a == entity:
                        pairs.difference_update({p for p in pairs if p[0] == key_int})
                    if join.entity_b == entity:
                        pairs.difference_update({p for p in pairs if p[1] == key_int})
                continue
            table = self.schema.tables[entity]
            attrs = {
                a.name: _decode_attr(op["attrs"][a.name], a.domain.kind)
                for a in table.attributes
            }
            fks = {
                fk.relationship: EntityKey(fk.target, op["fks"][fk.relationship])
                for fk in table.fk_columns
                if fk.relationship in op["fks"]
            }
            state.rows[entity][key_int] = EntityValue(
                entity, EntityKey(entity, key_int), attrs, fks
            )
            if op["op"] == "new":
                state.next_key[entity] = max(state.next_key[entity], key_int + 1)
            links = op.get("links")
            if links is not None:
                for rel, others in links.items():
                    join = self.schema.joins[rel]
                    subject_is_a = join.entity_a == entity
                    pairs = state.links[rel]
                    if op["op"] == "update":
                        if subject_is_a:
                            pairs.difference_update({p for p in pairs if p[0] == key_int})
                        else:
                            pairs.difference_update({p for p in pairs if p[1] == key_int})
                    for other in others:
                        pairs.add((key_int, other) if subject_is_a else (other, key_int))

    def _write_journal(self, record: Optional[dict]) -> None:
        with open(self._journal_path, "wb") as f:
            f.write(MAGIC)
            if record is not None:
                f.write(_frame(record))
            f.flush()
            os.fsync(f.fileno())

    def _persist(self, record: dict) -> None:
        if self._path is None:
            return
        self._write_journal(record)
        self._log.write(_frame(record))
        self._log.flush()
        os.fsync(self._log.fileno())
        self._write_journal(None)


def _frame(record: dict) -> bytes:
    payload = json.dumps(record, sort_keys=True).encode()
    return binstruct.pack(">I", len(payload)) + payload


def _read_records(path: Path) -> list[dict]:
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path} is not a spicey database file")
    records = []
    offset = len(MAGIC)
    while offset + 4 <= len(data):
        (length,) = binstruct.unpack_from(">I", data, offset)
        start = offset + 4
        if start + length > len(data):
            break  # truncated trailing record (interrupted write)
        records.append(json.loads(data[start : start + length]))
        offset = start + length
    return records
