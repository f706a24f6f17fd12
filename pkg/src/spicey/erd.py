"""Entity-relationship descriptions: term syntax, validation, classification.

An ERD is written in a small term language (files use the ``.erdterm``
extension)::

    ERD "Blog"
      [Entity "Entry"
        [Attribute "Title" (StringDom Nothing) Unique False, ...], ...]
      [Relationship "Commenting"
        [REnd "Entry" "commentsOn" (Exactly 1),
         REnd "Comment" "isCommentedBy" (Between 0 Infinite)], ...]

The term is whitespace-insensitive, uses commas as separators and supports
``--`` line comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional, Union


class DomainKind(Enum):
    INT = "IntDom"
    FLOAT = "FloatDom"
    BOOL = "BoolDom"
    STRING = "StringDom"
    DATE = "DateDom"


#: Python types admissible as a default value, per domain kind.
_DOMAIN_PYTYPE = {
    DomainKind.INT: int,
    DomainKind.FLOAT: float,
    DomainKind.BOOL: bool,
    DomainKind.STRING: str,
    DomainKind.DATE: datetime,
}


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    default: object = None  # None = no default


@dataclass(frozen=True)
class Attribute:
    name: str
    domain: Domain
    unique: bool = False  # Unique vs NoKey
    null_allowed: bool = False


@dataclass(frozen=True)
class Entity:
    name: str
    attributes: tuple[Attribute, ...]


@dataclass(frozen=True)
class Exactly:
    n: int

    @property
    def min(self) -> int:
        return self.n

    @property
    def max(self) -> Optional[int]:
        return self.n


@dataclass(frozen=True)
class Between:
    low: int
    high: Optional[int]  # None = Infinite

    @property
    def min(self) -> int:
        return self.low

    @property
    def max(self) -> Optional[int]:
        return self.high


Cardinality = Union[Exactly, Between]


@dataclass(frozen=True)
class REnd:
    entity: str
    role: str
    cardinality: Cardinality


@dataclass(frozen=True)
class Relationship:
    name: str
    end_a: REnd
    end_b: REnd

    @property
    def ends(self) -> tuple[REnd, REnd]:
        return (self.end_a, self.end_b)


@dataclass(frozen=True)
class ERD:
    name: str
    entities: tuple[Entity, ...]
    relationships: tuple[Relationship, ...]

    def entity(self, name: str) -> Entity:
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(name)


@dataclass(frozen=True)
class OneToMany:
    """FK-realizable shape: the many side carries a key of the one side."""

    relationship: Relationship
    one_end: REnd
    many_end: REnd

    @property
    def kind(self) -> str:
        return "one_to_many"

    @property
    def fk_required(self) -> bool:
        return self.one_end.cardinality.min >= 1

    @property
    def many_max(self) -> Optional[int]:
        return self.many_end.cardinality.max


@dataclass(frozen=True)
class ManyToMany:
    """Join-table shape; finite maxima are enforced at transaction time."""

    relationship: Relationship
    end_a: REnd
    end_b: REnd

    @property
    def kind(self) -> str:
        return "many_to_many"


RelShape = Union[OneToMany, ManyToMany]


@dataclass(frozen=True)
class ValidationError:
    message: str


class ERDError(Exception):
    """Raised when an operation requires a valid ERD but got an invalid one."""

    def __init__(self, errors: list[ValidationError]):
        super().__init__("; ".join(e.message for e in errors))
        self.errors = errors


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        loc = f"line {line}, column {col}: {message}"
        if expected:
            loc += " (expected " + " or ".join(expected) + ")"
        super().__init__(loc)
        self.line = line
        self.col = col
        self.expected = expected


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}")
_NUM_RE = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass
class _Token:
    kind: str  # "string" | "ident" | "int" | "float" | "date" | punctuation
    value: object
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c in "[](),":
            tokens.append(_Token(c, c, line, col))
            i += 1
            col += 1
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            tokens.append(_Token("string", "".join(buf), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        m = _DATE_RE.match(source, i)
        if m:
            try:
                value = datetime.strptime(m.group(0), "%Y-%m-%dT%H:%M:%S")
            except ValueError:
                raise ParseError(f"invalid date literal {m.group(0)!r}", line, col)
            tokens.append(_Token("date", value, line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NUM_RE.match(source, i)
        if m:
            text = m.group(0)
            if "." in text or "e" in text or "E" in text:
                tokens.append(_Token("float", float(text), line, col))
            else:
                tokens.append(_Token("int", int(text), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(_Token("ident", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("eof", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def _fail(self, *expected: str):
        tok = self.cur
        shown = tok.kind if tok.kind != "ident" else repr(tok.value)
        raise ParseError(f"unexpected {shown}", tok.line, tok.col, expected)

    def expect(self, kind: str, value=None):
        tok = self.cur
        if tok.kind != kind or (value is not None and tok.value != value):
            self._fail(value if value is not None else kind)
        self.pos += 1
        return tok

    def string(self, what: str) -> str:
        tok = self.cur
        if tok.kind != "string":
            raise ParseError(
                f"expected a string for {what}", tok.line, tok.col, ("string",)
            )
        self.pos += 1
        return tok.value

    def list_of(self, parse_item, what: str, allow_empty: bool):
        self.expect("[")
        items = []
        if self.cur.kind == "]":
            if not allow_empty:
                self._fail(what)
            self.pos += 1
            return items
        items.append(parse_item())
        while self.cur.kind == ",":
            self.pos += 1
            items.append(parse_item())
        self.expect("]")
        return items

    def erd(self) -> ERD:
        self.expect("ident", "ERD")
        name = self.string("the ERD name")
        entities = self.list_of(self.entity, "Entity", allow_empty=False)
        relationships = self.list_of(self.relationship, "Relationship", allow_empty=True)
        self.expect("eof")
        return ERD(name, tuple(entities), tuple(relationships))

    def entity(self) -> Entity:
        self.expect("ident", "Entity")
        name = self.string("the entity name")
        attrs = self.list_of(self.attribute, "Attribute", allow_empty=False)
        return Entity(name, tuple(attrs))

    def attribute(self) -> Attribute:
        self.expect("ident", "Attribute")
        name = self.string("the attribute name")
        domain = self.domain()
        key = self.cur
        if key.kind != "ident" or key.value not in ("NoKey", "Unique"):
            self._fail("NoKey", "Unique")
        self.pos += 1
        null = self.bool_lit()
        return Attribute(name, domain, unique=key.value == "Unique", null_allowed=null)

    def bool_lit(self) -> bool:
        tok = self.cur
        if tok.kind != "ident" or tok.value not in ("True", "False"):
            self._fail("True", "False")
        self.pos += 1
        return tok.value == "True"

    def domain(self) -> Domain:
        self.expect("(")
        tok = self.cur
        kinds = {k.value: k for k in DomainKind}
        if tok.kind != "ident" or tok.value not in kinds:
            self._fail(*kinds)
        self.pos += 1
        kind = kinds[tok.value]
        default = self.maybe_literal()
        self.expect(")")
        return Domain(kind, default)

    def maybe_literal(self):
        tok = self.cur
        if tok.kind == "ident" and tok.value == "Nothing":
            self.pos += 1
            return None
        if tok.kind == "(":
            self.pos += 1
            self.expect("ident", "Just")
            lit = self.literal()
            self.expect(")")
            return lit
        self._fail("Nothing", "(Just ...)")

    def literal(self):
        tok = self.cur
        if tok.kind in ("int", "float", "string", "date"):
            self.pos += 1
            return tok.value
        if tok.kind == "ident" and tok.value in ("True", "False"):
            self.pos += 1
            return tok.value == "True"
        self._fail("literal")

    def relationship(self) -> Relationship:
        self.expect("ident", "Relationship")
        name = self.string("the relationship name")
        ends = self.list_of(self.rend, "REnd", allow_empty=False)
        if len(ends) != 2:
            tok = self.cur
            raise ParseError(
                f"relationship {name!r} must have exactly two ends", tok.line, tok.col
            )
        return Relationship(name, ends[0], ends[1])

    def rend(self) -> REnd:
        self.expect("ident", "REnd")
        entity = self.string("the related entity name")
        role = self.string("the role name")
        card = self.cardinality()
        return REnd(entity, role, card)

    def cardinality(self) -> Cardinality:
        self.expect("(")
        tok = self.cur
        if tok.kind != "ident" or tok.value not in ("Exactly", "Between"):
            self._fail("Exactly", "Between")
        self.pos += 1
        if tok.value == "Exactly":
            n = self.expect("int").value
            self.expect(")")
            return Exactly(n)
        low = self.expect("int").value
        hi_tok = self.cur
        if hi_tok.kind == "int":
            self.pos += 1
            high = hi_tok.value
        elif hi_tok.kind == "ident" and hi_tok.value == "Infinite":
            self.pos += 1
            high = None
        else:
            self._fail("integer", "Infinite")
        self.expect(")")
        return Between(low, high)


def parse_erd(source: str) -> ERD:
    """Parse the term syntax; raises :class:`ParseError` on malformed input."""
    return _Parser(_tokenize(source)).erd()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Z][A-Za-z0-9_]*$")


def _err(errors: list[ValidationError], message: str):
    errors.append(ValidationError(message))


def validate_erd(erd: ERD) -> list[ValidationError]:
    """All invariant violations, in deterministic declaration order."""
    errors: list[ValidationError] = []
    if not _NAME_RE.match(erd.name):
        _err(errors, f"ERD name {erd.name!r} is not an uppercase identifier")
    seen_entities = set()
    for entity in erd.entities:
        if not _NAME_RE.match(entity.name):
            _err(errors, f"entity name {entity.name!r} is not an uppercase identifier")
        if entity.name in seen_entities:
            _err(errors, f"duplicate entity name {entity.name}")
        seen_entities.add(entity.name)
        if not entity.attributes:
            _err(errors, f"entity {entity.name} has no attributes")
        seen_attrs = set()
        for attr in entity.attributes:
            where = f"{entity.name}.{attr.name}"
            if attr.name in seen_attrs:
                _err(errors, f"duplicate attribute name {where}")
            seen_attrs.add(attr.name)
            if attr.unique and attr.null_allowed:
                _err(errors, f"unique attribute {where} must not allow null")
            default = attr.domain.default
            if default is not None:
                pytype = _DOMAIN_PYTYPE[attr.domain.kind]
                if not isinstance(default, pytype) or (
                    pytype is not bool and isinstance(default, bool)
                ):
                    _err(
                        errors,
                        f"default value of {where} is not a "
                        f"{attr.domain.kind.value} literal",
                    )
    seen_rels = set()
    for rel in erd.relationships:
        if rel.name in seen_rels or rel.name in seen_entities:
            _err(errors, f"relationship name {rel.name} is not distinct")
        seen_rels.add(rel.name)
        if rel.end_a.role == rel.end_b.role:
            _err(errors, f"relationship {rel.name} has duplicate role {rel.end_a.role!r}")
        missing = False
        for end in rel.ends:
            if end.entity not in seen_entities:
                _err(
                    errors,
                    f"relationship {rel.name} references unknown entity {end.entity}",
                )
                missing = True
            card = end.cardinality
            if isinstance(card, Exactly) and card.n < 1:
                _err(errors, f"relationship {rel.name}: Exactly requires n >= 1")
            if isinstance(card, Between):
                if card.low < 0 or (card.high is not None and card.high < 1):
                    _err(errors, f"relationship {rel.name}: malformed Between bounds")
                elif card.high is not None and card.low > card.high:
                    _err(errors, f"relationship {rel.name}: Between min exceeds max")
        if not missing:
            shape = _classify(rel)
            if isinstance(shape, ValidationError):
                errors.append(shape)
    return errors


def _is_one_end(card: Cardinality) -> bool:
    return (isinstance(card, Exactly) and card.n == 1) or (
        isinstance(card, Between) and card.low == 0 and card.high == 1
    )


def _classify(rel: Relationship) -> Union[RelShape, ValidationError]:
    a, b = rel.end_a, rel.end_b
    for end in (a, b):
        card = end.cardinality
        if isinstance(card, Exactly) and card.n >= 2:
            return ValidationError(
                f"unsupported cardinality combination in {rel.name}: "
                f"Exactly {card.n} at {end.entity}"
            )
    one_a, one_b = _is_one_end(a.cardinality), _is_one_end(b.cardinality)
    if one_a and one_b:
        if isinstance(a.cardinality, Exactly) and isinstance(b.cardinality, Exactly):
            return ValidationError(
                f"unsupported cardinality combination in {rel.name}: "
                "Exactly 1 on both ends"
            )
        # one-to-one: the FK lives on the Between-0-1 side (end B when both are)
        if isinstance(b.cardinality, Between):
            return OneToMany(rel, one_end=a, many_end=b)
        return OneToMany(rel, one_end=b, many_end=a)
    if one_a or one_b:
        one, many = (a, b) if one_a else (b, a)
        if many.cardinality.min >= 1:
            return ValidationError(
                f"unsupported cardinality combination in {rel.name}: "
                f"minimum {many.cardinality.min} on the many side at {many.entity}"
            )
        return OneToMany(rel, one_end=one, many_end=many)
    # both ends allow more than one partner
    for end in (a, b):
        if end.cardinality.min >= 1:
            return ValidationError(
                f"unsupported cardinality combination in {rel.name}: "
                f"minimum {end.cardinality.min} on the many side at {end.entity}"
            )
    return ManyToMany(rel, end_a=a, end_b=b)


def classify_relationships(erd: ERD) -> list[RelShape]:
    """Map every relationship of a validated ERD to its implementable shape."""
    shapes = []
    errors = []
    for rel in erd.relationships:
        shape = _classify(rel)
        if isinstance(shape, ValidationError):
            errors.append(shape)
        else:
            shapes.append(shape)
    if errors:
        raise ERDError(errors)
    return shapes


def owning_relations(erd: ERD, entity: str) -> list[OneToMany]:
    """OneToMany shapes whose FK is carried by the given entity."""
    return [
        s
        for s in classify_relationships(erd)
        if isinstance(s, OneToMany) and s.many_end.entity == entity
    ]


def member_relations(erd: ERD, entity: str) -> list[ManyToMany]:
    """ManyToMany shapes where the given entity is end A (its forms edit them)."""
    return [
        s
        for s in classify_relationships(erd)
        if isinstance(s, ManyToMany) and s.end_a.entity == entity
    ]


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _print_literal(value) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, datetime):
        return value.strftime("%Y-%m-%dT%H:%M:%S")
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return repr(value)


def _print_domain(domain: Domain) -> str:
    if domain.default is None:
        return f"({domain.kind.value} Nothing)"
    return f"({domain.kind.value} (Just {_print_literal(domain.default)}))"


def _print_attribute(attr: Attribute) -> str:
    key = "Unique" if attr.unique else "NoKey"
    null = "True" if attr.null_allowed else "False"
    return f'Attribute "{attr.name}" {_print_domain(attr.domain)} {key} {null}'


def _print_cardinality(card: Cardinality) -> str:
    if isinstance(card, Exactly):
        return f"(Exactly {card.n})"
    high = "Infinite" if card.high is None else str(card.high)
    return f"(Between {card.low} {high})"


def _print_rend(end: REnd) -> str:
    return f'REnd "{end.entity}" "{end.role}" {_print_cardinality(end.cardinality)}'


def print_erd(erd: ERD) -> str:
    """Canonical text; ``parse_erd(print_erd(e)) == e`` for structurally valid e."""
    entities = []
    for entity in erd.entities:
        attrs = ",\n     ".join(_print_attribute(a) for a in entity.attributes)
        entities.append(f'Entity "{entity.name}"\n    [{attrs}]')
    relationships = []
    for rel in erd.relationships:
        ends = ",\n     ".join(_print_rend(e) for e in rel.ends)
        relationships.append(f'Relationship "{rel.name}"\n    [{ends}]')
    rel_block = "[" + ",\n   ".join(relationships) + "]" if relationships else "[]"
    text = (
        f'ERD "{erd.name}"\n'
        + "  ["
        + ",\n   ".join(entities)
        + "]\n"
        + "  "
        + rel_block
        + "\n"
    )
    compact = " ".join(text.split())
    if len(compact) <= 100:
        return compact + "\n"
    return text
