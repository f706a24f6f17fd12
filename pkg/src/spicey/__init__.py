"""Spicey: an ER-model-driven web scaffolding framework.

A runtime library (HTML construction, typed form combinators, sessions,
authentication, authorization, routing, user processes and a
constraint-preserving embedded store) plus the ``spicegen`` CLI, which
compiles an ``.erdterm`` entity-relationship description into a complete
runnable MVC web application.
"""

__version__ = "0.1.0"

from .erd import (  # noqa: F401
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
    ParseError,
    REnd,
    Relationship,
    ValidationError,
    classify_relationships,
    parse_erd,
    print_erd,
    validate_erd,
)
from .storage import (  # noqa: F401
    Committed,
    Database,
    EntityKey,
    EntityValue,
    Failed,
    Query,
    Schema,
    derive_schema,
    query_all,
)
from .server import Application, Controller, RequestContext, display_error  # noqa: F401
from .session import SessionStore  # noqa: F401
