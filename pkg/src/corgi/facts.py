"""Typed working memory: schemas, fact storage with stable ids, and fact files.

Facts are flat attribute records whose values are integers or strings. A
WorkingMemory hands out strictly increasing integer ids that are never reused,
and keeps an append-only change log that relation graphs drain independently
via per-graph cursors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateAttributeError,
    DuplicateTypeError,
    EmptyAttributeListError,
    FactParseError,
    SchemaViolationError,
    UnknownFactIdError,
    UnknownTypeError,
)

INT = "int"
STR = "str"

_KIND_ALIASES = {INT: INT, STR: STR, int: INT, str: STR, "integer": INT, "string": STR}


def _normalize_kind(kind):
    try:
        return _KIND_ALIASES[kind]
    except (KeyError, TypeError):
        raise SchemaViolationError(f"unsupported attribute kind: {kind!r}") from None


@dataclass(frozen=True)
class Schema:
    """Declared shape of one fact type: ordered (attribute, kind) pairs."""

    type_name: str
    attributes: tuple[tuple[str, str], ...]

    @property
    def attr_names(self):
        return tuple(name for name, _ in self.attributes)

    def kind_of(self, attr: str) -> str:
        for name, kind in self.attributes:
            if name == attr:
                return kind
        raise SchemaViolationError(f"{self.type_name} has no attribute {attr!r}")

    def has_attr(self, attr: str) -> bool:
        return any(name == attr for name, _ in self.attributes)


class TypeRegistry:
    """Mutable registry of fact schemas, shared by a working memory and its patterns."""

    def __init__(self):
        self._schemas: dict[str, Schema] = {}
        self.version = 0

    def define(self, type_name: str, attributes) -> Schema:
        if type_name in self._schemas:
            raise DuplicateTypeError(f"type {type_name!r} already registered")
        attrs = []
        seen = set()
        for name, kind in attributes:
            if name in seen:
                raise DuplicateAttributeError(f"duplicate attribute {name!r} in {type_name}")
            seen.add(name)
            attrs.append((name, _normalize_kind(kind)))
        if not attrs:
            raise EmptyAttributeListError(f"type {type_name!r} declares no attributes")
        schema = Schema(type_name, tuple(attrs))
        self._schemas[type_name] = schema
        self.version += 1
        return schema

    def get(self, type_name: str) -> Schema:
        try:
            return self._schemas[type_name]
        except KeyError:
            raise UnknownTypeError(f"unknown type {type_name!r}") from None

    def __contains__(self, type_name: str) -> bool:
        return type_name in self._schemas

    def type_names(self):
        return tuple(self._schemas)


def define_schema(registry: TypeRegistry, type_name: str, attributes) -> Schema:
    return registry.define(type_name, attributes)


@dataclass(frozen=True)
class Fact:
    """One working memory element: a type name plus attribute values."""

    type_name: str
    values: dict = field(compare=True)

    def __getitem__(self, attr):
        return self.values[attr]


def _check_conformance(schema: Schema, fact: Fact):
    expected = dict(schema.attributes)
    for attr, value in fact.values.items():
        kind = expected.pop(attr, None)
        if kind is None:
            raise SchemaViolationError(f"{schema.type_name} has no attribute {attr!r}")
        if kind == INT and not (isinstance(value, int) and not isinstance(value, bool)):
            raise SchemaViolationError(f"{schema.type_name}.{attr} expects an integer, got {value!r}")
        if kind == STR and not isinstance(value, str):
            raise SchemaViolationError(f"{schema.type_name}.{attr} expects a string, got {value!r}")
    if expected:
        missing = ", ".join(expected)
        raise SchemaViolationError(f"{schema.type_name} fact missing attribute(s): {missing}")


INSERT = "insert"
RETRACT = "retract"


class WorkingMemory:
    """Fact store with never-recycled ids and an append-only change log."""

    def __init__(self, registry: TypeRegistry | None = None):
        self.registry = registry if registry is not None else TypeRegistry()
        self.store: dict[int, Fact] = {}
        self.by_type: dict[str, set[int]] = {}
        self.change_log: list[tuple[str, int]] = []
        self._next_id = 1

    def insert(self, fact: Fact) -> int:
        schema = self.registry.get(fact.type_name)
        _check_conformance(schema, fact)
        fact_id = self._next_id
        self._next_id += 1
        self.store[fact_id] = fact
        self.by_type.setdefault(fact.type_name, set()).add(fact_id)
        self.change_log.append((INSERT, fact_id))
        return fact_id

    def retract(self, fact_id: int):
        fact = self.store.pop(fact_id, None)
        if fact is None:
            raise UnknownFactIdError(f"fact id {fact_id} is not live")
        self.by_type[fact.type_name].discard(fact_id)
        self.change_log.append((RETRACT, fact_id))

    def get(self, fact_id: int) -> Fact:
        try:
            return self.store[fact_id]
        except KeyError:
            raise UnknownFactIdError(f"fact id {fact_id} is not live") from None

    def ids_of_type(self, type_name: str) -> set[int]:
        return set(self.by_type.get(type_name, ()))

    def __len__(self):
        return len(self.store)

    def size(self):
        return len(self.store)


# --- fact file format ---------------------------------------------------
#
# One fact per line: TypeName(attr=value, attr=value, ...)
# Strings double-quoted, integers bare; '#' starts a comment line; blank
# lines ignored. An optional leading "<n>:" label (as printed in listings)
# is accepted and ignored.

_FACT_LINE = re.compile(r"^\s*(?:\d+\s*:\s*)?([A-Za-z_]\w*)\s*\((.*)\)\s*$")
_PAIR = re.compile(r'\s*([A-Za-z_]\w*)\s*=\s*("[^"]*"|-?\d+)\s*(,|$)')


def parse_fact_line(line: str, lineno: int | None = None) -> Fact:
    m = _FACT_LINE.match(line)
    if not m:
        raise FactParseError(f"malformed fact: {line.strip()!r}", lineno)
    type_name, body = m.group(1), m.group(2)
    values = {}
    pos = 0
    while pos < len(body):
        pm = _PAIR.match(body, pos)
        if not pm:
            raise FactParseError(f"malformed attribute list near {body[pos:].strip()!r}", lineno)
        name, raw = pm.group(1), pm.group(2)
        values[name] = raw[1:-1] if raw.startswith('"') else int(raw)
        pos = pm.end()
        if pm.group(3) == "" and pos < len(body):
            raise FactParseError(f"trailing garbage: {body[pos:].strip()!r}", lineno)
    return Fact(type_name, values)


def load_facts(wm: WorkingMemory, source) -> int:
    """Insert facts from a file path, open text stream, or string; returns count."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, Path)) and "\n" not in str(source) and Path(source).is_file():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    count = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        wm.insert(parse_fact_line(line, lineno))
        count += 1
    return count


def render_fact(fact: Fact) -> str:
    parts = []
    for attr, value in fact.values.items():
        parts.append(f'{attr}="{value}"' if isinstance(value, str) else f"{attr}={value}")
    return f"{fact.type_name}({', '.join(parts)})"
