"""First-class condition expressions: typed variables, literals, conjunctions.

A Conjunction is a flat AND of literals over declared variables. Literals come
in three arities: alpha (attribute vs constant), beta (attributes of two
different variables), and self (two attributes of one variable, which behaves
like an alpha-level filter). Attribute references support Python comparison
operators, so conditions can be written directly:

    D = conj.make_var("Department", "D")
    conj.conjoin(D.city == "Houston")
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import (
    DuplicateVarNameError,
    PatternParseError,
    TypeMismatchError,
    UndeclaredVarError,
    UnknownAttributeError,
)
from .facts import INT, STR, TypeRegistry


class Comparator(enum.Enum):
    EQ = "=="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="

    @property
    def symbol(self) -> str:
        return self.value

    @property
    def ordered(self) -> bool:
        return self in (Comparator.LT, Comparator.LE, Comparator.GT, Comparator.GE)

    def eval(self, a, b) -> bool:
        if self is Comparator.EQ:
            return a == b
        if self is Comparator.NE:
            return a != b
        if self is Comparator.LT:
            return a < b
        if self is Comparator.LE:
            return a <= b
        if self is Comparator.GT:
            return a > b
        return a >= b


_SYMBOL_TO_CMP = {c.value: c for c in Comparator}


@dataclass(frozen=True)
class Var:
    name: str
    type_name: str

    def __getattr__(self, attr):
        # Dot access builds an attribute reference (D.city), mirroring how
        # conditions are written inline. Dataclass fields win over this hook.
        if attr.startswith("_"):
            raise AttributeError(attr)
        return AttrRef(self, attr)

    def ref(self, attr: str) -> "AttrRef":
        return AttrRef(self, attr)


class AttrRef:
    """A (variable, attribute) pair; comparisons against it produce literals."""

    __slots__ = ("var", "attr")

    def __init__(self, var: Var, attr: str):
        self.var = var
        self.attr = attr

    def _literal(self, cmp: Comparator, other):
        if isinstance(other, AttrRef):
            if other.var == self.var:
                return SelfLiteral(self.var, self.attr, cmp, other.attr)
            return BetaLiteral(self.var, self.attr, cmp, other.var, other.attr)
        return AlphaLiteral(self.var, self.attr, cmp, other)

    def __eq__(self, other):
        return self._literal(Comparator.EQ, other)

    def __ne__(self, other):
        return self._literal(Comparator.NE, other)

    def __lt__(self, other):
        return self._literal(Comparator.LT, other)

    def __le__(self, other):
        return self._literal(Comparator.LE, other)

    def __gt__(self, other):
        return self._literal(Comparator.GT, other)

    def __ge__(self, other):
        return self._literal(Comparator.GE, other)

    def __hash__(self):
        return hash((self.var, self.attr))

    def __repr__(self):
        return f"{self.var.name}.{self.attr}"


@dataclass(frozen=True)
class AlphaLiteral:
    var: Var
    attr: str
    cmp: Comparator
    constant: object

    def render(self) -> str:
        c = f'"{self.constant}"' if isinstance(self.constant, str) else str(self.constant)
        return f"{self.var.name}.{self.attr} {self.cmp.symbol} {c}"


@dataclass(frozen=True)
class BetaLiteral:
    left_var: Var
    left_attr: str
    cmp: Comparator
    right_var: Var
    right_attr: str

    def render(self) -> str:
        return (
            f"{self.left_var.name}.{self.left_attr} {self.cmp.symbol} "
            f"{self.right_var.name}.{self.right_attr}"
        )


@dataclass(frozen=True)
class SelfLiteral:
    """Two attributes of one variable; filters single bindings like an alpha."""

    var: Var
    left_attr: str
    cmp: Comparator
    right_attr: str

    def render(self) -> str:
        return f"{self.var.name}.{self.left_attr} {self.cmp.symbol} {self.var.name}.{self.right_attr}"


class OrderStrategy(enum.Enum):
    DECLARATION = "declaration"
    DEGREE_DESCENDING = "degree_descending"


class Conjunction:
    """Ordered variables plus a flat list of literals, built incrementally.

    Treated as immutable once compiled into a relation graph.
    """

    def __init__(self, registry: TypeRegistry):
        self.registry = registry
        self.vars: list[Var] = []
        self.literals: list = []
        self._by_name: dict[str, Var] = {}

    # -- building ----------------------------------------------------------

    def make_var(self, type_name: str, name: str) -> Var:
        if name in self._by_name:
            raise DuplicateVarNameError(f"variable {name!r} already declared")
        self.registry.get(type_name)  # raises UnknownTypeError
        var = Var(name, type_name)
        self.vars.append(var)
        self._by_name[name] = var
        return var

    def conjoin(self, *literals) -> "Conjunction":
        for lit in literals:
            self._check(lit)
            self.literals.append(lit)
        return self

    def _kind(self, var: Var, attr: str) -> str:
        schema = self.registry.get(var.type_name)
        if not schema.has_attr(attr):
            raise UnknownAttributeError(f"{var.type_name} has no attribute {attr!r}")
        return schema.kind_of(attr)

    def _require_declared(self, var: Var):
        if self._by_name.get(var.name) != var:
            raise UndeclaredVarError(f"variable {var.name!r} is not declared in this conjunction")

    def _check(self, lit):
        if isinstance(lit, AlphaLiteral):
            self._require_declared(lit.var)
            kind = self._kind(lit.var, lit.attr)
            const_kind = INT if isinstance(lit.constant, int) and not isinstance(lit.constant, bool) else (
                STR if isinstance(lit.constant, str) else None
            )
            if const_kind is None:
                raise TypeMismatchError(f"unsupported constant {lit.constant!r}")
            if const_kind != kind:
                raise TypeMismatchError(f"{lit.render()}: attribute kind {kind}, constant kind {const_kind}")
            if lit.cmp.ordered and kind != INT:
                raise TypeMismatchError(f"{lit.render()}: ordered comparison needs integer operands")
        elif isinstance(lit, BetaLiteral):
            self._require_declared(lit.left_var)
            self._require_declared(lit.right_var)
            lk = self._kind(lit.left_var, lit.left_attr)
            rk = self._kind(lit.right_var, lit.right_attr)
            if lk != rk:
                raise TypeMismatchError(f"{lit.render()}: operand kinds differ ({lk} vs {rk})")
            if lit.cmp.ordered and lk != INT:
                raise TypeMismatchError(f"{lit.render()}: ordered comparison needs integer operands")
        elif isinstance(lit, SelfLiteral):
            self._require_declared(lit.var)
            lk = self._kind(lit.var, lit.left_attr)
            rk = self._kind(lit.var, lit.right_attr)
            if lk != rk:
                raise TypeMismatchError(f"{lit.render()}: operand kinds differ ({lk} vs {rk})")
            if lit.cmp.ordered and lk != INT:
                raise TypeMismatchError(f"{lit.render()}: ordered comparison needs integer operands")
        else:
            raise TypeMismatchError(f"not a literal: {lit!r}")

    # -- views -------------------------------------------------------------

    @property
    def alphas(self) -> list[AlphaLiteral]:
        return [l for l in self.literals if isinstance(l, AlphaLiteral)]

    @property
    def betas(self) -> list[BetaLiteral]:
        return [l for l in self.literals if isinstance(l, BetaLiteral)]

    @property
    def selfs(self) -> list[SelfLiteral]:
        return [l for l in self.literals if isinstance(l, SelfLiteral)]

    def var(self, name: str) -> Var:
        try:
            return self._by_name[name]
        except KeyError:
            raise UndeclaredVarError(f"variable {name!r} is not declared") from None

    def position(self, var: Var) -> int:
        self._require_declared(var)
        return self.vars.index(var)

    def _grouped_literals(self) -> list:
        # literals in standard-form order: grouped under the latest variable
        # they mention, insertion order within a group
        return [
            lit
            for i in range(len(self.vars))
            for lit in self.literals
            if _anchor_index(self, lit) == i
        ]

    def __eq__(self, other):
        """Structural equality, insensitive to the anchor regrouping that
        standard-form printing performs."""
        return (
            isinstance(other, Conjunction)
            and self.vars == other.vars
            and self._grouped_literals() == other._grouped_literals()
        )

    def __repr__(self):
        return to_standard_form(self)

    # -- analysis ----------------------------------------------------------

    def relation_degree(self, var: Var) -> int:
        """Distinct other variables sharing at least one beta literal with var."""
        self._require_declared(var)
        partners = set()
        for lit in self.betas:
            if lit.left_var == var:
                partners.add(lit.right_var)
            elif lit.right_var == var:
                partners.add(lit.left_var)
        return len(partners)

    def order_variables(self, strategy: OrderStrategy = OrderStrategy.DECLARATION) -> list[Var]:
        if strategy == OrderStrategy.DECLARATION:
            return list(self.vars)
        # Stable sort: ties keep declaration order.
        return sorted(self.vars, key=lambda v: -self.relation_degree(v))


# module-level operation aliases matching the builder vocabulary

def make_var(conj: Conjunction, type_name: str, name: str) -> Var:
    return conj.make_var(type_name, name)


def conjoin(conj: Conjunction, *literals) -> Conjunction:
    return conj.conjoin(*literals)


def relation_degree(conj: Conjunction, var: Var) -> int:
    return conj.relation_degree(var)


def order_variables(conj: Conjunction, strategy: OrderStrategy = OrderStrategy.DECLARATION):
    return conj.order_variables(strategy)


# --- standard form printing --------------------------------------------

def _anchor_index(conj: Conjunction, lit) -> int:
    if isinstance(lit, BetaLiteral):
        return max(conj.vars.index(lit.left_var), conj.vars.index(lit.right_var))
    var = lit.var
    return conj.vars.index(var)


def to_standard_form(conj: Conjunction) -> str:
    """Deterministic text: each variable followed by the literals anchored at it."""
    if not conj.vars:
        return "AND()"
    groups: list[list[str]] = []
    for i, var in enumerate(conj.vars):
        items = [f'{var.name}:=Var({var.type_name}, "{var.name}")']
        items.extend(lit.render() for lit in conj.literals if _anchor_index(conj, lit) == i)
        groups.append(items)
    lines = []
    for i, items in enumerate(groups):
        prefix = "AND(" if i == 0 else "    "
        suffix = "," if i < len(groups) - 1 else ""
        lines.append(prefix + ", ".join(items) + suffix)
    lines.append(")")
    return "\n".join(lines)


# --- standard form parsing ----------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<str>"[^"]*")
      | (?P<int>-?\d+)
      | (?P<op>:=|==|!=|<=|>=|<|>)
      | (?P<punct>[(),.])
      | (?P<name>[A-Za-z_]\w*)
    )""",
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise PatternParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, conj: Conjunction):
        self.tokens = tokens
        self.i = 0
        self.conj = conj

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tk, tv, pos = self.tokens[self.i]
        if (kind and tk != kind) or (value is not None and tv != value):
            want = value if value is not None else kind
            raise PatternParseError(f"expected {want!r}, found {tv!r}", pos)
        self.i += 1
        return tv, pos

    def parse(self) -> Conjunction:
        self.take("name", "AND")
        self.take("punct", "(")
        if self.peek()[1] != ")":
            self.item()
            while self.peek()[1] == ",":
                self.take("punct", ",")
                self.item()
        self.take("punct", ")")
        self.take("eof")
        return self.conj

    def item(self):
        name, pos = self.take("name")
        kind, value, _ = self.peek()
        if value == ":=":
            self.take("op", ":=")
            self.take("name", "Var")
            self.take("punct", "(")
            type_name, _ = self.take("name")
            self.take("punct", ",")
            quoted, qpos = self.take("str")
            if quoted[1:-1] != name:
                raise PatternParseError(f"declaration name mismatch: {name} vs {quoted}", qpos)
            self.take("punct", ")")
            self.conj.make_var(type_name, name)
            return
        # comparison item: name.attr OP rhs
        self.take("punct", ".")
        attr, _ = self.take("name")
        opsym, oppos = self.take("op")
        cmp = _SYMBOL_TO_CMP.get(opsym)
        if cmp is None:
            raise PatternParseError(f"not a comparison operator: {opsym!r}", oppos)
        tk, tv, pos = self.peek()
        if tk == "str":
            self.take("str")
            rhs = tv[1:-1]
        elif tk == "int":
            self.take("int")
            rhs = int(tv)
        elif tk == "name":
            rname, _ = self.take("name")
            self.take("punct", ".")
            rattr, _ = self.take("name")
            rhs = self.conj.var(rname).ref(rattr)
        else:
            raise PatternParseError(f"expected a constant or attribute reference, found {tv!r}", pos)
        left = self.conj.var(name).ref(attr)
        self.conj.conjoin(left._literal(cmp, rhs))


def parse_pattern(text: str, registry: TypeRegistry) -> Conjunction:
    """Parse the standard-form grammar into a type-checked Conjunction."""
    return _Parser(_tokenize(text), Conjunction(registry)).parse()
