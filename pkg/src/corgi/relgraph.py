"""Forward pass: compile a conjunction into a relation graph and maintain it.

The graph keeps one alpha node per unary filter and one beta node per binary
relation. A beta node stores a 2-D bit table over the two variables' candidate
facts (rows = earlier variable, columns = later variable, per the graph's
variable order) plus, for equality relations, a value index that avoids
pairwise evaluation. No structure of arity greater than two exists anywhere:
edges carry plain per-variable collections of fact ids.

After draining working-memory changes, per-variable candidate collections are
re-derived by pruning to a fixpoint: a fact stays a candidate only while it
contributes at least one true bit in every relation it participates in,
against the other side's surviving candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    PendingChangesError,
    StaleGraphError,
    UnknownBindingError,
    UnknownVarError,
)
from .facts import INT, WorkingMemory
from .patterns import (
    AlphaLiteral,
    BetaLiteral,
    Comparator,
    Conjunction,
    OrderStrategy,
    SelfLiteral,
    Var,
)


def beta_eval(literal: BetaLiteral, fact_left, fact_right) -> bool:
    """Apply a beta literal's comparator to two facts' attribute values."""
    return literal.cmp.eval(fact_left[literal.left_attr], fact_right[literal.right_attr])


_NUMPY_OPS = {
    Comparator.EQ: np.equal,
    Comparator.NE: np.not_equal,
    Comparator.LT: np.less,
    Comparator.LE: np.less_equal,
    Comparator.GT: np.greater,
    Comparator.GE: np.greater_equal,
}


class _Axis:
    """One dimension of a bit table: slot map with a free list, never compacted."""

    __slots__ = ("slot_of", "fact_at", "free", "vals", "occ", "cap", "peak")

    def __init__(self, kind: str):
        self.slot_of: dict[int, int] = {}
        self.fact_at: list[int | None] = []
        self.free: list[int] = []
        dtype = np.int64 if kind == INT else object
        self.vals = np.zeros(0, dtype=dtype)
        self.occ = np.zeros(0, dtype=bool)
        self.cap = 0
        self.peak = 0

    @property
    def logical(self) -> int:
        return len(self.slot_of)

    def occupied_facts(self):
        return self.slot_of.keys()

    def acquire(self, fact_id: int, value) -> tuple[int, bool]:
        """Returns (slot, grew). Reuses a freed slot before growing."""
        grew = False
        if self.free:
            slot = self.free.pop()
        else:
            if len(self.fact_at) == self.cap:
                self._grow()
                grew = True
            slot = len(self.fact_at)
            self.fact_at.append(None)
        self.fact_at[slot] = fact_id
        self.slot_of[fact_id] = slot
        self.vals[slot] = value
        self.occ[slot] = True
        self.peak = max(self.peak, self.logical)
        return slot, grew

    def release(self, fact_id: int) -> int:
        slot = self.slot_of.pop(fact_id)
        self.fact_at[slot] = None
        self.occ[slot] = False
        self.free.append(slot)
        return slot

    def _grow(self):
        self._resize(max(1, self.cap * 2))

    def reserve(self, extra: int) -> bool:
        """Ensure capacity for `extra` more acquisitions; returns True if grown."""
        need = len(self.fact_at) + max(0, extra - len(self.free))
        if need <= self.cap:
            return False
        # exact-size large batch reservations; keep doubling for small ones so
        # repeated single-fact updates stay amortized constant
        self._resize(max(need, min(self.cap * 2, need * 2)))
        return True

    def _resize(self, new_cap: int):
        vals = np.zeros(new_cap, dtype=self.vals.dtype)
        occ = np.zeros(new_cap, dtype=bool)
        vals[: self.cap] = self.vals
        occ[: self.cap] = self.occ
        self.vals, self.occ, self.cap = vals, occ, new_cap


class BitTable:
    """Dense 2-D truth table over two slot axes; grows by doubling, slots stable.

    Storage is bit-packed eight column slots per byte (little bit order), so a
    table over n x m facts costs about n*m/8 bytes.
    """

    def __init__(self, row_kind: str, col_kind: str):
        self.rows = _Axis(row_kind)
        self.cols = _Axis(col_kind)
        self.bits = np.zeros((0, 0), dtype=np.uint8)

    @property
    def allocated_bits(self) -> int:
        return self.rows.cap * self.cols.cap

    def add_row(self, fact_id: int, value) -> int:
        slot, grew = self.rows.acquire(fact_id, value)
        if grew:
            bits = np.zeros((self.rows.cap, self.bits.shape[1]), dtype=np.uint8)
            bits[: self.bits.shape[0], :] = self.bits
            self.bits = bits
        return slot

    def add_col(self, fact_id: int, value) -> int:
        slot, grew = self.cols.acquire(fact_id, value)
        if grew:
            width = (self.cols.cap + 7) >> 3
            if width != self.bits.shape[1]:
                bits = np.zeros((self.rows.cap, width), dtype=np.uint8)
                bits[:, : self.bits.shape[1]] = self.bits
                self.bits = bits
        return slot

    def remove_row(self, fact_id: int):
        slot = self.rows.release(fact_id)
        self.bits[slot, :] = 0

    def remove_col(self, fact_id: int):
        slot = self.cols.release(fact_id)
        self.bits[:, slot >> 3] &= np.uint8(~(1 << (slot & 7)) & 0xFF)

    def set_slot(self, row_slot: int, col_slot: int, flag: bool = True):
        mask = 1 << (col_slot & 7)
        if flag:
            self.bits[row_slot, col_slot >> 3] |= np.uint8(mask)
        else:
            self.bits[row_slot, col_slot >> 3] &= np.uint8(~mask & 0xFF)

    def bit_slot(self, row_slot: int, col_slot: int) -> bool:
        return bool((self.bits[row_slot, col_slot >> 3] >> (col_slot & 7)) & 1)

    def bit(self, row_fact: int, col_fact: int) -> bool:
        return self.bit_slot(self.rows.slot_of[row_fact], self.cols.slot_of[col_fact])

    def reserve(self, extra_rows: int, extra_cols: int):
        """Pre-grow both axes so a batch of insertions reallocates at most once."""
        grew_r = self.rows.reserve(extra_rows)
        grew_c = self.cols.reserve(extra_cols)
        if grew_r or grew_c:
            width = (self.cols.cap + 7) >> 3
            bits = np.zeros((self.rows.cap, width), dtype=np.uint8)
            bits[: self.bits.shape[0], : self.bits.shape[1]] = self.bits
            self.bits = bits

    def write_row(self, row_slot: int, bools):
        """Overwrite one row's bits for column slots [0, len(bools))."""
        packed = np.packbits(bools, bitorder="little")
        self.bits[row_slot, : len(packed)] = packed
        self.bits[row_slot, len(packed):] = 0

    def write_col(self, col_slot: int, bools):
        """Overwrite one column's bits for row slots [0, len(bools))."""
        view = self.bits[: len(bools), col_slot >> 3]
        mask = 1 << (col_slot & 7)
        view &= np.uint8(~mask & 0xFF)
        view |= np.asarray(bools, dtype=bool) * np.uint8(mask)

    def col_bools(self, col_slot: int):
        """All allocated row slots' bits for one column, as 0/1 values."""
        return (self.bits[: len(self.rows.fact_at), col_slot >> 3] >> (col_slot & 7)) & 1

    def gather(self, row_slots, col_slots):
        """Sub-matrix of bits as 0/1 values, shape (len(row_slots), len(col_slots))."""
        chunk = self.bits[np.ix_(row_slots, [c >> 3 for c in col_slots])]
        shifts = np.fromiter((c & 7 for c in col_slots), dtype=np.uint8, count=len(col_slots))
        return (chunk >> shifts) & 1


class AlphaNode:
    """Unary filter node; output holds exactly the facts satisfying the literal."""

    def __init__(self, literal):
        self.literal = literal
        self.output: set[int] = set()

    def test(self, fact) -> bool:
        lit = self.literal
        if isinstance(lit, SelfLiteral):
            return lit.cmp.eval(fact[lit.left_attr], fact[lit.right_attr])
        return lit.cmp.eval(fact[lit.attr], lit.constant)

    @property
    def var(self) -> Var:
        return self.literal.var


class BetaNode:
    """Binary relation node: bit table keyed (earlier rows) x (later columns)."""

    def __init__(self, literal: BetaLiteral, earlier: Var, later: Var, row_kind, col_kind,
                 use_eq_index=True):
        self.literal = literal
        self.earlier = earlier
        self.later = later
        # attribute belonging to each side, honoring the literal's operand order
        if literal.left_var == earlier:
            self.earlier_attr, self.later_attr = literal.left_attr, literal.right_attr
            self._cmp_rows_cols = literal.cmp
        else:
            self.earlier_attr, self.later_attr = literal.right_attr, literal.left_attr
            self._cmp_rows_cols = _flip(literal.cmp)
        self.table = BitTable(row_kind, col_kind)
        self.eq_index = use_eq_index and self._cmp_rows_cols == Comparator.EQ
        self._row_index: dict = {}
        self._col_index: dict = {}

    def insert_earlier(self, fact_id: int, fact) -> int:
        value = fact[self.earlier_attr]
        slot = self.table.add_row(fact_id, value)
        cols = self.table.cols
        if self.eq_index:
            hits = self._col_index.get(value, ())
            for c in hits:
                self.table.set_slot(slot, c)
            self._row_index.setdefault(value, set()).add(slot)
            evaluated = len(hits)
        else:
            op = _NUMPY_OPS[self._cmp_rows_cols]
            w = len(cols.fact_at)  # used-slot region only, not full capacity
            if w:
                row = np.asarray(op(value, cols.vals[:w]), dtype=bool)
                row &= cols.occ[:w]
                self.table.write_row(slot, row)
            evaluated = cols.logical
        return evaluated

    def insert_later(self, fact_id: int, fact) -> int:
        value = fact[self.later_attr]
        slot = self.table.add_col(fact_id, value)
        rows = self.table.rows
        if self.eq_index:
            hits = self._row_index.get(value, ())
            for r in hits:
                self.table.set_slot(r, slot)
            self._col_index.setdefault(value, set()).add(slot)
            evaluated = len(hits)
        else:
            op = _NUMPY_OPS[self._cmp_rows_cols]
            h = len(rows.fact_at)  # used-slot region only, not full capacity
            if h:
                col = np.asarray(op(rows.vals[:h], value), dtype=bool)
                col &= rows.occ[:h]
                self.table.write_col(slot, col)
            evaluated = rows.logical
        return evaluated

    def remove_earlier(self, fact_id: int):
        if self.eq_index:
            slot = self.table.rows.slot_of[fact_id]
            value = self.table.rows.vals[slot]
            self._row_index[value].discard(slot)
        self.table.remove_row(fact_id)

    def remove_later(self, fact_id: int):
        if self.eq_index:
            slot = self.table.cols.slot_of[fact_id]
            value = self.table.cols.vals[slot]
            self._col_index[value].discard(slot)
        self.table.remove_col(fact_id)

    def supports(self, cand_earlier: set[int], cand_later: set[int]):
        """Facts on each side with >=1 true bit against the other side's candidates."""
        rows = [f for f in cand_earlier if f in self.table.rows.slot_of]
        cols = [f for f in cand_later if f in self.table.cols.slot_of]
        if not rows or not cols:
            return set(), set()
        ri = np.fromiter((self.table.rows.slot_of[f] for f in rows), dtype=np.intp, count=len(rows))
        ci = np.fromiter((self.table.cols.slot_of[f] for f in cols), dtype=np.intp, count=len(cols))
        sub = self.table.gather(ri, ci)
        sup_e = {f for f, ok in zip(rows, sub.any(axis=1)) if ok}
        sup_l = {f for f, ok in zip(cols, sub.any(axis=0)) if ok}
        return sup_e, sup_l

    def lookup_earlier(self, later_fact: int) -> set[int]:
        """Earlier-side facts whose bit with later_fact is set."""
        try:
            c = self.table.cols.slot_of[later_fact]
        except KeyError:
            raise UnknownBindingError(
                f"fact {later_fact} is not a candidate for {self.later.name}"
            ) from None
        hits = np.nonzero(self.table.col_bools(c))[0]
        fact_at = self.table.rows.fact_at
        return {fact_at[r] for r in hits}


def _flip(cmp: Comparator) -> Comparator:
    return {
        Comparator.EQ: Comparator.EQ,
        Comparator.NE: Comparator.NE,
        Comparator.LT: Comparator.GT,
        Comparator.LE: Comparator.GE,
        Comparator.GT: Comparator.LT,
        Comparator.GE: Comparator.LE,
    }[cmp]


@dataclass
class Edge:
    """Per-variable candidate collection exposed at the deepest level."""

    var: Var
    collection: set[int]


@dataclass
class UpdateStats:
    events: int
    bits_evaluated: int
    collection_changes: int


@dataclass
class Component:
    vars: list[Var]
    beta_nodes: list[BetaNode]
    terminals: list


class RelationGraph:
    """Incrementally maintained alpha/beta node network for one conjunction."""

    def __init__(self, conj: Conjunction, order_strategy: OrderStrategy = OrderStrategy.DECLARATION,
                 use_eq_index: bool = True):
        self.conj = conj
        self.order: list[Var] = conj.order_variables(order_strategy)
        self.position = {v: i for i, v in enumerate(self.order)}
        self.use_eq_index = use_eq_index

        # unary filter chain per variable (alpha + self literals, insertion order)
        self.alpha_chain: dict[Var, list[AlphaNode]] = {v: [] for v in self.order}
        for lit in conj.literals:
            if isinstance(lit, (AlphaLiteral, SelfLiteral)):
                self.alpha_chain[lit.var].append(AlphaNode(lit))

        # beta nodes, oriented by the variable order, anchored at the later var
        self.beta_nodes: list[BetaNode] = []
        for lit in conj.literals:
            if not isinstance(lit, BetaLiteral):
                continue
            a, b = lit.left_var, lit.right_var
            earlier, later = (a, b) if self.position[a] < self.position[b] else (b, a)
            row_kind = conj.registry.get(earlier.type_name).kind_of(
                lit.left_attr if lit.left_var == earlier else lit.right_attr
            )
            col_kind = conj.registry.get(later.type_name).kind_of(
                lit.left_attr if lit.left_var == later else lit.right_attr
            )
            self.beta_nodes.append(
                BetaNode(lit, earlier, later, row_kind, col_kind, use_eq_index)
            )
        self.beta_nodes.sort(key=lambda n: self.position[n.later])  # stable: keeps insertion order

        self.nodes_of_var: dict[Var, list[BetaNode]] = {v: [] for v in self.order}
        self.nodes_with_earlier: dict[Var, list[BetaNode]] = {v: [] for v in self.order}
        for node in self.beta_nodes:
            self.nodes_of_var[node.earlier].append(node)
            self.nodes_of_var[node.later].append(node)
            self.nodes_with_earlier[node.earlier].append(node)

        self.terminal_nodes = self._find_terminals()

        # per-variable state
        self.pool: dict[Var, set[int]] = {v: set() for v in self.order}  # passed unary filters
        self.candidates: dict[Var, set[int]] = {v: set() for v in self.order}
        self._vars_of_type: dict[str, list[Var]] = {}
        for v in self.order:
            self._vars_of_type.setdefault(v.type_name, []).append(v)

        self.wm: WorkingMemory | None = None
        self.wm_cursor = 0
        self.epoch = 0
        self._registry_version = conj.registry.version

    # -- structure ----------------------------------------------------------

    def _find_terminals(self):
        terminals = []
        for node in self.beta_nodes:
            anchor = self.position[node.later]
            downstream = any(
                self.position[other.later] > anchor
                and {other.earlier, other.later} & {node.earlier, node.later}
                for other in self.beta_nodes
            )
            if not downstream:
                terminals.append(node)
        for var, chain in self.alpha_chain.items():
            if not self.nodes_of_var[var]:
                terminals.extend(chain)
        return terminals

    def graph_components(self) -> list[Component]:
        """Partition of variables by beta connectivity, with per-component terminals."""
        parent = {v: v for v in self.order}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for node in self.beta_nodes:
            ra, rb = find(node.earlier), find(node.later)
            if ra != rb:
                parent[ra] = rb
        groups: dict[Var, Component] = {}
        for v in self.order:
            groups.setdefault(find(v), Component([], [], [])).vars.append(v)
        for node in self.beta_nodes:
            groups[find(node.earlier)].beta_nodes.append(node)
        terminal_set = set(map(id, self.terminal_nodes))
        for comp in groups.values():
            comp.terminals = [n for n in comp.beta_nodes if id(n) in terminal_set]
            if not comp.terminals:
                comp.terminals = [
                    n for v in comp.vars for n in self.alpha_chain[v] if id(n) in terminal_set
                ]
        return list(groups.values())

    # -- maintenance ---------------------------------------------------------

    def update(self, wm: WorkingMemory) -> UpdateStats:
        """Drain wm's change log from this graph's cursor and repair all state."""
        if self.wm is not None and wm is not self.wm:
            raise StaleGraphError("graph is bound to a different working memory")
        if wm.registry is not self.conj.registry or wm.registry.version != self._registry_version:
            raise StaleGraphError("schema registry changed since compile")
        self.wm = wm

        events = wm.change_log[self.wm_cursor:]
        self.wm_cursor = len(wm.change_log)
        if not events:
            return UpdateStats(0, 0, 0)

        # presize bit tables for the whole batch so each axis reallocates at
        # most once per update instead of repeatedly doubling mid-batch
        incoming: dict = {}
        for op, fact_id in events:
            if op != "insert":
                continue
            fact = wm.store.get(fact_id)
            if fact is None:
                continue
            for var in self._vars_of_type.get(fact.type_name, ()):
                if all(node.test(fact) for node in self.alpha_chain[var]):
                    incoming[var] = incoming.get(var, 0) + 1
        if incoming:
            for node in self.beta_nodes:
                node.table.reserve(incoming.get(node.earlier, 0), incoming.get(node.later, 0))

        bits_evaluated = 0
        # retract events arrive after the fact is gone from the store, so track
        # which vars each inserted fact joined
        for op, fact_id in events:
            if op == "insert":
                fact = wm.store.get(fact_id)
                if fact is None:
                    continue  # inserted and retracted within this batch; retract event follows
                bits_evaluated += self._apply_insert(fact_id, fact)
            else:
                self._apply_retract(fact_id)

        old = {v: set(c) for v, c in self.candidates.items()}
        self._refresh_candidates()
        changes = sum(len(old[v] ^ self.candidates[v]) for v in self.order)
        self.epoch += 1
        return UpdateStats(len(events), bits_evaluated, changes)

    def _apply_insert(self, fact_id: int, fact) -> int:
        evaluated = 0
        for var in self._vars_of_type.get(fact.type_name, ()):
            passed = True
            for node in self.alpha_chain[var]:
                if node.test(fact):
                    node.output.add(fact_id)
                else:
                    passed = False
            if not passed:
                continue
            self.pool[var].add(fact_id)
            for node in self.nodes_of_var[var]:
                if node.earlier == var:
                    evaluated += node.insert_earlier(fact_id, fact)
                if node.later == var:
                    evaluated += node.insert_later(fact_id, fact)
        return evaluated

    def _apply_retract(self, fact_id: int):
        for var in self.order:
            for node in self.alpha_chain[var]:
                node.output.discard(fact_id)
            if fact_id not in self.pool[var]:
                continue
            self.pool[var].discard(fact_id)
            for node in self.nodes_of_var[var]:
                if node.earlier == var and fact_id in node.table.rows.slot_of:
                    node.remove_earlier(fact_id)
                if node.later == var and fact_id in node.table.cols.slot_of:
                    node.remove_later(fact_id)

    def _refresh_candidates(self):
        """Prune per-variable collections to the mutual-support fixpoint."""
        cand = {v: set(self.pool[v]) for v in self.order}
        changed = True
        while changed:
            changed = False
            for node in self.beta_nodes:
                sup_e, sup_l = node.supports(cand[node.earlier], cand[node.later])
                if sup_e != cand[node.earlier]:
                    cand[node.earlier] = sup_e
                    changed = True
                if sup_l != cand[node.later]:
                    cand[node.later] = sup_l
                    changed = True
        self.candidates = cand

    # -- queries --------------------------------------------------------------

    def has_pending(self) -> bool:
        return self.wm is None or self.wm_cursor != len(self.wm.change_log)

    def require_quiescent(self):
        if self.has_pending():
            raise PendingChangesError("graph has unconsumed working-memory changes")

    def edge_candidates(self, var: Var) -> set[int]:
        if var not in self.position:
            raise UnknownVarError(f"variable {var.name!r} is not in this graph")
        return set(self.candidates[var])

    def edges(self) -> dict[str, Edge]:
        return {v.name: Edge(v, set(self.candidates[v])) for v in self.order}

    def mapping_lookup(self, node: BetaNode, later_binding: int) -> set[int]:
        """Earlier-variable candidates consistent with one later-variable binding."""
        return node.lookup_earlier(later_binding) & self.candidates[node.earlier]

    def find_beta(self, literal: BetaLiteral) -> BetaNode:
        for node in self.beta_nodes:
            if node.literal == literal:
                return node
        raise UnknownVarError(f"no beta node for {literal.render()}")

    def beta_table_view(self, node: BetaNode):
        """(earlier ids, later ids, bit rows) restricted to current candidates."""
        earlier = sorted(self.candidates[node.earlier] & set(node.table.rows.slot_of))
        later = sorted(self.candidates[node.later] & set(node.table.cols.slot_of))
        rows = [
            [int(node.table.bit(e, l)) for l in later]
            for e in earlier
        ]
        return earlier, later, rows

    # -- auditing / debugging ---------------------------------------------------

    def assert_quadratic_space(self):
        """Allocated bits stay within doubling slack of peak occupancy; arity <= 2."""
        for node in self.beta_nodes:
            t = node.table
            bound = 4 * max(1, t.rows.peak) * max(1, t.cols.peak)
            if t.allocated_bits > bound:
                raise AssertionError(
                    f"bit table over budget at {node.literal.render()}: "
                    f"{t.allocated_bits} bits allocated, bound {bound}"
                )
            if t.bits.ndim != 2:
                raise AssertionError("bit table is not 2-D")
        for coll in list(self.pool.values()) + list(self.candidates.values()):
            for member in coll:
                if not isinstance(member, int):
                    raise AssertionError(f"non-scalar member in edge collection: {member!r}")

    def debug_dump(self) -> str:
        """Deterministic text rendering of logical graph state (slot layout excluded)."""
        lines = [f"order: {' '.join(v.name for v in self.order)}"]
        for var in self.order:
            for node in self.alpha_chain[var]:
                lines.append(f"alpha {node.literal.render()}: {sorted(node.output)}")
            lines.append(f"pool {var.name}: {sorted(self.pool[var])}")
            lines.append(f"candidates {var.name}: {sorted(self.candidates[var])}")
        for node in self.beta_nodes:
            lines.append(
                f"beta {node.literal.render()} [earlier={node.earlier.name} later={node.later.name}]"
            )
            rows = sorted(node.table.rows.slot_of)
            cols = sorted(node.table.cols.slot_of)
            lines.append(f"  rows: {rows}")
            lines.append(f"  cols: {cols}")
            for r in rows:
                bits = "".join(str(int(node.table.bit(r, c))) for c in cols)
                lines.append(f"  {r}: {bits}")
        return "\n".join(lines)


def compile_pattern(conj: Conjunction, order_strategy: OrderStrategy = OrderStrategy.DECLARATION,
                    use_eq_index: bool = True) -> RelationGraph:
    """Compile a conjunction into an (empty) relation graph; update() loads facts."""
    return RelationGraph(conj, order_strategy, use_eq_index)
