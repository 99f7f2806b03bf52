"""Backward pass: lazily stream full matches out of a relation graph.

Variables are bound in reverse graph order, so the last variable is the
outermost loop and earlier variables are exhausted before a later variable
advances. Candidates for an earlier variable are resolved by intersecting the
mapping lookups from every already-bound later partner; an empty intersection
backtracks immediately. Only cursors and one candidate buffer per variable are
kept, never the yielded matches.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidatedIteratorError
from .relgraph import RelationGraph


@dataclass(frozen=True)
class Match:
    """One full binding: (variable name, fact id) pairs in declaration order."""

    items: tuple[tuple[str, int], ...]

    @property
    def bindings(self) -> dict[str, int]:
        return dict(self.items)

    def key(self) -> tuple[int, ...]:
        return tuple(fact_id for _, fact_id in self.items)

    def __getitem__(self, var_name: str) -> int:
        return self.bindings[var_name]


class _Cursor:
    __slots__ = ("candidates", "index")

    def __init__(self, candidates):
        self.candidates = candidates
        self.index = -1


class MatchIterator:
    """Cursor stack streaming matches; invalidated by any graph update."""

    def __init__(self, graph: RelationGraph, candidate_key=None):
        graph.require_quiescent()
        self.graph = graph
        self.epoch = graph.epoch
        self.order = graph.order  # bound from the end backwards
        self.materialized_count = 0
        self._key = candidate_key
        self._stack: list[_Cursor] = []
        self._bindings: dict = {}  # var -> fact id, for positions already bound
        self._started = False
        self._exhausted = len(self.order) == 0

    def _candidates_for(self, pos: int):
        """Candidate buffer for order[pos] given bindings of all later variables."""
        var = self.order[pos]
        current = self.graph.candidates[var]
        for node in self.graph.nodes_with_earlier[var]:
            if not current:
                break
            mapped = node.lookup_earlier(self._bindings[node.later])
            current = current & mapped
        buf = sorted(current)
        if self._key is not None:
            buf.sort(key=lambda fact_id: self._key(var, fact_id))
        return buf

    def next_match(self) -> Match | None:
        """Next match, or None once exhausted (idempotent)."""
        if self._exhausted:
            return None
        if self.epoch != self.graph.epoch:
            raise InvalidatedIteratorError("graph updated since iterator creation")
        k = len(self.order)
        if not self._started:
            self._started = True
            self._stack.append(_Cursor(self._candidates_for(k - 1)))
        while self._stack:
            top = self._stack[-1]
            top.index += 1
            pos = k - len(self._stack)  # variable position this cursor binds
            if top.index >= len(top.candidates):
                self._stack.pop()
                self._bindings.pop(self.order[pos], None)
                continue
            self._bindings[self.order[pos]] = top.candidates[top.index]
            if len(self._stack) == k:
                self.materialized_count += 1
                return Match(tuple((v.name, self._bindings[v]) for v in self.order))
            self._stack.append(_Cursor(self._candidates_for(pos - 1)))
        self._exhausted = True
        return None

    def __iter__(self):
        return self

    def __next__(self) -> Match:
        m = self.next_match()
        if m is None:
            raise StopIteration
        return m


def iterator(graph: RelationGraph, candidate_key=None) -> MatchIterator:
    """Lazy iterator over all matches of the graph's conjunction."""
    return MatchIterator(graph, candidate_key)


def has_match(graph: RelationGraph) -> bool:
    """True iff at least one match exists; materializes at most one match."""
    return MatchIterator(graph).next_match() is not None


def count_materialized(it: MatchIterator) -> int:
    return it.materialized_count
