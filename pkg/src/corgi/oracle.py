"""Brute-force reference matcher: full typed Cartesian product, filter everything.

Deliberately naive; shares comparator semantics with the relation graph through
the Comparator enum so both routes evaluate literals identically.
"""

from __future__ import annotations

import itertools
import math

from .errors import OracleLimitError
from .facts import WorkingMemory
from .patterns import AlphaLiteral, BetaLiteral, Conjunction, SelfLiteral

DEFAULT_LIMIT = 10_000_000


def enumerate_all(conj: Conjunction, wm: WorkingMemory, limit: int = DEFAULT_LIMIT):
    """Exact list of satisfying bindings, as fact-id tuples in declaration order,
    lexicographically sorted."""
    domains = [sorted(wm.ids_of_type(v.type_name)) for v in conj.vars]
    total = math.prod(len(d) for d in domains)
    if total > limit:
        raise OracleLimitError(f"{total} candidate tuples exceeds limit {limit}")

    positions = {v: i for i, v in enumerate(conj.vars)}
    checks = []
    for lit in conj.literals:
        if isinstance(lit, AlphaLiteral):
            checks.append((positions[lit.var], None, lit))
        elif isinstance(lit, SelfLiteral):
            checks.append((positions[lit.var], None, lit))
        elif isinstance(lit, BetaLiteral):
            checks.append((positions[lit.left_var], positions[lit.right_var], lit))

    matches = []
    for combo in itertools.product(*domains):
        ok = True
        for i, j, lit in checks:
            fi = wm.store[combo[i]]
            if isinstance(lit, AlphaLiteral):
                if not lit.cmp.eval(fi[lit.attr], lit.constant):
                    ok = False
                    break
            elif isinstance(lit, SelfLiteral):
                if not lit.cmp.eval(fi[lit.left_attr], fi[lit.right_attr]):
                    ok = False
                    break
            else:
                fj = wm.store[combo[j]]
                if not lit.cmp.eval(fi[lit.left_attr], fj[lit.right_attr]):
                    ok = False
                    break
        if ok:
            matches.append(combo)
    return matches


def equivalent(conj: Conjunction, wm: WorkingMemory, limit: int = DEFAULT_LIMIT) -> bool:
    """True iff the relation-graph iterator yields exactly the oracle's match set."""
    from .matchiter import MatchIterator
    from .relgraph import compile_pattern

    expected = set(enumerate_all(conj, wm, limit))
    graph = compile_pattern(conj)
    graph.update(wm)
    got = {m.key() for m in MatchIterator(graph)}
    return got == expected
