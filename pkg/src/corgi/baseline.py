"""Naive RETE-style contrast matcher: materialize partial matches level by level.

Joins left to right in declaration order with no reordering or sharing. Memory
is accounted at 8 bytes per stored binding slot (level k tuples cost 8*k bytes
each); when the accounting for all retained levels exceeds the cap, the build
stops with a structured overflow instead of completing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import BaselineMemoryOverflow, BaselineTimeout
from .facts import WorkingMemory
from .patterns import AlphaLiteral, BetaLiteral, Conjunction, SelfLiteral

_SLOT_BYTES = 8
_DEADLINE_STRIDE = 4096


@dataclass
class PartialMatchStore:
    """Per-level tuple counts plus the byte accounting that ran up against the cap."""

    level_counts: list[int] = field(default_factory=list)
    bytes_accounted: int = 0


@dataclass
class BaselineResult:
    matches: list[tuple]
    store: PartialMatchStore


def build_and_match(conj: Conjunction, wm: WorkingMemory, memory_cap: int = 1 << 30,
                    deadline: float | None = None) -> BaselineResult:
    """Full left-to-right join; raises BaselineMemoryOverflow / BaselineTimeout."""
    store = PartialMatchStore()
    positions = {v: i for i, v in enumerate(conj.vars)}

    # per-variable candidates after unary filters, and per-level join literals
    unary = {i: [] for i in range(len(conj.vars))}
    joins = {i: [] for i in range(len(conj.vars))}
    for lit in conj.literals:
        if isinstance(lit, (AlphaLiteral, SelfLiteral)):
            unary[positions[lit.var]].append(lit)
        elif isinstance(lit, BetaLiteral):
            joins[max(positions[lit.left_var], positions[lit.right_var])].append(lit)

    def passes_unary(fact, lits):
        for lit in lits:
            if isinstance(lit, AlphaLiteral):
                if not lit.cmp.eval(fact[lit.attr], lit.constant):
                    return False
            else:
                if not lit.cmp.eval(fact[lit.left_attr], fact[lit.right_attr]):
                    return False
        return True

    candidates = []
    for i, var in enumerate(conj.vars):
        ids = sorted(wm.ids_of_type(var.type_name))
        candidates.append([f for f in ids if passes_unary(wm.store[f], unary[i])])

    level: list[tuple] = [()]
    total_tuples = 0
    ops = 0
    for k, var in enumerate(conj.vars):
        width = k + 1
        cands = candidates[k]
        level_joins = joins[k]
        if not level_joins:
            # Unconstrained extension: the level size is known up front, so the
            # overflow can be reported without materializing past the cap.
            projected = _SLOT_BYTES * width * len(level) * len(cands)
            if store.bytes_accounted + projected > memory_cap:
                raise BaselineMemoryOverflow(width, total_tuples, store.bytes_accounted + projected)
        max_new = (memory_cap - store.bytes_accounted) // (_SLOT_BYTES * width)
        new_level: list[tuple] = []
        append = new_level.append
        for prefix in level:
            for cand in cands:
                ops += 1
                if deadline is not None and ops % _DEADLINE_STRIDE == 0 and time.perf_counter() > deadline:
                    raise BaselineTimeout(f"deadline exceeded at level {width}")
                fact = wm.store[cand]
                ok = True
                for lit in level_joins:
                    li, ri = positions[lit.left_var], positions[lit.right_var]
                    lf = fact if li == k else wm.store[prefix[li]]
                    rf = fact if ri == k else wm.store[prefix[ri]]
                    if not lit.cmp.eval(lf[lit.left_attr], rf[lit.right_attr]):
                        ok = False
                        break
                if ok:
                    if len(new_level) >= max_new:
                        raise BaselineMemoryOverflow(
                            width,
                            total_tuples + len(new_level),
                            store.bytes_accounted + _SLOT_BYTES * width * (len(new_level) + 1),
                        )
                    append(prefix + (cand,))
        level = new_level
        store.level_counts.append(len(level))
        store.bytes_accounted += _SLOT_BYTES * width * len(level)
        total_tuples += len(level)
    return BaselineResult(level, store)
