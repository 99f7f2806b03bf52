"""Shared helpers for randomized cross-checking against the brute-force oracle."""

import random

from corgi.facts import Fact, TypeRegistry, WorkingMemory
from corgi.matchiter import MatchIterator
from corgi.oracle import enumerate_all
from corgi.patterns import AlphaLiteral, BetaLiteral, Comparator, Conjunction
from corgi.relgraph import compile_pattern

CITIES = ["ada", "bly", "cor", "dun"]

TYPE_SPECS = {
    "Alpha": [("a", int), ("b", int), ("city", str)],
    "Beta": [("x", int), ("city", str)],
    "Gamma": [("n", int), ("m", int)],
}

INT_ATTRS = {"Alpha": ["a", "b"], "Beta": ["x"], "Gamma": ["n", "m"]}
STR_ATTRS = {"Alpha": ["city"], "Beta": ["city"], "Gamma": []}


def make_registry():
    reg = TypeRegistry()
    for name, attrs in TYPE_SPECS.items():
        reg.define(name, attrs)
    return reg


def random_fact(rng, type_name):
    values = {}
    for attr, kind in TYPE_SPECS[type_name]:
        values[attr] = rng.randrange(0, 8) if kind is int else rng.choice(CITIES)
    return Fact(type_name, values)


def random_conjunction(rng, registry, max_vars=4, max_literals=6):
    conj = Conjunction(registry)
    n_vars = rng.randint(1, max_vars)
    vars_ = [conj.make_var(rng.choice(list(TYPE_SPECS)), f"q{i}") for i in range(n_vars)]
    n_lits = rng.randint(0, max_literals)
    for _ in range(n_lits):
        cmp = rng.choice(list(Comparator))
        if rng.random() < 0.35 or n_vars == 1:
            v = rng.choice(vars_)
            pool = INT_ATTRS[v.type_name] if (cmp.ordered or rng.random() < 0.7) else STR_ATTRS[v.type_name]
            if not pool:
                pool = INT_ATTRS[v.type_name]
            attr = rng.choice(pool)
            const = rng.randrange(0, 8) if attr not in STR_ATTRS[v.type_name] else rng.choice(CITIES)
            conj.conjoin(AlphaLiteral(v, attr, cmp, const))
        else:
            v1, v2 = rng.sample(vars_, 2)
            if cmp.ordered or rng.random() < 0.7:
                a1, a2 = rng.choice(INT_ATTRS[v1.type_name]), rng.choice(INT_ATTRS[v2.type_name])
            else:
                p1, p2 = STR_ATTRS[v1.type_name], STR_ATTRS[v2.type_name]
                if not p1 or not p2:
                    a1, a2 = rng.choice(INT_ATTRS[v1.type_name]), rng.choice(INT_ATTRS[v2.type_name])
                else:
                    a1, a2 = rng.choice(p1), rng.choice(p2)
            conj.conjoin(BetaLiteral(v1, a1, cmp, v2, a2))
    return conj


class Journal:
    """Working memory wrapper recording every op, so a twin can replay the
    exact same id sequence from scratch."""

    def __init__(self, registry):
        self.registry = registry
        self.wm = WorkingMemory(registry)
        self.ops = []

    def insert(self, fact):
        fid = self.wm.insert(fact)
        self.ops.append(("insert", fact))
        return fid

    def retract(self, fid):
        self.wm.retract(fid)
        self.ops.append(("retract", fid))

    def replay(self):
        twin = WorkingMemory(self.registry)
        for op, payload in self.ops:
            if op == "insert":
                twin.insert(payload)
            else:
                twin.retract(payload)
        return twin


def random_instance(rng, max_facts=14, max_vars=4, max_literals=6):
    """A journaled working memory plus a type-correct conjunction over it."""
    registry = make_registry()
    journal = Journal(registry)
    for _ in range(rng.randint(0, max_facts)):
        journal.insert(random_fact(rng, rng.choice(list(TYPE_SPECS))))
    conj = random_conjunction(rng, registry, max_vars, max_literals)
    return journal, conj


def corgi_match_set(graph):
    return {m.key() for m in MatchIterator(graph)}


def check_against_oracle(conj, wm, graph, audit=True):
    """Assert the graph's full iteration equals the oracle; optionally audit space."""
    if audit:
        graph.assert_quadratic_space()
    expected = set(enumerate_all(conj, wm, limit=2_000_000))
    got = corgi_match_set(graph)
    assert got == expected, (
        f"mismatch: corgi-only={sorted(got - expected)[:5]} "
        f"oracle-only={sorted(expected - got)[:5]}"
    )


def fresh_graph(conj, wm):
    g = compile_pattern(conj)
    g.update(wm)
    return g


def mutate(rng, journal, steps=6):
    """Random interleaved inserts/retracts against a journaled memory."""
    for _ in range(steps):
        live = sorted(journal.wm.store)
        if live and rng.random() < 0.5:
            journal.retract(rng.choice(live))
        else:
            journal.insert(random_fact(rng, rng.choice(list(TYPE_SPECS))))
