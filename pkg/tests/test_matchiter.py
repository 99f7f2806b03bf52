import random
import time

import pytest

from corgi.bench import register_valentine_schemas, table1_memory, valentine_pattern
from corgi.errors import InvalidatedIteratorError, PendingChangesError
from corgi.facts import Fact, TypeRegistry, WorkingMemory
from corgi.matchiter import MatchIterator, count_materialized, has_match, iterator
from corgi.oracle import enumerate_all
from corgi.patterns import Conjunction
from corgi.relgraph import compile_pattern

from support import corgi_match_set, fresh_graph


EXPECTED_VALENTINE1 = {
    (d, e, p, v1)
    for d in (15, 16)
    for (e, p, v1s) in ((5, 11, (6, 7, 8)), (7, 12, (8,)))
    for v1 in v1s
}


@pytest.fixture
def table1():
    wm = table1_memory()
    conj = valentine_pattern(wm.registry, 1)
    return wm, conj, fresh_graph(conj, wm)


def test_valentine_eight_matches(table1):
    wm, conj, graph = table1
    assert corgi_match_set(graph) == EXPECTED_VALENTINE1
    assert set(enumerate_all(conj, wm)) == EXPECTED_VALENTINE1


def test_matches_after_retract(table1):
    wm, conj, graph = table1
    wm.retract(11)
    graph.update(wm)
    assert corgi_match_set(graph) == {(15, 7, 12, 8), (16, 7, 12, 8)}


def test_no_duplicates_and_determinism(table1):
    _, _, graph = table1
    seq1 = [m.key() for m in MatchIterator(graph)]
    seq2 = [m.key() for m in MatchIterator(graph)]
    assert seq1 == seq2
    assert len(seq1) == len(set(seq1))


def test_later_vars_outermost(table1):
    # within one V1 (outermost) choice, all earlier-variable combinations appear
    # before V1 advances
    _, _, graph = table1
    seq = [m.key() for m in MatchIterator(graph)]
    v1s = [k[3] for k in seq]
    assert v1s == sorted(v1s)


def test_exhausted_idempotent(table1):
    _, _, graph = table1
    it = MatchIterator(graph)
    while it.next_match() is not None:
        pass
    assert it.next_match() is None
    assert it.next_match() is None
    assert count_materialized(it) == 8


def test_pending_changes(table1):
    wm, _, graph = table1
    wm.insert(Fact("Employee", {"num": 50, "home_city": "LA", "dept_num": 7}))
    with pytest.raises(PendingChangesError):
        iterator(graph)
    with pytest.raises(PendingChangesError):
        has_match(graph)
    never_updated = compile_pattern(graph.conj)
    with pytest.raises(PendingChangesError):
        iterator(never_updated)


def test_invalidated_iterator(table1):
    wm, _, graph = table1
    it = MatchIterator(graph)
    assert it.next_match() is not None
    wm.insert(Fact("Employee", {"num": 51, "home_city": "LA", "dept_num": 7}))
    graph.update(wm)
    with pytest.raises(InvalidatedIteratorError):
        it.next_match()


def test_count_materialized(table1):
    _, _, graph = table1
    it = MatchIterator(graph)
    assert count_materialized(it) == 0
    for _ in range(3):
        it.next_match()
    assert count_materialized(it) == 3


def test_has_match_materializes_at_most_one(table1):
    _, _, graph = table1
    it = MatchIterator(graph)
    assert it.next_match() is not None
    assert count_materialized(it) == 1
    assert has_match(graph) is True


def test_empty_memory_has_no_match():
    reg = register_valentine_schemas(TypeRegistry())
    conj = valentine_pattern(reg, 1)
    graph = fresh_graph(conj, WorkingMemory(reg))
    assert has_match(graph) is False
    assert MatchIterator(graph).next_match() is None


def test_two_component_cartesian_product():
    reg = register_valentine_schemas(TypeRegistry())
    conj = Conjunction(reg)
    a = conj.make_var("Employee", "A")
    b = conj.make_var("Employee", "B")
    c = conj.make_var("Department", "C")
    d = conj.make_var("Department", "Dv")
    conj.conjoin(a.num < b.num, c.num < d.num)
    wm = WorkingMemory(reg)
    for i in range(3):
        wm.insert(Fact("Employee", {"num": i, "home_city": "LA", "dept_num": 1}))
    for i in range(3):
        wm.insert(Fact("Department", {"city": "LA", "num": i}))
    graph = fresh_graph(conj, wm)
    got = corgi_match_set(graph)
    assert got == set(enumerate_all(conj, wm))
    assert len(got) == 3 * 3  # m * n component matches


def test_unconstrained_worst_case_is_lazy():
    reg = TypeRegistry()
    reg.define("Thing", [("n", int)])
    wm = WorkingMemory(reg)
    for i in range(100):
        wm.insert(Fact("Thing", {"n": i}))
    conj = Conjunction(reg)
    for i in range(5):
        conj.make_var("Thing", f"T{i}")
    graph = fresh_graph(conj, wm)
    t0 = time.perf_counter()
    it = MatchIterator(graph)
    assert it.next_match() is not None
    assert time.perf_counter() - t0 < 1.0
    assert count_materialized(it) == 1


def test_candidate_order_hook(table1):
    _, _, graph = table1
    descending = iterator(graph, candidate_key=lambda var, fid: -fid)
    first = descending.next_match()
    assert first.key() == (16, 7, 12, 8)
