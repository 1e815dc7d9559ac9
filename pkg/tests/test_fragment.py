import itertools
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from plci.bench import bench_program
from plci.fragment import (
    fragment_report,
    is_positive,
    is_singly_connected,
    params_interior,
    sources_are_facts,
)
from plci.generators import polytree_instance, random_dag
from plci.graph import DiGraph
from plci.grounding import ground
from plci.oracle import sweep, world_distribution
from plci.syntax import ground_atom, parse_database, parse_program


def test_is_positive(storage_program):
    assert is_positive(storage_program).ok
    neg = parse_program("random a/1. random b/1. 1/2 :: b(X) :- n(X). 1/2 :: a(X) :- n(X), \\+b(X).")
    check = is_positive(neg)
    assert not check.ok and check.witness == neg.random_part[1]
    assert is_positive(parse_program("")).ok


def test_single_connectedness(storage):
    program, db = bench_program(5, [(1, 2), (2, 3), (3, 4), (4, 5)])
    assert is_singly_connected(ground(program, db).graph).ok
    assert is_singly_connected(DiGraph()).ok
    check = is_singly_connected(storage.graph)
    assert not check.ok
    cycle = check.witness
    assert len(cycle) == 5 and cycle[0] == cycle[-1]
    adjacent = {frozenset(e) for e in storage.graph.edges}
    assert all(frozenset(pair) in adjacent for pair in zip(cycle, cycle[1:]))
    # e.g. fire(r1) - smokes(john,r1) - fire(r2) - leaks(t1) - fire(r1)
    assert {n.predicate for n in cycle} <= {"fire", "smokes", "leaks"}


def _undirected_path_counts(graph):
    adj = {n: set(graph.parents[n]) | set(graph.children[n]) for n in graph.nodes}
    counts = {}
    for x, y in itertools.combinations(graph.nodes, 2):
        found = 0
        stack = [(x, {x})]
        while stack:
            node, seen = stack.pop()
            for m in adj[node]:
                if m == y:
                    found += 1
                elif m not in seen:
                    stack.append((m, seen | {m}))
        counts[x, y] = found
    return counts


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.booleans())
def test_single_connectedness_matches_path_count(seed, sparse):
    g = random_dag(seed, max_nodes=9)
    if sparse:  # thin out to get forests often enough
        g = DiGraph(g.nodes, [e for i, e in enumerate(sorted(g.edges)) if i % 3 == 0])
    naive = all(c <= 1 for c in _undirected_path_counts(g).values())
    assert is_singly_connected(g).ok == naive


def test_sources_are_facts(storage, storage_params):
    assert sources_are_facts(storage.graph, storage.equations(storage_params)).ok
    program = parse_program("random p/1. random q/1. 1/2 :: q(X) :- p(X), f(X).")
    g = ground(program, parse_database("f(1)."))
    check = sources_are_facts(g.graph, g.equations())
    assert not check.ok and check.witness == ground_atom("p", "1")


def test_params_interior(storage_params):
    assert params_interior(storage_params).ok
    assert not params_interior({1: Fraction(1)}).ok
    assert params_interior({1: Fraction(0), 2: Fraction(1, 2)}).witness == (1, Fraction(0))


def test_storage_report(storage, storage_params):
    report = fragment_report(storage, storage_params)
    assert not report.complete_oracle
    assert report.proper is None  # 42 error terms exceed the default guard
    assert report.to_json()["proper"] == "unchecked"


def test_bench_path_report():
    program, db = bench_program(4, [(1, 2), (2, 3), (3, 4)])
    report = fragment_report(ground(program, db), {})
    assert report.complete_oracle and report.proper


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_certified_instances_are_faithful(seed):
    inst = polytree_instance(seed)
    report = fragment_report(inst.grounding, {})
    assert report.complete_oracle and report.proper
    dist = world_distribution(inst.grounding.equations())
    assert sweep(inst.grounding.graph, dist, "faithfulness", max_z=3).ok
