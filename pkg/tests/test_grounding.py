import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plci.generators import random_program
from plci.grounding import (
    CyclicGroundingError,
    active_domain,
    check_acyclic,
    emit_dot,
    ground,
    ground_graph,
    ground_variables,
)
from plci.graph import DiGraph
from plci.grounding import GroundGraph
from plci.bench import bench_program
from plci.syntax import Conj, Disj, ExternalDatabase, Literal, ground_atom, parse_database, parse_program


def A(text):
    """Parse a ground atom like ``fire(r4)``."""
    name, _, rest = text.partition("(")
    return ground_atom(name, *[s.strip() for s in rest.rstrip(")").split(",")]) if rest else ground_atom(name)


def test_storage_variables(storage):
    nodes = storage.graph.nodes
    assert len(nodes) == 27
    counts = {}
    for n in nodes:
        counts[n.predicate] = counts.get(n.predicate, 0) + 1
    assert counts == {"opens": 10, "leaks": 5, "smokes": 8, "fire": 4}


def test_storage_edges(storage):
    g = storage.graph
    opens_leaks = [(u, v) for u, v in g.edges if u.predicate == "opens"]
    assert len(opens_leaks) == 10
    assert all(v == ground_atom("leaks", u.args[1].name) for u, v in opens_leaks)
    assert set(g.parents[A("fire(r4)")]) == {A("smokes(john,r4)"), A("smokes(mary,r4)"), A("leaks(t5)")}
    # water tanks never feed a fire
    assert not g.children[A("leaks(t3)")] and not g.children[A("leaks(t4)")]
    assert set(g.parents[A("fire(r1)")]) == {A("smokes(john,r1)"), A("smokes(mary,r1)"),
                                              A("smokes(john,r2)"), A("smokes(mary,r2)"),
                                              A("leaks(t1)"), A("leaks(t2)")}
    assert g.provenance[(A("opens(john,t1)"), A("leaks(t1)"))] == {2}


def test_storage_topological_layers(storage):
    result = check_acyclic(storage.graph)
    assert result.ok and len(result.order) == 27
    rank = {"opens": 0, "smokes": 0, "leaks": 1, "fire": 2}
    position = {n: i for i, n in enumerate(result.order)}
    for u, v in storage.graph.edges:
        assert position[u] < position[v]
    layers = [rank[n.predicate] for n in result.order if n.predicate != "smokes"]
    assert layers == sorted(layers)


def test_empty_database_grounds_nothing(storage_program):
    assert ground_variables(storage_program, ExternalDatabase()) == frozenset()
    assert check_acyclic(DiGraph()).ok


def test_bench_program_grounding():
    program, db = bench_program(3, [(1, 2)])
    g = ground_graph(program, db)
    assert g.nodes == (A("p(1)"), A("p(2)"), A("p(3)"))
    assert g.edges == {(A("p(1)"), A("p(2)"))}


def test_cycle_is_reported():
    program = parse_program("random p/1. 0.5 :: p(X) :- e(X,Y), p(Y).")
    g = ground(program, parse_database("e(1,2). e(2,1)."))
    result = check_acyclic(g.graph)
    assert not result.ok
    assert result.cycle[0] == result.cycle[-1] and set(result.cycle) == {A("p(1)"), A("p(2)")}
    with pytest.raises(CyclicGroundingError):
        g.equations()


def test_storage_equations(storage, storage_params):
    eqs = storage.equations(storage_params)
    leaks = eqs.equations[A("leaks(t1)")]
    assert [d.literals for d in leaks.disjuncts] == [((A("opens(john,t1)"), True),), ((A("opens(mary,t1)"), True),)]
    assert all(d.error.probability == Fraction(1, 10) and d.error.clause_id == 2 for d in leaks.disjuncts)
    opens = eqs.equations[A("opens(mary,t2)")]
    assert len(opens.disjuncts) == 1 and opens.disjuncts[0].literals == ()
    assert opens.disjuncts[0].error.probability == Fraction(4, 5)
    assert str(opens.disjuncts[0].error) == "u(RC1, {E->mary, T->t2})"
    # 10 opens + 10 leaks + 8 smokes + fire instances (one per satisfying substitution)
    fire_terms = sum(len(eqs.equations[g].disjuncts) for g in storage.graph.nodes if g.predicate == "fire")
    assert len(eqs.error_terms) == 28 + fire_terms == 42


def test_all_groundings_adds_constant_false():
    program = parse_program("random p/1. 0.5 :: p(X) :- f(X).")
    db = parse_database("f(1). g(2).")
    full = ground(program, db, all_groundings=True)
    assert full.graph.nodes == (A("p(1)"), A("p(2)"))
    assert full.equations().equations[A("p(2)")].disjuncts == ()
    assert ground(program, db).graph.nodes == (A("p(1)"),)


def test_parent_soundness(storage, storage_params):
    eqs = storage.equations(storage_params)
    for g in storage.graph.nodes:
        assert eqs.equations[g].parents() == set(storage.graph.parents[g])


def test_dot_output(storage):
    dot = emit_dot(storage.graph)
    lines = dot.strip().splitlines()
    assert lines[0] == "digraph ground_graph {" and lines[-1] == "}"
    assert sum("->" not in l for l in lines[1:-1]) == 27
    assert sum("->" in l for l in lines[1:-1]) == len(storage.graph.edges)
    one = GroundGraph([A("a"), A("b")], [(A("a"), A("b"))])
    assert emit_dot(one).count(";") == 3
    assert emit_dot(GroundGraph()) == "digraph ground_graph {\n}\n"


def test_grounding_is_deterministic(storage_program, storage_db, storage_params):
    one = ground(storage_program, storage_db)
    two = ground(storage_program, storage_db)
    assert one.graph.nodes == two.graph.nodes and one.graph.edges == two.graph.edges
    e1, e2 = one.equations(storage_params), two.equations(storage_params)
    assert e1.error_terms == e2.error_terms and e1.order == e2.order
    assert emit_dot(one.graph) == emit_dot(two.graph)


# brute force over all interpretations ----------------------------------------


def _holds(formula, binding, model):
    if isinstance(formula, Literal):
        atom = formula.atom.substitute(binding)
        if atom.builtin:
            x, y = atom.values()
            value = (x == y) if atom.predicate == "=" else (x != y)
        else:
            value = atom in model
        return value == formula.positive
    if isinstance(formula, Conj):
        return all(_holds(f, binding, model) for f in formula.items)
    assert isinstance(formula, Disj)
    return any(_holds(f, binding, model) for f in formula.items)


def brute_force_graph(inst):
    """Nodes, edges and error-term count by trying every interpretation of each clause's variables."""
    domain = active_domain(inst.program, inst.db)
    model = inst.grounding.model
    nodes, edges, terms = set(), set(), 0
    for rc in inst.program.random_part:
        names = sorted(set(rc.effect.variables()) | {v for c in rc.causes for v in c.atom.variables()}
                       | {v for lit in _literals(rc.condition) for v in lit.atom.variables()})
        for values in itertools.product(domain, repeat=len(names)):
            binding = dict(zip(names, values))
            if not _holds(rc.condition, binding, model):
                continue
            terms += 1
            effect = rc.effect.substitute(binding)
            nodes.add(effect)
            for c in rc.causes:
                nodes.add(c.atom.substitute(binding))
                edges.add((c.atom.substitute(binding), effect))
    return nodes, edges, terms


def _literals(formula):
    if isinstance(formula, Literal):
        yield formula
    else:
        for f in formula.items:
            yield from _literals(f)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_graph_matches_brute_force(seed):
    inst = random_program(seed)
    nodes, edges, terms = brute_force_graph(inst)
    assert set(inst.grounding.graph.nodes) == nodes
    assert inst.grounding.graph.edges == edges
    assert inst.error_terms == terms


def test_storage_matches_brute_force(storage_program, storage_db, storage):
    from plci.generators import Instance

    inst = Instance(0, "", "", storage_program, storage_db, storage)
    nodes, edges, terms = brute_force_graph(inst)
    assert set(storage.graph.nodes) == nodes and storage.graph.edges == edges and terms == 42
