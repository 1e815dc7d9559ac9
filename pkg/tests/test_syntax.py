from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load
from plci.generators import random_program
from plci.syntax import (
    ParseError,
    PlciError,
    ValidationError,
    format_program,
    parse_database,
    parse_params,
    parse_program,
    parse_queries,
    parse_query,
    resolve_parameters,
)


def test_storage_program_shape(storage_program):
    assert len(storage_program.random_part) == 4
    assert len(storage_program.internal_part) == 2
    assert len(storage_program.constraints) == 1
    assert storage_program.decls.random == {"opens": 2, "leaks": 1, "smokes": 2, "fire": 1}
    assert [rc.clause_id for rc in storage_program.random_part] == [1, 2, 3, 4]
    assert all(rc.probability is None for rc in storage_program.random_part)


def test_vocabularies_are_disjoint(storage_program):
    d = storage_program.decls
    assert not (set(d.random) & set(d.internal))
    assert not (set(d.random) & set(d.external))
    assert not (set(d.internal) & set(d.external))
    assert d.kind("connected") == "internal"
    assert d.kind("passage") == "external"


def test_empty_program():
    p = parse_program("")
    assert not p.random_part and not p.internal_part and not p.constraints


@pytest.mark.parametrize("text, message", [
    ("0.5 :: p(X) :- q(X).", "undeclared random predicate"),
    ("random p/1. q(X) :- e(X), p(X).", "random atom inside a condition"),
    ("random p/1. p(X) :- e(X).", "random predicate p/1 used as head"),
    ("random p/1. random p/2.", "arity clash"),
    ("random p/1. 0.5 :: p(X) :- e(X), p(Y), p(Y), e(Y).", "duplicate cause"),
    ("random p/1. random q/1. 0.5 :: p(X) :- q(X).", "range restriction"),
    ("random p/1. 0.5 :: p(X) :- e(X), (f(X); g(Y)).", "range restriction"),
    ("a(X) :- e(X); f(X).", "disjunction"),
    ("random p/1. 0.5 :: p(X) :- e(X", r"expected '\)'"),
    ("random p/1. 1.5 :: p(X) :- e(X).", "probability"),
])
def test_program_errors(text, message):
    with pytest.raises(PlciError, match=message):
        parse_program(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_program("random p/1.\n0.5 :: p(X) :- e(X) e(X).")
    assert info.value.line == 2


def test_storage_database(storage_db):
    rels = storage_db.relations()
    assert len(rels["employee"]) == 2
    assert rels["passage"] == {("r1", "r2"), ("r2", "r3")}
    assert len(rels["tank"]) == 5 and len(rels["in"]) == 5 and len(rels["stores"]) == 5
    assert ("t1", "gasoline") in rels["stores"]


def test_database_edge_cases(storage_program):
    assert len(parse_database("")) == 0
    with pytest.raises(ValidationError, match="non-ground fact"):
        parse_database("passage(r1, X).")
    with pytest.raises(ValidationError, match="not declared external"):
        parse_database("opens(john, t1).", storage_program)


def test_queries(storage_program):
    q = parse_query("indep(smokes(john,r1), opens(mary,t2), [fire(r1)])", storage_program)
    assert len(q.observations) == 1
    assert str(q) == "indep(smokes(john,r1), opens(mary,t2), [fire(r1)])"
    bench = parse_program(load("bench.plp"))
    q = parse_query("indep(p(2), p(4), [])", bench)
    assert q.observations == frozenset()
    assert parse_query("dseparates(p(2), p(4), [p(1), p(3)])", bench).observations
    with pytest.raises(PlciError, match="non-ground atom"):
        parse_query("indep(p(X), p(4), [])", bench)
    with pytest.raises(PlciError, match="not random"):
        parse_query("indep(n(1), p(4), [])", bench)
    assert len(parse_queries("% two queries\nindep(p(2), p(4), [])\n\nindep(p(4), p(6), [p(5)])\n", bench)) == 2


def test_probabilities_are_exact():
    p = parse_program("random a/0. 0.05 :: a. random b/0. 1/3 :: b.")
    assert [rc.probability for rc in p.random_part] == [Fraction(1, 20), Fraction(1, 3)]


def test_params_resolution(storage_program):
    params = resolve_parameters(storage_program, parse_params(load("storage.params")))
    assert params == {1: Fraction(4, 5), 2: Fraction(1, 10), 3: Fraction(1, 2), 4: Fraction(1, 20)}
    assert resolve_parameters(storage_program, parse_params("default = 0.25"))[3] == Fraction(1, 4)
    assert resolve_parameters(storage_program, parse_params("rc2 = 0.3\ndefault = 0.5"))[2] == Fraction(3, 10)
    with pytest.raises(PlciError, match="missing parameter"):
        resolve_parameters(storage_program, parse_params("1 = 0.8"))
    with pytest.raises(PlciError):
        resolve_parameters(storage_program, parse_params("9 = 0.8\ndefault = 0.1"))


@pytest.mark.parametrize("name", ["storage.plp", "sprinkler.plp", "xor.plp", "bench.plp"])
def test_round_trip_shipped(name):
    once = format_program(parse_program(load(name)))
    assert format_program(parse_program(once)) == once


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_round_trip_generated(seed):
    text = random_program(seed).text
    once = format_program(parse_program(text))
    assert format_program(parse_program(once)) == once
    assert parse_program(text) == parse_program(text)


def test_crlf_and_comments():
    text = "% header\r\nrandom a/0.\r\n0.5 :: a. % trailing\r\n"
    assert len(parse_program(text).random_part) == 1
