"""Seeded random instances for property and acceptance tests.

* ``random_dag``: small DAGs for engine-equivalence checks.
* ``random_program``: programs with negated causes, negation in conditions
  and an internal predicate, grounding to a bounded number of error terms.
* ``polytree_instance``: positive programs whose ground graph is a polytree
  with a probabilistic fact at every source.

All three use ``random.Random(seed)`` and retry deterministically until the
size bound holds, so a seed always yields the same instance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .graph import DiGraph
from .grounding import Grounding, ground
from .syntax import ExternalDatabase, ProgramStructure, parse_database, parse_program

FIFTHS = tuple(Fraction(k, 5) for k in range(1, 5))


def random_dag(seed: int, max_nodes: int = 9) -> DiGraph:
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    density = rng.choice((0.2, 0.35, 0.5))
    order = list(range(n))
    rng.shuffle(order)  # hide the topological order from the node labels
    edges = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < density]
    return DiGraph(range(n), edges)


@dataclass(frozen=True)
class Instance:
    seed: int
    text: str
    db_text: str
    program: ProgramStructure
    db: ExternalDatabase
    grounding: Grounding

    @property
    def error_terms(self) -> int:
        return len(self.grounding.equations().error_terms)


def _finish(seed: int, text: str, db_text: str) -> Instance:
    program = parse_program(text)
    db = parse_database(db_text, program)
    return Instance(seed, text, db_text, program, db, ground(program, db))


def _prob(rng: random.Random) -> str:
    return str(rng.choice((Fraction(1, 10), Fraction(1, 4), Fraction(1, 2), Fraction(3, 5), Fraction(9, 10))))


def _random_program_text(rng: random.Random) -> tuple:
    consts = ["a", "b", "c"][: rng.randint(1, 3)]
    preds = [(f"r{i}", rng.choice((0, 1))) for i in range(rng.randint(3, 6))]
    lines = [f"random {name}/{arity}." for name, arity in preds]
    lines.append("t(X) :- d(X), \\+ s(X).")

    def cause(name, arity, v):
        return f"{name}({v})" if arity else name

    for j, (name, arity) in enumerate(preds):
        for _ in range(rng.randint(1, 2)):
            used = {"X"} if arity else set()
            body = []
            seen = set()
            for i in rng.sample(range(j), k=min(j, rng.randint(0, 2))):
                pname, parity = preds[i]
                v = rng.choice(("X", "Y")) if parity else None
                atom = cause(pname, parity, v)
                if atom in seen:
                    continue
                seen.add(atom)
                if v:
                    used.add(v)
                body.append(atom if rng.random() < 0.7 else f"\\+ {atom}")
            cond = []
            for v in sorted(used):
                cond.append(rng.choice(("d", "d", "s", "t")) + f"({v})")
            if used == {"X", "Y"} and rng.random() < 0.5:
                cond.append(rng.choice(("e(X,Y)", "X \\= Y")))
            if "X" in used and rng.random() < 0.3:
                cond.append("\\+ s(X)")
            head = cause(name, arity, "X")
            rhs = ", ".join(body + cond)
            lines.append(f"{_prob(rng)} :: {head}" + (f" :- {rhs}." if rhs else "."))
    facts = [f"d({c})." for c in consts]
    facts += [f"s({c})." for c in consts if rng.random() < 0.5]
    facts += [f"e({x},{y})." for x in consts for y in consts if x != y and rng.random() < 0.4]
    return "\n".join(lines) + "\n", "\n".join(facts) + "\n"


def random_program(seed: int, max_error_terms: int = 16) -> Instance:
    """Random program with positive and negative causes; acyclic because causes only
    use lower-numbered predicates."""
    rng = random.Random(seed)
    while True:
        text, db_text = _random_program_text(rng)
        inst = _finish(seed, text, db_text)
        if inst.error_terms <= max_error_terms and len(inst.grounding.graph.nodes) >= 3:
            return inst


def _polytree_text(rng: random.Random, max_nodes: int) -> tuple:
    n = rng.randint(2, max_nodes)
    kinds = {i: rng.choice("pq") for i in range(1, n + 1)}
    edges = []
    for i in range(2, n + 1):
        j = rng.randint(1, i - 1)  # random labelled tree; orient each edge at random
        edges.append((j, i) if rng.random() < 0.5 else (i, j))
    parents = {i: [u for u, v in edges if v == i] for i in kinds}
    facts = [f"fact_{kinds[i]}({i})." for i in kinds if not parents[i] or rng.random() < 0.3]
    facts += [f"e_{kinds[u]}{kinds[v]}({u},{v})." for u, v in edges]
    pairs = []
    for z in kinds:
        ps = sorted(u for u in parents[z] if kinds[u] == "p")
        if kinds[z] == "p" and len(ps) >= 2 and rng.random() < 0.5:
            pairs.append(f"join({ps[0]},{ps[1]},{z}).")
    params = [str(rng.choice(FIFTHS)) for _ in range(7)]
    text = f"""random p/1.
random q/1.
{params[0]} :: p(X) :- fact_p(X).
{params[1]} :: q(X) :- fact_q(X).
{params[2]} :: p(Y) :- p(X), e_pp(X,Y).
{params[3]} :: q(Y) :- p(X), e_pq(X,Y).
{params[4]} :: p(Y) :- q(X), e_qp(X,Y).
{params[5]} :: q(Y) :- q(X), e_qq(X,Y).
{params[6]} :: p(Z) :- p(X), p(Y), join(X,Y,Z).
"""
    return text, "\n".join(facts + pairs) + "\n"


def polytree_instance(seed: int, max_nodes: int = 8, max_error_terms: int = 16) -> Instance:
    rng = random.Random(seed)
    while True:
        text, db_text = _polytree_text(rng, max_nodes)
        inst = _finish(seed, text, db_text)
        if inst.error_terms <= max_error_terms:
            return inst
