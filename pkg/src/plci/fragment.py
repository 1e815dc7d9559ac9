"""Membership test for the fragment on which d-separation is a complete independence oracle.

The fragment: positive program, singly connected ground graph, every source
defined by a ground probabilistic fact, and all parameters strictly inside
(0, 1).  Properness (0 < P(G) < 1 for every ground variable) needs inference
and is reported separately.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .graph import DiGraph, node_key
from .grounding import EquationSystem, Grounding
from .oracle import DEFAULT_GUARD, GuardExceeded, improper_variables, world_distribution
from .syntax import ProgramStructure


@dataclass(frozen=True)
class Check:
    ok: bool
    witness: object = None

    def __bool__(self) -> bool:
        return self.ok


def is_positive(program: ProgramStructure) -> Check:
    for rc in program.random_part:
        if not rc.is_positive:
            return Check(False, rc)
    return Check(True)


def is_singly_connected(graph: DiGraph) -> Check:
    """Underlying undirected graph is a forest; otherwise a shortest undirected cycle is the witness."""
    parent = {n: n for n in graph.nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    seen_pairs = set()
    for u, v in graph.sorted_edges():
        pair = frozenset((u, v))
        if pair in seen_pairs:
            # both u->v and v->u; the graph is cyclic anyway
            return Check(False, [u, v, u])
        seen_pairs.add(pair)
        ru, rv = find(u), find(v)
        if ru == rv:
            return Check(False, shortest_undirected_cycle(graph))
        parent[ru] = rv
    return Check(True)


def shortest_undirected_cycle(graph: DiGraph) -> Optional[list]:
    adj = {n: sorted(set(graph.parents[n]) | set(graph.children[n]), key=node_key) for n in graph.nodes}
    best = None
    for root in graph.nodes:
        dist = {root: 0}
        prev = {root: None}
        queue = deque([root])
        while queue:
            n = queue.popleft()
            for m in adj[n]:
                if m not in dist:
                    dist[m] = dist[n] + 1
                    prev[m] = n
                    queue.append(m)
                elif prev[n] != m and m != n:
                    length = dist[n] + dist[m] + 1
                    if best is None or length < best[0]:
                        best = (length, _join(prev, n, m))
    return best[1] if best else None


def _join(prev: dict, n, m) -> list:
    left = [n]
    while prev[left[-1]] is not None:
        left.append(prev[left[-1]])
    right = [m]
    while prev[right[-1]] is not None:
        right.append(prev[right[-1]])
    # trim the common tail to the lowest common ancestor in the BFS tree
    while len(left) > 1 and len(right) > 1 and left[-2] == right[-2]:
        left.pop()
        right.pop()
    cycle = list(reversed(left)) + right[:-1]
    return cycle + [cycle[0]]


def sources_are_facts(graph: DiGraph, eqs: EquationSystem) -> Check:
    for n in graph.nodes:
        if graph.parents[n]:
            continue
        if not any(not d.literals for d in eqs.equations[n].disjuncts):
            return Check(False, n)
    return Check(True)


def params_interior(params: Mapping[int, Fraction]) -> Check:
    for clause_id, p in sorted(params.items()):
        if not 0 < p < 1:
            return Check(False, (clause_id, p))
    return Check(True)


@dataclass(frozen=True)
class FragmentReport:
    positive: Check
    singly_connected: Check
    sources_are_facts: Check
    params_interior: Check
    proper: Optional[bool] = None  # None: unchecked (guard exceeded)
    improper: tuple = ()

    @property
    def complete_oracle(self) -> bool:
        return all((self.positive.ok, self.singly_connected.ok, self.sources_are_facts.ok, self.params_interior.ok))

    def to_json(self) -> dict:
        def item(check: Check, render=str):
            return {"ok": check.ok, "witness": None if check.ok else render(check.witness)}

        return {
            "positive": item(self.positive),
            "singly_connected": item(self.singly_connected, lambda c: [str(n) for n in c]),
            "sources_are_facts": item(self.sources_are_facts),
            "params_interior": item(self.params_interior,
                                    lambda w: {"clause": w[0], "p": f"{w[1].numerator}/{w[1].denominator}"}),
            "proper": "unchecked" if self.proper is None else self.proper,
            "improper_variables": [str(v) for v in self.improper],
            "complete_oracle": self.complete_oracle,
        }


def fragment_report(grounding: Grounding, params: Mapping[int, Fraction],
                    guard: int = DEFAULT_GUARD, check_properness: bool = True) -> FragmentReport:
    eqs = grounding.equations(params)
    full = {rc.clause_id: params.get(rc.clause_id, rc.probability) for rc in grounding.program.random_part}
    proper = None
    improper: tuple = ()
    if check_properness:
        try:
            improper = tuple(improper_variables(world_distribution(eqs, guard)))
            proper = not improper
        except GuardExceeded:
            proper = None
    return FragmentReport(
        is_positive(grounding.program),
        is_singly_connected(grounding.graph),
        sources_are_facts(grounding.graph, eqs),
        params_interior(full),
        proper,
        improper,
    )
