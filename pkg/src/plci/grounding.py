"""Ground variables, ground graph and the Boolean equation system of a program structure."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .graph import DiGraph, node_key
from .logic import HerbrandModel, evaluate, solve
from .syntax import (
    Atom,
    ExternalDatabase,
    PlciError,
    ProgramStructure,
    ValidationError,
    ground_atom,
)

log = logging.getLogger(__name__)

#: number of times ``ground`` has run in this process (batch runs should ground once)
GROUNDING_COUNT = 0


class CyclicGroundingError(PlciError):
    def __init__(self, cycle: list):
        self.cycle = cycle
        super().__init__("ground graph is cyclic: " + " -> ".join(map(str, cycle)))


def _value_key(name: str):
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


@dataclass(frozen=True)
class ErrorTerm:
    clause_id: int
    substitution: tuple  # ((variable, constant), ...) in clause variable order
    probability: Optional[Fraction] = None

    def sort_key(self):
        return (self.clause_id, tuple(_value_key(v) for _, v in self.substitution))

    def subst_dict(self) -> dict:
        return dict(self.substitution)

    def __str__(self) -> str:
        inner = ", ".join(f"{k}->{v}" for k, v in self.substitution)
        return f"u(RC{self.clause_id}, {{{inner}}})"


@dataclass(frozen=True)
class Disjunct:
    literals: tuple  # ((GroundVariable, positive), ...), sorted
    error: ErrorTerm


@dataclass(frozen=True)
class GroundEquation:
    target: Atom
    disjuncts: tuple = ()

    def parents(self) -> set:
        return {g for d in self.disjuncts for g, _ in d.literals}

    def __str__(self) -> str:
        if not self.disjuncts:
            return f"{self.target} := false"
        parts = []
        for d in self.disjuncts:
            lits = [str(g) if pos else f"~{g}" for g, pos in d.literals]
            parts.append(" & ".join(lits + [str(d.error)]))
        return f"{self.target} := " + " | ".join(parts)


class GroundGraph(DiGraph):
    """Ground graph; ``provenance`` maps each edge to the clause ids inducing it."""

    def __init__(self, nodes=(), edges=(), provenance: Optional[Mapping] = None):
        provenance = dict(provenance or {})
        super().__init__(nodes, set(edges) | set(provenance))
        self.provenance = {e: frozenset(provenance.get(e, ())) for e in self.edges}

    def with_nodes(self, extra) -> "GroundGraph":
        return GroundGraph(set(self.nodes) | set(extra), self.edges, self.provenance)


@dataclass(frozen=True)
class EquationSystem:
    equations: Mapping[Atom, GroundEquation]
    error_terms: tuple
    order: tuple  # ground variables in topological order

    def to_json(self) -> list:
        out = []
        for g in self.order:
            eq = self.equations[g]
            out.append({
                "var": str(g),
                "disjuncts": [
                    {
                        "lits": [str(a) if pos else f"\\+{a}" for a, pos in d.literals],
                        "u": {
                            "clause": d.error.clause_id,
                            "subst": d.error.subst_dict(),
                            "p": f"{d.error.probability.numerator}/{d.error.probability.denominator}",
                        },
                    }
                    for d in eq.disjuncts
                ],
            })
        return out


@dataclass(frozen=True)
class AcyclicityResult:
    ok: bool
    order: Optional[tuple] = None
    cycle: Optional[tuple] = None


@dataclass
class Grounding:
    """Everything derived from one (program, database) pair; compute once, query many times."""

    program: ProgramStructure
    db: ExternalDatabase
    model: HerbrandModel
    instances: tuple  # (RandomClause, values) with values aligned to clause.variables
    graph: GroundGraph
    all_groundings: bool = False
    _equations: dict = field(default_factory=dict, repr=False)

    @property
    def variables(self) -> frozenset:
        return frozenset(self.graph.nodes)

    def equations(self, params: Optional[Mapping[int, Fraction]] = None) -> EquationSystem:
        key = tuple(sorted((params or {}).items()))
        if key not in self._equations:
            self._equations[key] = _build_equations(self, params or {})
        return self._equations[key]


def active_domain(program: ProgramStructure, db: ExternalDatabase) -> list:
    return sorted(program.constants() | set(db.constants), key=_value_key)


def _instances(program: ProgramStructure, model: HerbrandModel) -> list:
    rels = model.to_relations()
    out = []
    for rc in program.random_part:
        variables = rc.variables
        for values in solve(rc.condition, rels, variables):
            out.append((rc, values))
    return out


def ground(program: ProgramStructure, db: ExternalDatabase, all_groundings: bool = False) -> Grounding:
    global GROUNDING_COUNT
    GROUNDING_COUNT += 1
    model = evaluate(program, db)
    instances = _instances(program, model)
    nodes = set()
    provenance: dict = {}
    for rc, values in instances:
        binding = dict(zip(rc.variables, values))
        effect = rc.effect.substitute(binding)
        nodes.add(effect)
        for cause in rc.causes:
            parent = cause.atom.substitute(binding)
            nodes.add(parent)
            provenance.setdefault((parent, effect), set()).add(rc.clause_id)
    if all_groundings:
        domain = active_domain(program, db)
        for pred, arity in program.decls.random.items():
            for combo in itertools.product(domain, repeat=arity):
                nodes.add(ground_atom(pred, *combo))
    graph = GroundGraph(nodes, provenance.keys(), provenance)
    log.info("grounded program: %d variables, %d edges, %d clause instances (grounding #%d)",
             len(graph.nodes), len(graph.edges), len(instances), GROUNDING_COUNT)
    return Grounding(program, db, model, tuple(instances), graph, all_groundings)


def ground_variables(program: ProgramStructure, db: ExternalDatabase, all_groundings: bool = False) -> frozenset:
    return ground(program, db, all_groundings).variables


def ground_graph(program: ProgramStructure, db: ExternalDatabase, all_groundings: bool = False) -> GroundGraph:
    return ground(program, db, all_groundings).graph


def check_acyclic(graph: DiGraph) -> AcyclicityResult:
    order = graph.topological_order()
    if order is not None:
        return AcyclicityResult(True, order=tuple(order))
    return AcyclicityResult(False, cycle=tuple(graph.shortest_cycle()))


def _build_equations(grounding: Grounding, params: Mapping[int, Fraction]) -> EquationSystem:
    acyclic = check_acyclic(grounding.graph)
    if not acyclic.ok:
        raise CyclicGroundingError(list(acyclic.cycle))
    probs = {}
    for rc in grounding.program.random_part:
        p = params.get(rc.clause_id, rc.probability)
        if p is None:
            raise ValidationError(f"missing parameter for clause {rc.clause_id}: {rc}")
        probs[rc.clause_id] = Fraction(p)
    disjuncts: dict = {g: [] for g in grounding.graph.nodes}
    errors = []
    for rc, values in grounding.instances:
        binding = dict(zip(rc.variables, values))
        u = ErrorTerm(rc.clause_id, tuple(zip(rc.variables, values)), probs[rc.clause_id])
        errors.append(u)
        lits = {(c.atom.substitute(binding), c.positive) for c in rc.causes}
        lits = tuple(sorted(lits, key=lambda lp: (node_key(lp[0]), not lp[1])))
        disjuncts[rc.effect.substitute(binding)].append(Disjunct(lits, u))
    equations = {g: GroundEquation(g, tuple(ds)) for g, ds in disjuncts.items()}
    errors.sort(key=ErrorTerm.sort_key)
    return EquationSystem(equations, tuple(errors), acyclic.order)


def ground_equations(program: ProgramStructure, db: ExternalDatabase,
                     params: Optional[Mapping[int, Fraction]] = None,
                     all_groundings: bool = False) -> EquationSystem:
    return ground(program, db, all_groundings).equations(params)


def _quote(node) -> str:
    return '"' + str(node).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(graph: GroundGraph, name: str = "ground_graph") -> str:
    lines = [f"digraph {name} {{"]
    for n in graph.nodes:
        lines.append(f"  {_quote(n)};")
    provenance = getattr(graph, "provenance", {})
    for u, v in graph.sorted_edges():
        ids = sorted(provenance.get((u, v), ()))
        label = f' [label="{",".join(f"RC{i}" for i in ids)}"]' if ids else ""
        lines.append(f"  {_quote(u)} -> {_quote(v)}{label};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: GroundGraph) -> dict:
    provenance = getattr(graph, "provenance", {})
    return {
        "nodes": [str(n) for n in graph.nodes],
        "edges": [
            {"from": str(u), "to": str(v), "clauses": sorted(provenance.get((u, v), ()))}
            for u, v in graph.sorted_edges()
        ],
    }
