"""Bottom-up evaluation of the internal part over an external database.

Conditions are compiled into small join plans: positive database atoms are
scanned first (most-bound first), nested disjunctions next, and negative
literals and builtins are checked as soon as their variables are bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

import networkx as nx

from .syntax import (
    EQUALS,
    Atom,
    Conj,
    Constraint,
    Disj,
    ExternalDatabase,
    Formula,
    Literal,
    PlciError,
    ProgramStructure,
    ground_atom,
)


class StratificationError(PlciError):
    def __init__(self, cycle: list):
        self.cycle = cycle
        super().__init__("not stratified: cycle through negation " + " -> ".join(cycle))


# ---------------------------------------------------------------------------
# Relations with lazily built hash indices


class Relations:
    """Mutable store ``predicate -> set of value tuples`` with per-pattern indices."""

    def __init__(self, data: Optional[Mapping[str, set]] = None):
        self.data: dict = {pred: set(rows) for pred, rows in (data or {}).items()}
        self._index: dict = {}

    def rows(self, predicate: str) -> set:
        return self.data.get(predicate, set())

    def add(self, predicate: str, row: tuple) -> bool:
        rows = self.data.setdefault(predicate, set())
        if row in rows:
            return False
        rows.add(row)
        for key in [k for k in self._index if k[0] == predicate]:
            del self._index[key]
        return True

    def update(self, predicate: str, rows) -> None:
        self.data.setdefault(predicate, set()).update(rows)
        for key in [k for k in self._index if k[0] == predicate]:
            del self._index[key]

    def lookup(self, predicate: str, positions: tuple, key: tuple):
        if not positions:
            return self.rows(predicate)
        idx = self._index.get((predicate, positions))
        if idx is None:
            idx = {}
            for row in self.rows(predicate):
                idx.setdefault(tuple(row[i] for i in positions), []).append(row)
            self._index[(predicate, positions)] = idx
        return idx.get(key, ())

    def __contains__(self, item) -> bool:
        predicate, row = item
        return row in self.data.get(predicate, ())

    def size(self) -> int:
        return sum(len(rows) for rows in self.data.values())


# ---------------------------------------------------------------------------
# Join plans


@dataclass(frozen=True)
class _Scan:
    atom: Atom
    slot: int  # position among the positive atoms of a rule body (for semi-naive deltas)


@dataclass(frozen=True)
class _Test:
    literal: Literal


@dataclass(frozen=True)
class _Branch:
    plans: tuple


def compile_plan(formula: Formula, bound: frozenset = frozenset(), slots: Optional[dict] = None) -> tuple:
    """Compile ``formula`` into a sequence of plan steps given already bound variables."""
    if slots is None:
        slots = {}
    if isinstance(formula, Literal):
        formula = Conj((formula,))
    if isinstance(formula, Disj):
        return (_Branch(tuple(compile_plan(b, bound, slots) for b in formula.items)),)
    scans = [i for i in formula.items if isinstance(i, Literal) and i.positive and i.atom.builtin is None]
    nested = [i for i in formula.items if not isinstance(i, Literal)]
    tests = [i for i in formula.items if isinstance(i, Literal) and not (i.positive and i.atom.builtin is None)]
    steps: list = []
    bound = set(bound)

    def flush_tests():
        for t in list(tests):
            if set(t.variables()) <= bound:
                steps.append(_Test(t))
                tests.remove(t)

    flush_tests()
    while scans:
        def score(lit):
            args = lit.atom.args
            return -sum(1 for t in args if not t.is_var or t.name in bound), scans.index(lit)
        best = min(scans, key=score)
        scans.remove(best)
        slot = slots.setdefault(id(best), len(slots))
        steps.append(_Scan(best.atom, slot))
        bound.update(best.variables())
        flush_tests()
    for item in nested:
        sub = compile_plan(item, frozenset(bound), slots)
        steps.extend(sub)
        bound |= _plan_binds(sub, bound)
        flush_tests()
    for t in tests:
        # bind_formula has already rejected unsafe literals; keep order deterministic
        steps.append(_Test(t))
    return tuple(steps)


def _plan_binds(steps: tuple, bound: set) -> set:
    out = set(bound)
    for step in steps:
        if isinstance(step, _Scan):
            out.update(step.atom.variables())
        elif isinstance(step, _Branch):
            common = None
            for plan in step.plans:
                b = _plan_binds(plan, out)
                common = b if common is None else common & b
            out |= common or set()
    return out


def _test(lit: Literal, binding: dict, rels: Relations) -> bool:
    atom = lit.atom
    vals = tuple(binding[t.name] if t.is_var else t.name for t in atom.args)
    if atom.builtin is not None:
        holds = (vals[0] == vals[1]) == (atom.builtin == EQUALS)
    else:
        holds = (atom.predicate, vals) in rels
    return holds == lit.positive


def run_plan(steps: tuple, rels: Relations, binding: Optional[dict] = None,
             delta: Optional[Relations] = None, delta_slot: int = -1) -> Iterator[dict]:
    """Yield every extension of ``binding`` satisfying the plan over ``rels``.

    When ``delta`` is given, the scan with ``delta_slot`` reads from it instead
    of ``rels`` (semi-naive evaluation).
    """
    yield from _run(steps, 0, rels, dict(binding or {}), delta, delta_slot)


def _run(steps, i, rels, binding, delta, delta_slot):
    if i == len(steps):
        yield binding
        return
    step = steps[i]
    if isinstance(step, _Test):
        if _test(step.literal, binding, rels):
            yield from _run(steps, i + 1, rels, binding, delta, delta_slot)
        return
    if isinstance(step, _Branch):
        for plan in step.plans:
            for b in _run(plan, 0, rels, dict(binding), delta, delta_slot):
                yield from _run(steps, i + 1, rels, b, delta, delta_slot)
        return
    atom = step.atom
    source = delta if (delta is not None and step.slot == delta_slot) else rels
    positions = []
    key = []
    free = []
    for pos, t in enumerate(atom.args):
        if not t.is_var:
            positions.append(pos)
            key.append(t.name)
        elif t.name in binding:
            positions.append(pos)
            key.append(binding[t.name])
        else:
            free.append((pos, t.name))
    for row in source.lookup(atom.predicate, tuple(positions), tuple(key)):
        ext = binding
        ok = True
        if free:
            ext = dict(binding)
            for pos, name in free:
                seen = ext.get(name)
                if seen is None:
                    ext[name] = row[pos]
                elif seen != row[pos]:
                    ok = False
                    break
        if ok:
            yield from _run(steps, i + 1, rels, ext, delta, delta_slot)


def solve(formula: Formula, rels: Relations, variables: tuple) -> list:
    """All distinct satisfying substitutions of ``formula`` projected onto ``variables``.

    Each substitution is a tuple of constant names aligned with ``variables``;
    the result is sorted.
    """
    plan = compile_plan(formula)
    seen = {tuple(b[v] for v in variables) for b in run_plan(plan, rels)}
    return sorted(seen, key=lambda row: tuple(_value_key(v) for v in row))


def _value_key(name: str):
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


# ---------------------------------------------------------------------------
# Stratification


@dataclass(frozen=True)
class Stratification:
    strata: tuple  # tuple of tuples of predicate names
    level: Mapping[str, int]


def dependency_graph(program: ProgramStructure) -> nx.DiGraph:
    """Edges body predicate -> head predicate among internal predicates; ``negative`` flags negation."""
    g = nx.DiGraph()
    internal = program.decls.internal
    g.add_nodes_from(internal)
    for clause in program.internal_part:
        head = clause.head.predicate
        for lit in clause.body:
            pred = lit.atom.predicate
            if lit.atom.builtin is not None or pred not in internal:
                continue
            neg = not lit.positive
            if g.has_edge(pred, head):
                g[pred][head]["negative"] = g[pred][head]["negative"] or neg
            else:
                g.add_edge(pred, head, negative=neg)
    return g


def stratify(program: ProgramStructure) -> Stratification:
    g = dependency_graph(program)
    cond = nx.condensation(g)
    members = cond.graph["mapping"]  # predicate -> scc id
    for u, v, data in g.edges(data=True):
        if data["negative"] and members[u] == members[v]:
            raise StratificationError(_negative_cycle(g, u, v))
    scc_level: dict = {}
    for scc in nx.topological_sort(cond):
        level = 0
        for pred_scc in cond.predecessors(scc):
            for u in cond.nodes[pred_scc]["members"]:
                for v in cond.nodes[scc]["members"]:
                    if g.has_edge(u, v):
                        level = max(level, scc_level[pred_scc] + int(g[u][v]["negative"]))
        scc_level[scc] = level
    level = {pred: scc_level[members[pred]] for pred in g.nodes}
    height = max(level.values(), default=-1) + 1
    strata = tuple(tuple(sorted(p for p, lv in level.items() if lv == i)) for i in range(height))
    return Stratification(strata, level)


def _negative_cycle(g: nx.DiGraph, u: str, v: str) -> list:
    back = nx.shortest_path(g, v, u)
    return [u] + back


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class HerbrandModel:
    relations: Mapping[str, frozenset]

    @property
    def atoms(self) -> frozenset:
        return frozenset(ground_atom(p, *row) for p, rows in self.relations.items() for row in rows)

    def __contains__(self, atom: Atom) -> bool:
        return atom.values() in self.relations.get(atom.predicate, ())

    def __len__(self) -> int:
        return sum(len(rows) for rows in self.relations.values())

    def to_relations(self) -> Relations:
        return Relations(self.relations)

    def sorted_atoms(self) -> list:
        return sorted(self.atoms)


def evaluate(program: ProgramStructure, db: ExternalDatabase, strategy: str = "semi-naive") -> HerbrandModel:
    """Minimal model of the internal part over ``db``, stratum by stratum."""
    if strategy not in ("semi-naive", "naive"):
        raise ValueError(f"unknown strategy {strategy!r}")
    strat = stratify(program)
    rels = Relations(db.relations())
    for stratum in strat.strata:
        preds = set(stratum)
        rules = [c for c in program.internal_part if c.head.predicate in preds]
        if strategy == "naive":
            _naive_stratum(rules, rels)
        else:
            _semi_naive_stratum(rules, preds, rels)
    return HerbrandModel({p: frozenset(rows) for p, rows in rels.data.items() if rows})


@dataclass
class _Rule:
    head: Atom
    plan: tuple
    recursive_slots: tuple  # slots of scans over predicates of the current stratum


def _compile_rule(clause, preds: set) -> _Rule:
    slots: dict = {}
    plan = compile_plan(Conj(clause.body), frozenset(), slots)
    rec = tuple(s.slot for s in plan if isinstance(s, _Scan) and s.atom.predicate in preds)
    return _Rule(clause.head, plan, rec)


def _head_row(head: Atom, binding: dict) -> tuple:
    return tuple(binding[t.name] if t.is_var else t.name for t in head.args)


def _naive_stratum(rules: list, rels: Relations) -> None:
    compiled = [_compile_rule(c, set()) for c in rules]
    changed = True
    while changed:
        changed = False
        fresh = []
        for rule in compiled:
            for b in run_plan(rule.plan, rels):
                row = _head_row(rule.head, b)
                if (rule.head.predicate, row) not in rels:
                    fresh.append((rule.head.predicate, row))
        for pred, row in fresh:
            changed |= rels.add(pred, row)


def _semi_naive_stratum(rules: list, preds: set, rels: Relations) -> None:
    compiled = [_compile_rule(c, preds) for c in rules]
    delta = Relations()
    # first round: every rule over the full relations
    for rule in compiled:
        for b in run_plan(rule.plan, rels):
            row = _head_row(rule.head, b)
            if (rule.head.predicate, row) not in rels:
                delta.add(rule.head.predicate, row)
    while delta.size():
        for pred, rows in delta.data.items():
            rels.update(pred, rows)
        fresh = Relations()
        for rule in compiled:
            for slot in rule.recursive_slots:
                for b in run_plan(rule.plan, rels, delta=delta, delta_slot=slot):
                    row = _head_row(rule.head, b)
                    if (rule.head.predicate, row) not in rels:
                        fresh.add(rule.head.predicate, row)
        delta = fresh


# ---------------------------------------------------------------------------
# Integrity constraints


@dataclass(frozen=True)
class ConstraintReport:
    ok: bool
    violations: tuple  # (Constraint, {var: const}) pairs

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [{"constraint": str(c), "substitution": dict(s)} for c, s in self.violations],
        }


def check_constraints(model: HerbrandModel, program: ProgramStructure) -> ConstraintReport:
    rels = model.to_relations()
    violations = []
    for constraint in program.constraints:
        variables = _ordered_vars(constraint)
        for row in solve(Conj(constraint.body), rels, variables):
            violations.append((constraint, dict(zip(variables, row))))
    return ConstraintReport(not violations, tuple(violations))


def _ordered_vars(constraint: Constraint) -> tuple:
    seen: dict = {}
    for lit in constraint.body:
        for v in lit.variables():
            seen.setdefault(v, None)
    return tuple(seen)
