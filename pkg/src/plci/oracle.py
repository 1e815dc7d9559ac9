"""Brute-force exact inference over a ground equation system.

Every error term is an independent Boolean with a rational probability.  The
distribution over ground variables is obtained by enumerating all ``2**n``
error valuations (bit ``i`` of the counter is error term ``i`` in sorted
order), solving the equations for each, and summing exact weights.  Weights
are kept as integer numerators over the common denominator ``prod(den_i)``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import prod
from typing import Hashable, Mapping, Optional, Sequence, Union

import numpy as np

from .dsep import DSeparation, NodeNotInGraph, QueryTimeout
from .graph import DiGraph
from .grounding import EquationSystem, ErrorTerm, Grounding, ground
from .syntax import CIQuery, ExternalDatabase, PlciError, ProgramStructure

DEFAULT_GUARD = 22
_CHUNK_BITS = 14


class GuardExceeded(PlciError):
    def __init__(self, required: int, guard: int):
        self.required = required
        self.guard = guard
        super().__init__(f"exact inference needs 2^{required} valuations; guard is {guard} error terms")


# ---------------------------------------------------------------------------
# Single valuation


def solve_valuation(eqs: EquationSystem, valuation: Mapping[ErrorTerm, bool]) -> dict:
    """Truth value of every ground variable under one error valuation."""
    values: dict = {}
    for g in eqs.order:
        values[g] = any(
            valuation.get(d.error, False) and all(values[a] == pos for a, pos in d.literals)
            for d in eqs.equations[g].disjuncts
        )
    return values


# ---------------------------------------------------------------------------
# Full distribution


@dataclass(frozen=True)
class JointTable:
    variables: tuple
    probs: Mapping[tuple, Fraction]

    def __getitem__(self, values: tuple) -> Fraction:
        return self.probs.get(tuple(values), Fraction(0))

    def total(self) -> Fraction:
        return sum(self.probs.values(), Fraction(0))


class WorldDistribution:
    """Exact joint distribution over all ground variables of an equation system."""

    def __init__(self, variables: tuple, worlds: np.ndarray, numerators: np.ndarray, denominator: int,
                 error_terms: int):
        self.variables = variables
        self.worlds = worlds
        self.numerators = numerators
        self.denominator = denominator
        self.error_terms = error_terms

    @cached_property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.variables)}

    def columns(self, variables: Sequence[Hashable]) -> list:
        try:
            return [self.index[v] for v in variables]
        except KeyError as exc:
            raise NodeNotInGraph(f"node not in graph: {exc.args[0]}") from None

    def marginal_numerators(self, variables: Sequence[Hashable]) -> dict:
        """``{values tuple: numerator}`` over the support of the marginal."""
        cols = self.columns(variables)
        if not cols:
            return {(): int(self.numerators.sum())}
        rows, sums = _group(self.worlds[:, cols], self.numerators)
        return {tuple(bool(b) for b in r): int(s) for r, s in zip(rows, sums)}

    def marginal(self, variables: Sequence[Hashable]) -> JointTable:
        nums = self.marginal_numerators(variables)
        return JointTable(tuple(variables), {k: Fraction(v, self.denominator) for k, v in nums.items() if v})

    def probability(self, assignment: Mapping[Hashable, bool]) -> Fraction:
        variables = list(assignment)
        return self.marginal(variables)[tuple(assignment[v] for v in variables)]

    def as_table(self) -> dict:
        return {tuple(bool(b) for b in w): Fraction(int(n), self.denominator)
                for w, n in zip(self.worlds, self.numerators) if n}


def _group(sub: np.ndarray, weights: np.ndarray):
    packed = np.packbits(sub, axis=1)
    keys = np.ascontiguousarray(packed).view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    sums = np.zeros(len(first), dtype=weights.dtype)
    np.add.at(sums, inverse.ravel(), weights)
    return sub[first], sums


def world_distribution(eqs: EquationSystem, guard: int = DEFAULT_GUARD,
                       deadline: Optional[float] = None) -> WorldDistribution:
    n = len(eqs.error_terms)
    if n > guard:
        raise GuardExceeded(n, guard)
    variables = tuple(eqs.order)
    col = {v: i for i, v in enumerate(variables)}
    err = {u: i for i, u in enumerate(eqs.error_terms)}
    compiled = [
        (col[g], [(err[d.error], [(col[a], pos) for a, pos in d.literals]) for d in eqs.equations[g].disjuncts])
        for g in variables
    ]
    nums = [u.probability.numerator for u in eqs.error_terms]
    dens = [u.probability.denominator for u in eqs.error_terms]
    denominator = prod(dens)
    dtype = np.int64 if denominator < 2 ** 62 else object

    merged: dict = {}
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    for start in range(0, total, chunk):
        if deadline is not None and time.perf_counter() > deadline:
            raise QueryTimeout("exact inference timed out")
        counter = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = [((counter >> i) & 1).astype(bool) for i in range(n)]
        weight = np.ones(len(counter), dtype=dtype)
        for i in range(n):
            factor = np.where(bits[i], nums[i], dens[i] - nums[i])
            weight = weight * (factor.astype(object) if dtype == object else factor)
        vals = np.zeros((len(counter), len(variables)), dtype=bool)
        for vi, disjuncts in compiled:
            acc = np.zeros(len(counter), dtype=bool)
            for ei, lits in disjuncts:
                term = bits[ei].copy()
                for ci, pos in lits:
                    term &= vals[:, ci] if pos else ~vals[:, ci]
                acc |= term
            vals[:, vi] = acc
        keep = weight != 0
        if dtype == object:
            keep = keep.astype(bool)
        vals, weight = vals[keep], weight[keep]
        if not len(weight):
            continue
        if not variables:
            merged[b""] = (np.zeros(0, dtype=bool), merged.get(b"", (None, 0))[1] + int(weight.sum()))
            continue
        rows, sums = _group(vals, weight)
        for r, s in zip(rows, sums):
            key = np.packbits(r).tobytes()
            old = merged.get(key)
            merged[key] = (r, (old[1] if old else 0) + int(s))
    keys = sorted(merged)
    worlds = np.array([merged[k][0] for k in keys], dtype=bool).reshape(len(keys), len(variables))
    numerators = np.array([merged[k][1] for k in keys], dtype=dtype)
    return WorldDistribution(variables, worlds, numerators, denominator, n)


def joint(eqs: EquationSystem, variables: Sequence[Hashable], guard: int = DEFAULT_GUARD) -> JointTable:
    return world_distribution(eqs, guard).marginal(variables)


def _as_distribution(source: Union[EquationSystem, WorldDistribution], guard: int,
                     deadline: Optional[float] = None) -> WorldDistribution:
    if isinstance(source, WorldDistribution):
        return source
    return world_distribution(source, guard, deadline)


# ---------------------------------------------------------------------------
# Second, independent route: unfold each variable into a formula over error terms


def unfold(eqs: EquationSystem) -> dict:
    """Formula trees over error-term indices: ('u', i) | ('and', ...) | ('or', ...) | ('not', f)."""
    err = {u: i for i, u in enumerate(eqs.error_terms)}
    memo: dict = {}

    def build(g):
        if g not in memo:
            parts = []
            for d in eqs.equations[g].disjuncts:
                conj = [("u", err[d.error])]
                conj += [build(a) if pos else ("not", build(a)) for a, pos in d.literals]
                parts.append(("and",) + tuple(conj))
            memo[g] = ("or",) + tuple(parts)
        return memo[g]

    return {g: build(g) for g in eqs.order}


def _holds(formula, bits) -> bool:
    tag = formula[0]
    if tag == "u":
        return bits[formula[1]]
    if tag == "not":
        return not _holds(formula[1], bits)
    if tag == "and":
        return all(_holds(f, bits) for f in formula[1:])
    return any(_holds(f, bits) for f in formula[1:])


def truth_table_distribution(eqs: EquationSystem, max_terms: int = 14) -> dict:
    """``{world tuple (in eqs.order): probability}`` by direct truth-table evaluation."""
    n = len(eqs.error_terms)
    if n > max_terms:
        raise GuardExceeded(n, max_terms)
    formulas = unfold(eqs)
    probs = [u.probability for u in eqs.error_terms]
    table: dict = {}
    for bits in itertools.product((False, True), repeat=n):
        w = Fraction(1)
        for b, p in zip(bits, probs):
            w *= p if b else 1 - p
        if not w:
            continue
        world = tuple(_holds(formulas[g], bits) for g in eqs.order)
        table[world] = table.get(world, Fraction(0)) + w
    return table


# ---------------------------------------------------------------------------
# Conditional independence


@dataclass(frozen=True)
class Counterexample:
    a_value: tuple
    b_value: tuple
    z_assignment: tuple  # ((variable, value), ...)
    lhs: Fraction  # P(A=a, B=b | Z=z)
    rhs: Fraction  # P(A=a | Z=z) * P(B=b | Z=z)

    def to_json(self) -> dict:
        return {
            "a": list(self.a_value),
            "b": list(self.b_value),
            "z": {str(k): v for k, v in self.z_assignment},
            "lhs": _frac(self.lhs),
            "rhs": _frac(self.rhs),
        }


@dataclass(frozen=True)
class CIVerdict:
    independent: bool
    counterexample: Optional[Counterexample] = None
    skipped: int = 0  # observation contexts with probability zero

    def to_json(self) -> dict:
        return {
            "independent": self.independent,
            "counterexample": self.counterexample.to_json() if self.counterexample else None,
            "skipped_contexts": self.skipped,
        }


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _true_first(values: tuple):
    return tuple(not v for v in values)


def independent(dist: WorldDistribution, a_vars: Sequence[Hashable], b_vars: Sequence[Hashable],
                z_vars: Sequence[Hashable] = ()) -> CIVerdict:
    """Exact check of P(a, b | z) = P(a | z) P(b | z) for every value combination."""
    a_vars, b_vars, z_vars = list(a_vars), list(b_vars), list(z_vars)
    ka, kb = len(a_vars), len(b_vars)
    full = dist.marginal_numerators(a_vars + b_vars + z_vars)
    p_z: dict = {}
    p_az: dict = {}
    p_bz: dict = {}
    for key, w in full.items():
        a, b, z = key[:ka], key[ka:ka + kb], key[ka + kb:]
        p_z[z] = p_z.get(z, 0) + w
        p_az[a, z] = p_az.get((a, z), 0) + w
        p_bz[b, z] = p_bz.get((b, z), 0) + w
    skipped = 0
    for z in itertools.product((True, False), repeat=len(z_vars)):
        pz = p_z.get(z, 0)
        if pz == 0:
            skipped += 1
            continue
        a_support = sorted((a for (a, zz) in p_az if zz == z), key=_true_first)
        b_support = sorted((b for (b, zz) in p_bz if zz == z), key=_true_first)
        for a in a_support:
            for b in b_support:
                pabz = full.get(a + b + z, 0)
                if pabz * pz != p_az[a, z] * p_bz[b, z]:
                    lhs = Fraction(pabz, pz)
                    rhs = Fraction(p_az[a, z], pz) * Fraction(p_bz[b, z], pz)
                    cex = Counterexample(a, b, tuple(zip(z_vars, z)), lhs, rhs)
                    return CIVerdict(False, cex, skipped)
    return CIVerdict(True, None, skipped)


def ci_check(source: Union[EquationSystem, WorldDistribution], query: CIQuery, guard: int = DEFAULT_GUARD,
             deadline: Optional[float] = None) -> CIVerdict:
    dist = _as_distribution(source, guard, deadline)
    obs = sorted(query.observations)
    return independent(dist, [query.a], [query.b], obs)


def positive_correlation_check(source: Union[EquationSystem, WorldDistribution], edge: tuple,
                               guard: int = DEFAULT_GUARD) -> bool:
    """True iff P(child | parent) > P(child), compared exactly."""
    parent, child = edge
    dist = _as_distribution(source, guard)
    m = dist.marginal_numerators([parent, child])
    d = dist.denominator
    p_parent = sum(w for (pv, _), w in m.items() if pv)
    if p_parent == 0:
        return False
    p_both = m.get((True, True), 0)
    p_child = sum(w for (_, cv), w in m.items() if cv)
    # p_both / p_parent > p_child / d
    return p_both * d > p_child * p_parent


def improper_variables(dist: WorldDistribution) -> list:
    """Variables whose marginal probability is 0 or 1."""
    out = []
    total = int(dist.numerators.sum())
    for v in dist.variables:
        p = dist.marginal_numerators([v]).get((True,), 0)
        if p == 0 or p == total:
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class Triple:
    a: Hashable
    b: Hashable
    z: tuple

    def __str__(self) -> str:
        return f"indep({self.a}, {self.b}, [{', '.join(map(str, self.z))}])"


@dataclass
class SweepReport:
    kind: str  # "soundness" or "faithfulness"
    triples: int = 0
    separated: int = 0
    connected: int = 0
    violations: list = field(default_factory=list)  # (Triple, CIVerdict)
    vacuous: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ok": self.ok,
            "triples": self.triples,
            "separated": self.separated,
            "connected": self.connected,
            "vacuous": self.vacuous,
            "violations": [{"query": str(t), **v.to_json()} for t, v in self.violations],
        }


def enumerate_triples(nodes: Sequence[Hashable], max_z: int = 3):
    nodes = list(nodes)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            rest = [n for n in nodes if n != a and n != b]
            for k in range(min(max_z, len(rest)) + 1):
                for z in itertools.combinations(rest, k):
                    yield Triple(a, b, z)


def sweep(graph: DiGraph, dist: WorldDistribution, kind: str, max_z: int = 3) -> SweepReport:
    """Compare d-separation with the exact oracle on every triple.

    ``soundness`` collects separated-but-dependent triples, ``faithfulness``
    collects connected-but-independent ones.
    """
    if kind not in ("soundness", "faithfulness"):
        raise ValueError(kind)
    report = SweepReport(kind)
    engine = DSeparation(graph)
    for t in enumerate_triples(graph.nodes, max_z):
        report.triples += 1
        sep = engine.connected(t.a, t.b, t.z, witness=False).separated
        if sep:
            report.separated += 1
        else:
            report.connected += 1
        if sep == (kind == "soundness"):
            verdict = independent(dist, [t.a], [t.b], t.z)
            if verdict.independent != sep:
                report.violations.append((t, verdict))
    report.vacuous = report.triples == 0
    return report


def _prepare(program: ProgramStructure, db: ExternalDatabase, params, guard: int,
             grounding: Optional[Grounding] = None):
    grounding = grounding or ground(program, db)
    eqs = grounding.equations(params)
    return grounding.graph, world_distribution(eqs, guard)


def soundness_sweep(program: ProgramStructure, db: ExternalDatabase, params: Optional[Mapping] = None,
                    max_z: int = 3, guard: int = DEFAULT_GUARD, grounding: Optional[Grounding] = None) -> SweepReport:
    if not program.random_part:
        return SweepReport("soundness", vacuous=True)
    graph, dist = _prepare(program, db, params, guard, grounding)
    return sweep(graph, dist, "soundness", max_z)


def faithfulness_sweep(program: ProgramStructure, db: ExternalDatabase, params: Optional[Mapping] = None,
                       max_z: int = 3, guard: int = DEFAULT_GUARD,
                       grounding: Optional[Grounding] = None) -> SweepReport:
    if not program.random_part:
        return SweepReport("faithfulness", vacuous=True)
    graph, dist = _prepare(program, db, params, guard, grounding)
    return sweep(graph, dist, "faithfulness", max_z)


def markov_violations(graph: DiGraph, dist: WorldDistribution) -> list:
    """Nodes X for which X is not independent of its non-descendant non-parents given its parents."""
    bad = []
    for x in graph.nodes:
        parents = list(graph.parents[x])
        below = graph.descendants(x)
        others = [n for n in graph.nodes if n != x and n not in below and n not in graph.parents[x]]
        if not others:
            continue
        verdict = independent(dist, [x], others, parents)
        if not verdict.independent:
            bad.append((x, verdict))
    return bad
