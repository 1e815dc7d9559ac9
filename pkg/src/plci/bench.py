"""Scaling experiment: d-separation queries vs. exact inference on random DAGs.

Random DAG generator
--------------------
``gen_random_dag(S, seed)`` draws from ``numpy.random.default_rng(seed)``
(PCG64 seeded through ``SeedSequence``).  It draws ``S*(S-1)/2`` uniforms in
the pair order (1,2), (1,3), ..., (1,S), (2,3), ... and keeps edge ``i -> j``
iff the draw is below ``S ** -0.5``.  In the runner, graph ``g`` of size ``S``
uses the seed sequence ``[seed, S, g]`` and the query pairs of size ``S`` use
``[seed, S, PAIR_STREAM]``; the pairs are shared by the graphs of one size.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dsep import DSeparation, QueryTimeout
from .grounding import ground
from .oracle import DEFAULT_GUARD, GuardExceeded, independent, world_distribution
from .syntax import ExternalDatabase, ground_atom, parse_program

PAIR_STREAM = 1_000_003

BENCH_PROGRAM = """\
random p/1.
0.5 :: p(X) :- n(X).
0.5 :: p(Y) :- p(X), n(X), n(Y), e(X,Y).
"""

RECORD_FIELDS = ["S", "graph", "a", "b", "regime", "mode", "verdict", "micros", "timeout"]
SUMMARY_FIELDS = ["S", "mode", "regime", "median_us", "max_us", "timeouts"]
REGIMES = ("none", "odd")


@dataclass(frozen=True)
class BenchConfig:
    sizes: Sequence[int] = tuple(range(5, 101, 5))
    graphs_per_size: int = 5
    queries_per_size: int = 10
    seed: int = 0
    timeout: float = 10.0
    mode: str = "dsep"  # dsep | oracle | both
    guard: int = DEFAULT_GUARD

    def __post_init__(self):
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.mode not in ("dsep", "oracle", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def modes(self) -> tuple:
        return ("dsep", "oracle") if self.mode == "both" else (self.mode,)


@dataclass(frozen=True)
class BenchRecord:
    S: int
    graph: int
    a: int
    b: int
    regime: str
    mode: str
    verdict: str
    micros: int
    timeout: bool

    def sort_key(self):
        return (self.S, self.graph, self.a, self.b, REGIMES.index(self.regime), self.mode)


def gen_random_dag(S: int, seed) -> list:
    """Edges ``(i, j)``, ``1 <= i < j <= S``, each present with probability ``S ** -0.5``."""
    if S < 1:
        raise ValueError("S must be at least 1")
    rng = np.random.default_rng(seed)
    p = S ** -0.5
    pairs = [(i, j) for i in range(1, S + 1) for j in range(i + 1, S + 1)]
    draws = rng.random(len(pairs))
    return [pair for pair, u in zip(pairs, draws) if u < p]


def bench_program(S: int, edges: Sequence[tuple]) -> tuple:
    """The two-clause ``p/1`` program and the database ``n(1..S)``, ``e(i, j)``."""
    program = parse_program(BENCH_PROGRAM)
    facts = {ground_atom("n", i) for i in range(1, S + 1)}
    facts |= {ground_atom("e", i, j) for i, j in edges}
    db = ExternalDatabase(frozenset(facts), frozenset(str(i) for i in range(1, S + 1)))
    return program, db


def bench_database_text(S: int, edges: Sequence[tuple]) -> str:
    lines = [f"n({i})." for i in range(1, S + 1)] + [f"e({i},{j})." for i, j in edges]
    return "\n".join(lines) + "\n"


def odd_observations(S: int) -> frozenset:
    return frozenset(ground_atom("p", i) for i in range(1, S + 1, 2))


def query_pairs(S: int, seed: int, count: int) -> list:
    """``count`` pairs (a, b) of distinct even numbers in [2, S]; pairs may repeat."""
    evens = list(range(2, S + 1, 2))
    if len(evens) < 2:
        return []
    rng = np.random.default_rng([seed, S, PAIR_STREAM])
    out = []
    for _ in range(count):
        a, b = rng.choice(evens, size=2, replace=False)
        out.append((int(a), int(b)))
    return out


def _dsep_query(engine: DSeparation, a, b, obs, timeout: float):
    t0 = time.perf_counter()
    try:
        v = engine.connected(a, b, obs, witness=False, deadline=t0 + timeout)
        verdict, timed_out = ("separated" if v.separated else "connected"), False
    except QueryTimeout:
        verdict, timed_out = "timeout", True
    return verdict, int((time.perf_counter() - t0) * 1e6), timed_out


def _oracle_query(eqs, a, b, obs, timeout: float, guard: int):
    t0 = time.perf_counter()
    try:
        dist = world_distribution(eqs, guard, deadline=t0 + timeout)
        v = independent(dist, [a], [b], sorted(obs))
        verdict, timed_out = ("independent" if v.independent else "dependent"), False
    except GuardExceeded:
        verdict, timed_out = "guard-exceeded", False
    except QueryTimeout:
        verdict, timed_out = "timeout", True
    return verdict, int((time.perf_counter() - t0) * 1e6), timed_out


@dataclass
class BenchResult:
    config: BenchConfig
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def summary(self) -> list:
        groups: dict = {}
        for r in self.records:
            groups.setdefault((r.S, r.mode, r.regime), []).append(r)
        rows = []
        for (S, mode, regime), recs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], REGIMES.index(kv[0][2]))):
            times = [r.micros for r in recs]
            unfinished = sum(1 for r in recs if r.timeout or r.verdict == "guard-exceeded")
            rows.append({"S": S, "mode": mode, "regime": regime, "median_us": int(statistics.median(times)),
                         "max_us": max(times), "timeouts": unfinished})
        return rows

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, lineterminator="\r\n")
        w.writeheader()
        for r in self.records:
            row = asdict(r)
            row["timeout"] = int(r.timeout)
            w.writerow(row)
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\r\n")
        w.writeheader()
        w.writerows(self.summary())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "records": [asdict(r) for r in self.records],
            "summary": self.summary(),
        }


def run_bench(cfg: BenchConfig, progress=None) -> BenchResult:
    result = BenchResult(cfg)
    result.metadata = {
        "seed": cfg.seed,
        "sizes": list(cfg.sizes),
        "graphs_per_size": cfg.graphs_per_size,
        "queries_per_size": cfg.queries_per_size,
        "timeout_s": cfg.timeout,
        "mode": cfg.mode,
        "guard": cfg.guard,
        "generator": "numpy PCG64, graph seed [seed, S, g], edge i->j iff uniform < S**-0.5",
        "pairs": "uniform distinct even (a, b) per query, seed [seed, S, %d], shared by all graphs of a size"
                 % PAIR_STREAM,
        "timing": "per query; grounding is done once per graph and excluded",
        "pairs_by_size": {},
    }
    for S in cfg.sizes:
        pairs = query_pairs(S, cfg.seed, cfg.queries_per_size)
        result.metadata["pairs_by_size"][str(S)] = pairs
        odd = odd_observations(S)
        for g in range(cfg.graphs_per_size):
            edges = gen_random_dag(S, [cfg.seed, S, g])
            program, db = bench_program(S, edges)
            grounding = ground(program, db)
            engine = DSeparation(grounding.graph)
            eqs = grounding.equations() if "oracle" in cfg.modes() else None
            for a, b in pairs:
                pa, pb = ground_atom("p", a), ground_atom("p", b)
                for regime in REGIMES:
                    obs = odd if regime == "odd" else frozenset()
                    for mode in cfg.modes():
                        if mode == "dsep":
                            verdict, us, to = _dsep_query(engine, pa, pb, obs, cfg.timeout)
                        else:
                            verdict, us, to = _oracle_query(eqs, pa, pb, obs, cfg.timeout, cfg.guard)
                        result.records.append(BenchRecord(S, g, a, b, regime, mode, verdict, us, to))
        if progress is not None:
            progress(S)
    result.records.sort(key=BenchRecord.sort_key)
    return result
