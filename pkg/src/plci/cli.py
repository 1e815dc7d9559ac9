"""Command-line front end: ``plci <subcommand> [options]``.

Exit codes: 0 success, 1 query-level failure (an ``--assert`` that does not
hold, constraint violations, sweep violations, program outside the
completeness fragment), 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import time
from pathlib import Path
from typing import Optional

from . import grounding as grounding_mod
from .bench import BenchConfig, run_bench
from .dsep import DSeparation, NodeNotInGraph, QueryTimeout
from .fragment import fragment_report
from .grounding import CyclicGroundingError, check_acyclic, emit_dot, graph_to_json, ground
from .logic import StratificationError, check_constraints, evaluate
from .oracle import DEFAULT_GUARD, GuardExceeded, ci_check, sweep, world_distribution
from .syntax import (
    ParameterSpec,
    PlciError,
    format_atoms,
    parse_database,
    parse_params,
    parse_program,
    parse_query,
    parse_queries,
    resolve_parameters,
)

log = logging.getLogger("plci")

SUBCOMMANDS = ("model", "check", "ground-graph", "equations", "dsep", "ci", "fragment",
               "sweep-soundness", "sweep-faithfulness", "bench")


class InputError(Exception):
    pass


def parse_duration(text: str) -> float:
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(ms|s|m)?\s*", text)
    if m is None:
        raise argparse.ArgumentTypeError(f"invalid duration {text!r}")
    value = float(m.group(1))
    unit = m.group(2) or "s"
    seconds = value / 1000 if unit == "ms" else value * 60 if unit == "m" else value
    if seconds <= 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return seconds


def _sizes(text: str) -> list:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def _default_seed() -> int:
    try:
        return int(os.environ.get("PLCI_SEED", "0"))
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--program", type=Path, help="program structure (.plp)")
    common.add_argument("--database", type=Path, help="external database (.db)")
    common.add_argument("--params", type=Path, help="parameter file (.params)")
    common.add_argument("--query", action="append", default=[], help="indep(A, B, [Z...]); repeatable")
    common.add_argument("--queries", type=Path, help="file with one query per line")
    common.add_argument("--format", choices=("text", "json", "csv", "dot"), default="text")
    common.add_argument("--seed", type=int, default=_default_seed())
    common.add_argument("--timeout", type=parse_duration, default=10.0, help="per query, e.g. 10s, 500ms")
    common.add_argument("--out", type=Path, help="write output to FILE instead of stdout")
    common.add_argument("--all-groundings", action="store_true",
                        help="use every |domain|^arity ground variable instead of the pruned set")
    common.add_argument("--guard", type=int, default=DEFAULT_GUARD, help="max error terms for exact inference")
    common.add_argument("--max-z", type=int, default=3, help="max observation set size in sweeps")
    common.add_argument("--assert", dest="assertion", choices=("independent", "dependent"),
                        help="exit 1 unless every query has this verdict")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="plci", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True
    helps = {
        "model": "print the minimal model of the internal part over the database",
        "check": "check integrity constraints",
        "ground-graph": "print the ground graph (text, json or dot)",
        "equations": "print the Boolean equation system",
        "dsep": "answer queries by d-separation",
        "ci": "answer queries by exact inference",
        "fragment": "check membership in the completeness fragment",
        "sweep-soundness": "d-separated triples must be independent",
        "sweep-faithfulness": "report d-connected but independent triples",
        "bench": "run the random-DAG scaling benchmark",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "bench":
            p.add_argument("--sizes", type=_sizes, default=list(range(5, 101, 5)))
            p.add_argument("--graphs", type=int, default=5)
            p.add_argument("--pairs", type=int, default=10)
            p.add_argument("--mode", choices=("dsep", "oracle", "both"), default="dsep")
            p.add_argument("--summary", type=Path, help="also write the per-size summary CSV here")
    return parser


# ---------------------------------------------------------------------------


class _Session:
    """Loads inputs once and grounds at most once per invocation."""

    def __init__(self, args):
        self.args = args
        if args.program is None:
            raise InputError("--program is required")
        self.program = parse_program(_read(args.program))
        self.db = parse_database(_read(args.database), self.program) if args.database else parse_database("")
        spec = parse_params(_read(args.params)) if args.params else ParameterSpec()
        self.spec = spec
        self._grounding = None

    def params(self) -> dict:
        return resolve_parameters(self.program, self.spec)

    def queries(self) -> list:
        qs = [parse_query(q, self.program) for q in self.args.query]
        if self.args.queries:
            qs += parse_queries(_read(self.args.queries), self.program)
        if not qs:
            raise InputError("no queries given (use --query or --queries)")
        return qs

    def grounding(self, extra=()):
        if self._grounding is None:
            self._grounding = ground(self.program, self.db, self.args.all_groundings)
            log.info("grounding count: %d", grounding_mod.GROUNDING_COUNT)
            missing = [a for a in extra if a not in self._grounding.graph]
            if missing:
                domain = set(grounding_mod.active_domain(self.program, self.db))
                for atom in missing:
                    if not set(atom.values()) <= domain:
                        raise InputError(f"{atom} is not a ground variable over the active domain")
                # constant-false variables outside the pruned set
                self._grounding.graph = self._grounding.graph.with_nodes(missing)
        return self._grounding


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _emit(args, text: str) -> None:
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _query_atoms(queries) -> list:
    out = []
    for q in queries:
        out += [q.a, q.b, *q.observations]
    return out


def cmd_model(args) -> int:
    s = _Session(args)
    model = evaluate(s.program, s.db)
    atoms = format_atoms(model.atoms)
    _emit(args, _dump(atoms) if args.format == "json" else "".join(a + "\n" for a in atoms))
    return 0


def cmd_check(args) -> int:
    s = _Session(args)
    report = check_constraints(evaluate(s.program, s.db), s.program)
    if args.format == "json":
        _emit(args, _dump(report.to_json()))
    else:
        lines = ["ok" if report.ok else f"{len(report.violations)} violation(s)"]
        for c, subst in report.violations:
            lines.append(f"  {c}  with " + ", ".join(f"{k}={v}" for k, v in subst.items()))
        _emit(args, "\n".join(lines) + "\n")
    return 0 if report.ok else 1


def cmd_ground_graph(args) -> int:
    g = _Session(args).grounding().graph
    if args.format == "dot":
        _emit(args, emit_dot(g))
    elif args.format == "json":
        data = graph_to_json(g)
        acyc = check_acyclic(g)
        data["acyclic"] = acyc.ok
        if not acyc.ok:
            data["cycle"] = [str(n) for n in acyc.cycle]
        _emit(args, _dump(data))
    else:
        lines = [f"{len(g.nodes)} nodes, {len(g.edges)} edges"]
        for u, v in g.sorted_edges():
            ids = ",".join(f"RC{i}" for i in sorted(g.provenance[(u, v)]))
            lines.append(f"{u} -> {v}  [{ids}]")
        acyc = check_acyclic(g)
        if not acyc.ok:
            lines.append("cycle: " + " -> ".join(map(str, acyc.cycle)))
        _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_equations(args) -> int:
    s = _Session(args)
    eqs = s.grounding().equations(s.params())
    if args.format == "json":
        _emit(args, _dump(eqs.to_json()))
    else:
        _emit(args, "".join(f"{eqs.equations[g]}\n" for g in eqs.order))
    return 0


def _check_assertion(args, independent_flags: list) -> int:
    if args.assertion is None:
        return 0
    want = args.assertion == "independent"
    return 0 if all(flag == want for flag in independent_flags) else 1


def cmd_dsep(args) -> int:
    s = _Session(args)
    queries = s.queries()
    g = s.grounding(_query_atoms(queries)).graph
    engine = DSeparation(g)
    results = []
    for q in queries:
        t0 = time.perf_counter()
        try:
            v = engine.connected(q.a, q.b, q.observations, deadline=t0 + args.timeout)
        except QueryTimeout:
            results.append({"query": str(q), "separated": None, "witness": [], "timeout": True,
                            "micros": int((time.perf_counter() - t0) * 1e6)})
            continue
        micros = int((time.perf_counter() - t0) * 1e6)
        results.append({"query": str(q), "separated": v.separated,
                        "witness": [str(x) for x in v.witness] if v.witness else [], "micros": micros})
    if args.format == "json":
        _emit(args, _dump(results[0] if len(results) == 1 else results))
    elif args.format == "csv":
        lines = ["query,separated,micros"] + [f'"{r["query"]}",{r["separated"]},{r["micros"]}' for r in results]
        _emit(args, "\r\n".join(lines) + "\r\n")
    else:
        out = []
        for r in results:
            verdict = "timeout" if r.get("timeout") else "separated" if r["separated"] else "connected"
            line = f"{r['query']}: {verdict}"
            if r["witness"]:
                line += "  via " + " ".join(r["witness"])
            out.append(line)
        _emit(args, "\n".join(out) + "\n")
    if any(r.get("timeout") for r in results):
        return 1
    return _check_assertion(args, [r["separated"] for r in results])


def cmd_ci(args) -> int:
    s = _Session(args)
    queries = s.queries()
    eqs = s.grounding(_query_atoms(queries)).equations(s.params())
    t0 = time.perf_counter()
    dist = world_distribution(eqs, args.guard, deadline=t0 + args.timeout)
    results = []
    for q in queries:
        v = ci_check(dist, q)
        results.append({"query": str(q), **v.to_json()})
    if args.format == "json":
        _emit(args, _dump(results[0] if len(results) == 1 else results))
    else:
        out = []
        for r in results:
            line = f"{r['query']}: {'independent' if r['independent'] else 'dependent'}"
            c = r["counterexample"]
            if c:
                line += f"  (P(a,b|z) = {c['lhs']} != {c['rhs']} = P(a|z)P(b|z) at a={c['a']}, b={c['b']}, z={c['z']})"
            out.append(line)
        _emit(args, "\n".join(out) + "\n")
    return _check_assertion(args, [r["independent"] for r in results])


def cmd_fragment(args) -> int:
    s = _Session(args)
    report = fragment_report(s.grounding(), s.params(), args.guard)
    data = report.to_json()
    if args.format == "json":
        _emit(args, _dump(data))
    else:
        lines = []
        for key in ("positive", "singly_connected", "sources_are_facts", "params_interior"):
            item = data[key]
            lines.append(f"{key}: {'yes' if item['ok'] else 'no'}"
                         + ("" if item["ok"] else f"  (witness: {item['witness']})"))
        lines.append(f"proper: {data['proper']}")
        lines.append(f"complete_oracle: {'yes' if report.complete_oracle else 'no'}")
        _emit(args, "\n".join(lines) + "\n")
    return 0 if report.complete_oracle else 1


def _cmd_sweep(args, kind: str) -> int:
    s = _Session(args)
    grounding = s.grounding()
    if not s.program.random_part:
        from .oracle import SweepReport
        report = SweepReport(kind, vacuous=True)
    else:
        dist = world_distribution(grounding.equations(s.params()), args.guard)
        report = sweep(grounding.graph, dist, kind, args.max_z)
    data = report.to_json()
    if args.format == "json":
        _emit(args, _dump(data))
    else:
        lines = [f"{kind}: {data['triples']} triples, {data['separated']} separated, "
                 f"{data['connected']} connected, {len(report.violations)} violation(s)"]
        lines += [f"  {v['query']}" for v in data["violations"]]
        _emit(args, "\n".join(lines) + "\n")
    return 0 if report.ok else 1


def cmd_bench(args) -> int:
    cfg = BenchConfig(sizes=tuple(args.sizes), graphs_per_size=args.graphs, queries_per_size=args.pairs,
                      seed=args.seed, timeout=args.timeout, mode=args.mode, guard=args.guard)
    result = run_bench(cfg, progress=lambda S: log.info("size %d done", S))
    if args.format == "json":
        _emit(args, _dump(result.to_json()))
    elif args.format == "csv":
        _emit(args, result.records_csv())
        if args.out:
            meta = args.out.with_name(args.out.name + ".meta.json")
            meta.write_text(_dump(result.metadata), encoding="utf-8")
    else:
        rows = result.summary()
        lines = [f"{'S':>4} {'mode':<7} {'regime':<6} {'median_us':>10} {'max_us':>10} {'timeouts':>8}"]
        lines += [f"{r['S']:>4} {r['mode']:<7} {r['regime']:<6} {r['median_us']:>10} {r['max_us']:>10} "
                  f"{r['timeouts']:>8}" for r in rows]
        _emit(args, "\n".join(lines) + "\n")
    if args.summary:
        args.summary.write_text(result.summary_csv(), encoding="utf-8")
    return 0


COMMANDS = {
    "model": cmd_model,
    "check": cmd_check,
    "ground-graph": cmd_ground_graph,
    "equations": cmd_equations,
    "dsep": cmd_dsep,
    "ci": cmd_ci,
    "fragment": cmd_fragment,
    "sweep-soundness": lambda a: _cmd_sweep(a, "soundness"),
    "sweep-faithfulness": lambda a: _cmd_sweep(a, "faithfulness"),
    "bench": cmd_bench,
}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (PlciError, InputError, StratificationError, CyclicGroundingError, NodeNotInGraph, ValueError) as exc:
        print(f"plci: error: {exc}", file=sys.stderr)
        return 2
    except GuardExceeded as exc:
        print(f"plci: error: {exc}", file=sys.stderr)
        return 2
    except QueryTimeout as exc:
        print(f"plci: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
