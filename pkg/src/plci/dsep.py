"""d-separation by reachability over (node, arrival direction) states.

A state ``(n, INTO)`` means the walk reached ``n`` along an edge pointing into
``n`` (from a parent); ``(n, OUT_OF)`` means it arrived from a child.  From
``(n, OUT_OF)`` the node is a non-collider, so the walk may continue to any
neighbour unless ``n`` is observed.  From ``(n, INTO)`` it may continue to a
child (chain, needs ``n`` unobserved) or turn back to a parent (collider,
needs ``n`` activated, i.e. an ancestor of an observation).

If either endpoint is observed the answer is "separated".
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional

from .graph import DiGraph

INTO = "into"
OUT_OF = "out-of"


class QueryTimeout(Exception):
    pass


class NodeNotInGraph(KeyError):
    pass


@dataclass(frozen=True)
class DSepVerdict:
    separated: bool
    witness: Optional[tuple] = None  # (n0, "->"|"<-", n1, ..., nk)
    visited: int = 0

    @property
    def connected(self) -> bool:
        return not self.separated

    def witness_nodes(self) -> list:
        return list(self.witness[::2]) if self.witness else []

    def witness_text(self) -> str:
        return " ".join(str(x) for x in self.witness) if self.witness else ""


def activated_closure(graph: DiGraph, obs: Iterable[Hashable]) -> frozenset:
    obs = set(obs)
    _require(graph, obs)
    return frozenset(graph.ancestors(obs))


def _require(graph: DiGraph, nodes: Iterable[Hashable]) -> None:
    for n in nodes:
        if n not in graph:
            raise NodeNotInGraph(f"node not in graph: {n}")


class DSeparation:
    """Query engine bound to one immutable graph; caches activation closures per observation set."""

    def __init__(self, graph: DiGraph):
        self.graph = graph
        self._activated: dict = {}

    def activated(self, obs: frozenset) -> frozenset:
        act = self._activated.get(obs)
        if act is None:
            act = activated_closure(self.graph, obs)
            self._activated[obs] = act
        return act

    def connected(self, x: Hashable, y: Hashable, obs: Iterable[Hashable] = (),
                  witness: bool = True, deadline: Optional[float] = None) -> DSepVerdict:
        obs = frozenset(obs)
        _require(self.graph, (x, y))
        if x == y:
            raise ValueError("d-separation query needs two distinct nodes")
        if x in obs or y in obs:
            return DSepVerdict(True)
        act = self.activated(obs)
        parents, children = self.graph.parents, self.graph.children
        start = (x, OUT_OF)
        prev: dict = {start: None}
        queue = deque([start])
        steps = 0
        while queue:
            steps += 1
            if deadline is not None and steps % 512 == 0 and time.perf_counter() > deadline:
                raise QueryTimeout(f"d-separation query {x}, {y} timed out")
            state = queue.popleft()
            node, arrival = state
            moves = []
            if node not in obs:
                if arrival == OUT_OF:
                    moves.extend((p, OUT_OF) for p in parents[node])
                moves.extend((c, INTO) for c in children[node])
            if arrival == INTO and node in act:
                moves.extend((p, OUT_OF) for p in parents[node])
            for nxt in moves:
                if nxt in prev:
                    continue
                prev[nxt] = state
                if nxt[0] == y:
                    return DSepVerdict(False, self._walk(prev, nxt) if witness else None, len(prev))
                queue.append(nxt)
        return DSepVerdict(True, None, len(prev))

    @staticmethod
    def _walk(prev: dict, end: tuple) -> tuple:
        states = []
        s = end
        while s is not None:
            states.append(s)
            s = prev[s]
        states.reverse()
        out: list = [states[0][0]]
        for node, arrival in states[1:]:
            out.append("->" if arrival == INTO else "<-")
            out.append(node)
        return tuple(out)

    def reachable(self, x: Hashable, obs: Iterable[Hashable] = ()) -> set:
        """All nodes d-connected to ``x`` given ``obs`` (excluding x and observed nodes)."""
        obs = frozenset(obs)
        _require(self.graph, [x])
        if x in obs:
            return set()
        return {y for y in self.graph.nodes if y != x and y not in obs
                and not self.connected(x, y, obs, witness=False).separated}


def d_connected(graph: DiGraph, x: Hashable, y: Hashable, obs: Iterable[Hashable] = (),
                deadline: Optional[float] = None) -> DSepVerdict:
    return DSeparation(graph).connected(x, y, obs, deadline=deadline)


def d_separated_sets(graph: DiGraph, a_set: Iterable[Hashable], b_set: Iterable[Hashable],
                     obs: Iterable[Hashable] = ()) -> bool:
    a_set, b_set, obs = set(a_set), set(b_set), frozenset(obs)
    if a_set & b_set:
        raise ValueError("node sets must be disjoint")
    _require(graph, a_set | b_set | obs)
    engine = DSeparation(graph)
    return all(engine.connected(a, b, obs, witness=False).separated for a in a_set for b in b_set)


def check_witness(graph: DiGraph, witness: tuple, obs: Iterable[Hashable]) -> bool:
    """Re-check a d-connecting walk node by node: edges exist, non-colliders
    unobserved, colliders activated."""
    obs = set(obs)
    nodes = witness[::2]
    dirs = witness[1::2]
    if len(nodes) < 2 or len(dirs) != len(nodes) - 1:
        return False
    for (u, v), d in zip(zip(nodes, nodes[1:]), dirs):
        edge = (u, v) if d == "->" else (v, u)
        if edge not in graph.edges:
            return False
    if nodes[0] in obs or nodes[-1] in obs:
        return False
    act = graph.ancestors(obs)
    for i in range(1, len(nodes) - 1):
        collider = dirs[i - 1] == "->" and dirs[i] == "<-"
        if collider and nodes[i] not in act:
            return False
        if not collider and nodes[i] in obs:
            return False
    return True


# ---------------------------------------------------------------------------
# Path-enumeration reference checker


@dataclass(frozen=True)
class PathSignature:
    """Interior non-colliders and colliders of one simple undirected path."""

    non_colliders: frozenset
    colliders: frozenset
    path: tuple = field(compare=False, default=())


def simple_path_signatures(graph: DiGraph, x: Hashable, y: Hashable, max_nodes: int = 14) -> list:
    """Enumerate every simple undirected path from x to y (exponential; small graphs only)."""
    if len(graph.nodes) > max_nodes:
        raise ValueError(f"graph has {len(graph.nodes)} nodes; path enumeration is limited to {max_nodes}")
    _require(graph, (x, y))
    neighbours = {n: [(p, "<-") for p in graph.parents[n]] + [(c, "->") for c in graph.children[n]]
                  for n in graph.nodes}
    found = []
    path = [x]
    dirs: list = []
    on_path = {x}

    def extend(node):
        for nxt, d in neighbours[node]:
            if nxt in on_path:
                continue
            path.append(nxt)
            dirs.append(d)
            if nxt == y:
                found.append(_signature(path, dirs))
            else:
                on_path.add(nxt)
                extend(nxt)
                on_path.discard(nxt)
            path.pop()
            dirs.pop()

    extend(x)
    return found


def _signature(path: list, dirs: list) -> PathSignature:
    nc, col = [], []
    for i in range(1, len(path) - 1):
        (col if dirs[i - 1] == "->" and dirs[i] == "<-" else nc).append(path[i])
    walk: list = [path[0]]
    for d, n in zip(dirs, path[1:]):
        walk += [d, n]
    return PathSignature(frozenset(nc), frozenset(col), tuple(walk))


def path_is_open(sig: PathSignature, obs: set, activated: set) -> bool:
    return not (sig.non_colliders & obs) and sig.colliders <= activated


def naive_d_connected(graph: DiGraph, x: Hashable, y: Hashable, obs: Iterable[Hashable] = (),
                      max_nodes: int = 14) -> bool:
    """True iff some simple undirected path from x to y is d-connecting given ``obs``."""
    obs = set(obs)
    sigs = simple_path_signatures(graph, x, y, max_nodes)
    if x in obs or y in obs:
        return False
    activated = graph.ancestors(obs)
    return any(path_is_open(s, obs, activated) for s in sigs)
