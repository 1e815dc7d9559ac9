"""Minimal immutable directed graph shared by grounding, d-separation and the fragment checks."""

from __future__ import annotations

from collections import deque
from typing import Hashable, Iterable, Optional


def node_key(node):
    key = getattr(node, "sort_key", None)
    if key is not None:
        return (0, key())
    if isinstance(node, (int, float)):
        return (1, node)
    return (2, str(node))


class DiGraph:
    """Simple directed graph; nodes are kept in sorted order."""

    def __init__(self, nodes: Iterable[Hashable] = (), edges: Iterable[tuple] = ()):
        edges = set(edges)
        node_set = set(nodes)
        for u, v in edges:
            node_set.add(u)
            node_set.add(v)
        self.nodes = tuple(sorted(node_set, key=node_key))
        self.edges = frozenset(edges)
        parents: dict = {n: [] for n in self.nodes}
        children: dict = {n: [] for n in self.nodes}
        for u, v in edges:
            parents[v].append(u)
            children[u].append(v)
        self.parents = {n: tuple(sorted(ps, key=node_key)) for n, ps in parents.items()}
        self.children = {n: tuple(sorted(cs, key=node_key)) for n, cs in children.items()}

    def __contains__(self, node) -> bool:
        return node in self.parents

    def __len__(self) -> int:
        return len(self.nodes)

    def sorted_edges(self) -> list:
        return sorted(self.edges, key=lambda e: (node_key(e[0]), node_key(e[1])))

    def ancestors(self, targets: Iterable[Hashable]) -> set:
        """Nodes with a directed path (possibly empty) to some node of ``targets``."""
        seen = set(targets)
        queue = deque(seen)
        while queue:
            n = queue.popleft()
            for p in self.parents[n]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return seen

    def descendants(self, node: Hashable) -> set:
        seen = {node}
        queue = deque([node])
        while queue:
            n = queue.popleft()
            for c in self.children[n]:
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        seen.discard(node)
        return seen

    def topological_order(self) -> Optional[list]:
        """Layered Kahn order (all sources, then their unlocked successors, ...); None if cyclic."""
        indeg = {n: len(self.parents[n]) for n in self.nodes}
        layer = [n for n in self.nodes if indeg[n] == 0]
        order: list = []
        while layer:
            order.extend(layer)
            nxt = []
            for n in layer:
                for c in self.children[n]:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        nxt.append(c)
            layer = sorted(nxt, key=node_key)
        return order if len(order) == len(self.nodes) else None

    def shortest_cycle(self) -> Optional[list]:
        """A shortest directed cycle as ``[n0, n1, ..., n0]``, or None."""
        best = None
        for start in self.nodes:
            if (start, start) in self.edges:
                return [start, start]
            prev = {start: None}
            queue = deque([start])
            found = None
            while queue and found is None:
                n = queue.popleft()
                for c in self.children[n]:
                    if c == start:
                        found = n
                        break
                    if c not in prev:
                        prev[c] = n
                        queue.append(c)
            if found is None:
                continue
            path = [found]
            while path[-1] != start:
                path.append(prev[path[-1]])
            cycle = list(reversed(path)) + [start]
            if best is None or len(cycle) < len(best):
                best = cycle
        return best
