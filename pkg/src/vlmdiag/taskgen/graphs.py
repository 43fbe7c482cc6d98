"""Random graphs for the coloring task and an exact chromatic-number solver."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import CapacityError, ParameterError
from .perception import normalize_edges

MAX_NODES = 12
DEFAULT_EDGE_PROBABILITY = 0.4


def _check_graph(edges: Iterable[Sequence[int]], node_count: int) -> tuple[tuple[int, int], ...]:
    if node_count < 0:
        raise ParameterError(f"node_count must be >= 0, got {node_count}")
    if node_count > MAX_NODES:
        raise CapacityError(f"exact coloring supports at most {MAX_NODES} nodes, got {node_count}")
    norm = normalize_edges(edges)
    for u, v in norm:
        if v >= node_count:
            raise ParameterError(f"edge ({u},{v}) out of range for {node_count} nodes")
    return norm


def _neighbors(edges, node_count):
    nbrs = [[] for _ in range(node_count)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return nbrs


def find_coloring(edges, node_count: int, k: int) -> list[int] | None:
    """Return a proper coloring with colors 0..k-1, or None if none exists.

    Backtracking over nodes in decreasing-degree order. A node may only open
    color ``used`` (the next unused one), which removes color-permutation
    symmetry from the search.
    """
    edges = _check_graph(edges, node_count)
    if node_count == 0:
        return []
    if k <= 0:
        return None
    nbrs = _neighbors(edges, node_count)
    order = sorted(range(node_count), key=lambda v: (-len(nbrs[v]), v))
    colors = [-1] * node_count

    def place(i: int, used: int) -> bool:
        if i == node_count:
            return True
        v = order[i]
        forbidden = {colors[u] for u in nbrs[v]}
        for c in range(min(used + 1, k)):
            if c in forbidden:
                continue
            colors[v] = c
            if place(i + 1, max(used, c + 1)):
                return True
        colors[v] = -1
        return False

    return list(colors) if place(0, 0) else None


def optimal_coloring(edges, node_count: int) -> list[int]:
    """A proper coloring that uses exactly chromatic_number colors (0-based)."""
    edges = _check_graph(edges, node_count)
    for k in range(1, node_count + 1):
        coloring = find_coloring(edges, node_count, k)
        if coloring is not None:
            return coloring
    return []


def chromatic_number(edges, node_count: int) -> int:
    """Exact chromatic number; 0 for the empty graph, 1 if there are no edges."""
    return len(set(optimal_coloring(edges, node_count)))


@dataclass(frozen=True)
class GraphInstance:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    chromatic_number: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "edges", _check_graph(self.edges, self.node_count))

    @classmethod
    def from_edges(cls, node_count: int, edges, seed: int = 0) -> "GraphInstance":
        return cls(node_count, tuple(edges), chromatic_number(edges, node_count), seed)

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edges": [list(e) for e in self.edges],
            "chromatic_number": self.chromatic_number,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphInstance":
        return cls(
            int(data["node_count"]),
            tuple(tuple(e) for e in data["edges"]),
            int(data["chromatic_number"]),
            int(data["seed"]),
        )


def gen_graph(node_count: int, edge_probability: float = DEFAULT_EDGE_PROBABILITY, seed: int = 0) -> GraphInstance:
    """Erdos-Renyi style graph; each pair u<v is kept with edge_probability."""
    if not 1 <= node_count <= MAX_NODES:
        raise ParameterError(f"node_count must be in 1..{MAX_NODES}, got {node_count}")
    if not 0.0 <= edge_probability <= 1.0:
        raise ParameterError(f"edge_probability must be in [0, 1], got {edge_probability}")
    rng = random.Random(seed)
    edges = [
        (u, v)
        for u in range(node_count)
        for v in range(u + 1, node_count)
        if rng.random() < edge_probability
    ]
    return GraphInstance.from_edges(node_count, edges, seed)
