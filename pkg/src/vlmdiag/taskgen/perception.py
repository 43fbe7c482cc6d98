"""Canonical perception values: the exact textual content of a task image."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from ..errors import ParameterError


class TaskKind(str, enum.Enum):
    GC = "GC"
    SUDOKU = "Sudoku"

    @classmethod
    def parse(cls, value: "str | TaskKind") -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        for kind in cls:
            if value.lower() == kind.value.lower():
                return kind
        raise ParameterError(f"unknown task kind {value!r}")


def normalize_edges(pairs: Iterable[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    """Orient every pair as (small, large), drop duplicates, sort."""
    out = set()
    for pair in pairs:
        u, v = (int(x) for x in pair)
        if u == v:
            raise ParameterError(f"self-loop ({u},{v})")
        if u < 0 or v < 0:
            raise ParameterError(f"negative node index in ({u},{v})")
        out.add((u, v) if u < v else (v, u))
    return tuple(sorted(out))


@dataclass(frozen=True)
class EdgeList:
    """Undirected edge list, always stored sorted with u < v."""

    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", normalize_edges(self.edges))

    @property
    def task_kind(self) -> TaskKind:
        return TaskKind.GC

    def serialize(self) -> str:
        if not self.edges:
            return "edges:"
        return "edges: " + ";".join(f"({u},{v})" for u, v in self.edges)


@dataclass(frozen=True)
class GivensGrid:
    """9x9 Sudoku givens, 0 marks a blank cell."""

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cells = tuple(tuple(int(d) for d in row) for row in self.cells)
        if len(cells) != 9 or any(len(row) != 9 for row in cells):
            raise ParameterError("givens grid must be 9x9")
        if any(not 0 <= d <= 9 for row in cells for d in row):
            raise ParameterError("givens digits must be in 0..9")
        object.__setattr__(self, "cells", cells)

    @property
    def task_kind(self) -> TaskKind:
        return TaskKind.SUDOKU

    def serialize(self) -> str:
        return "\n".join("".join(str(d) if d else "." for d in row) for row in self.cells)


CanonicalPerception = Union[EdgeList, GivensGrid]
