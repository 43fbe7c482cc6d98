from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Union

from ..errors import ParameterError
from ..seeding import derive_seed
from .graphs import DEFAULT_EDGE_PROBABILITY, GraphInstance, gen_graph
from .perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind
from .render import render
from .sudoku import DEFAULT_GIVENS, SudokuInstance, gen_sudoku

Payload = Union[GraphInstance, SudokuInstance]

DEFAULT_TEST_COUNT = 500

GC_PROMPT = (
    "The image shows an undirected graph with {n} nodes labelled 0 to {last}. "
    "First transcribe every edge inside <perception></perception> as "
    "`edges: (u,v);(u,v);...`. Then reason inside <think></think>. Finally give a "
    "proper coloring that uses the minimum possible number of colors inside "
    "<answer></answer> as comma-separated `node:color` pairs with integer colors."
)
SUDOKU_PROMPT = (
    "The image shows a partially filled 9x9 Sudoku grid. First transcribe the grid "
    "inside <perception></perception> as 9 lines of 9 characters, using digits 1-9 "
    "for given cells and `.` for blanks. Then reason inside <think></think>. Finally "
    "give the completed grid inside <answer></answer> as 9 lines of 9 digits."
)


def canonical_of(payload: Payload) -> CanonicalPerception:
    if isinstance(payload, GraphInstance):
        return EdgeList(payload.edges)
    if isinstance(payload, SudokuInstance):
        return GivensGrid(payload.givens)
    raise TypeError(f"no canonical perception for {type(payload).__name__}")


def kind_of(payload: Payload) -> TaskKind:
    return TaskKind.GC if isinstance(payload, GraphInstance) else TaskKind.SUDOKU


def prompt_for(payload: Payload) -> str:
    if isinstance(payload, GraphInstance):
        return GC_PROMPT.format(n=payload.node_count, last=payload.node_count - 1)
    return SUDOKU_PROMPT


@dataclass(frozen=True)
class TaskInstance:
    id: str
    task_kind: TaskKind
    prompt_text: str
    image_document: str
    canonical_perception: CanonicalPerception
    payload: Payload

    @property
    def node_count(self) -> int | None:
        return self.payload.node_count if isinstance(self.payload, GraphInstance) else None

    @property
    def seed(self) -> int:
        return self.payload.seed


def make_task(payload: Payload, task_id: str) -> TaskInstance:
    return TaskInstance(
        id=task_id,
        task_kind=kind_of(payload),
        prompt_text=prompt_for(payload),
        image_document=render(payload),
        canonical_perception=canonical_of(payload),
        payload=payload,
    )


def generate_tasks(
    task: "str | TaskKind",
    count: int = DEFAULT_TEST_COUNT,
    seed: int = 0,
    *,
    nodes: tuple[int, int] = (7, 9),
    edge_probability: float = DEFAULT_EDGE_PROBABILITY,
    givens: int = DEFAULT_GIVENS,
    unique: bool = False,
) -> list[TaskInstance]:
    """Generate ``count`` instances; instance k uses a seed derived from (seed, k)."""
    kind = TaskKind.parse(task)
    if count < 0:
        raise ParameterError("count must be >= 0")
    lo, hi = nodes
    if lo > hi:
        raise ParameterError(f"empty node range {lo}..{hi}")
    out = []
    for k in range(count):
        inst_seed = derive_seed(seed, k)
        if kind is TaskKind.GC:
            n = random.Random(inst_seed).randint(lo, hi)
            payload = gen_graph(n, edge_probability, inst_seed)
        else:
            payload = gen_sudoku(givens, inst_seed, unique)
        out.append(make_task(payload, f"{kind.value.lower()}-{seed}-{k:05d}"))
    return out
