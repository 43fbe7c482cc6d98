"""Parse perception-before-reasoning outputs and score them exactly.

A response looks like::

    <perception>edges: (0,1);(1,2)</perception>
    <think>...</think>
    <answer>0:1,1:2,2:1</answer>

Three per-instance bits come out of ``score``: end-to-end accuracy (answer
checked against the true perception), perception accuracy (transcription
equals the truth), and conditional reasoning accuracy (answer checked against
the model's own transcription).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

from .errors import DiagnosticError, ParseError, PerceptionParseError
from .taskgen.graphs import MAX_NODES, chromatic_number
from .taskgen.instances import TaskInstance
from .taskgen.perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind


@dataclass(frozen=True)
class ColoringAnswer:
    colors: tuple[tuple[int, int], ...]  # sorted (node, color) pairs

    def as_dict(self) -> dict[int, int]:
        return dict(self.colors)

    def serialize(self) -> str:
        return ",".join(f"{n}:{c}" for n, c in self.colors)


@dataclass(frozen=True)
class GridAnswer:
    cells: tuple[tuple[int, ...], ...]

    def serialize(self) -> str:
        return "\n".join("".join(map(str, row)) for row in self.cells)


Answer = Union[ColoringAnswer, GridAnswer]


@dataclass(frozen=True)
class StructuredOutput:
    perception_text: str
    reasoning_text: str
    answer: Optional[Answer]  # None when the answer block is malformed
    answer_text: str = ""


@dataclass(frozen=True)
class MetricRecord:
    end_to_end: int
    perception: int
    conditional_reasoning: int
    counterfactual_reasoning: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "end_to_end": self.end_to_end,
            "perception": self.perception,
            "conditional_reasoning": self.conditional_reasoning,
            "counterfactual_reasoning": self.counterfactual_reasoning,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricRecord":
        return cls(
            int(d["end_to_end"]),
            int(d["perception"]),
            int(d["conditional_reasoning"]),
            None if d.get("counterfactual_reasoning") is None else int(d["counterfactual_reasoning"]),
        )


# ---------------------------------------------------------------------------
# block scanning

_PERCEPTION = re.compile(r"<perception>(.*?)</perception>", re.S)
_THINK = re.compile(r"<think>(.*?)</think>", re.S)
_ANSWER = re.compile(r"<answer>(.*?)</answer>", re.S)


def scan_blocks(raw: str) -> tuple[Optional[str], str, Optional[str]]:
    """Return (perception, reasoning, answer) segments; missing blocks are None."""
    m = _PERCEPTION.search(raw)
    if m is None:
        return None, "", None
    perception, pos = m.group(1).strip(), m.end()
    reasoning = ""
    t = _THINK.search(raw, pos)
    if t is not None:
        reasoning, pos = t.group(1).strip(), t.end()
    a = _ANSWER.search(raw, pos)
    return perception, reasoning, (a.group(1).strip() if a else None)


# ---------------------------------------------------------------------------
# grammars

_EDGES_HEAD = re.compile(r"^\s*edges\s*:(.*)$", re.S)
_EDGE_ITEM = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*\)$")
_COLOR_ITEM = re.compile(r"^\s*(\d+)\s*:\s*(-?\d+)\s*$")


def parse_perception(text: str, task_kind: "TaskKind | str") -> CanonicalPerception:
    """Parse a transcription into its canonical form.

    Raises PerceptionParseError on any token outside the grammar.
    """
    kind = TaskKind.parse(task_kind)
    if kind is TaskKind.GC:
        m = _EDGES_HEAD.match(text)
        if m is None:
            raise PerceptionParseError("edge list must start with 'edges:'", "perception")
        body = m.group(1).strip()
        pairs = []
        if body:
            for item in body.split(";"):
                e = _EDGE_ITEM.match(item.strip())
                if e is None:
                    raise PerceptionParseError(f"bad edge token {item.strip()!r}", "perception")
                u, v = int(e.group(1)), int(e.group(2))
                if u == v:
                    raise PerceptionParseError(f"self-loop ({u},{v})", "perception")
                pairs.append((u, v))
        return EdgeList(tuple(pairs))

    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 9:
        raise PerceptionParseError(f"expected 9 grid lines, got {len(lines)}", "perception")
    rows = []
    for i, ln in enumerate(lines):
        if len(ln) != 9 or any(ch not in ".0123456789" for ch in ln):
            raise PerceptionParseError(f"grid line {i + 1} must be 9 characters of 1-9, '.' or '0'", "perception")
        rows.append(tuple(0 if ch == "." else int(ch) for ch in ln))
    return GivensGrid(tuple(rows))


def _parse_coloring(text: str) -> Optional[ColoringAnswer]:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        return None
    colors: dict[int, int] = {}
    for item in items:
        m = _COLOR_ITEM.match(item)
        if m is None:
            return None
        node = int(m.group(1))
        if node in colors:
            return None
        colors[node] = int(m.group(2))
    return ColoringAnswer(tuple(sorted(colors.items())))


def _parse_grid(text: str) -> Optional[GridAnswer]:
    lines = ["".join(ln.split()) for ln in text.strip().splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) != 9 or any(len(ln) != 9 or any(ch not in "123456789" for ch in ln) for ln in lines):
        return None
    return GridAnswer(tuple(tuple(int(ch) for ch in ln) for ln in lines))


def parse_answer(text: str, task_kind: "TaskKind | str | None" = None) -> Optional[Answer]:
    """Parse an answer block; None when malformed.

    Without a task kind, a block containing ':' is read as a coloring.
    """
    if task_kind is None:
        return _parse_coloring(text) if ":" in text else _parse_grid(text)
    if TaskKind.parse(task_kind) is TaskKind.GC:
        return _parse_coloring(text)
    return _parse_grid(text)


def parse_output(raw: str, task_kind: "TaskKind | str | None" = None) -> StructuredOutput:
    """Split a response into its delimited segments.

    The first perception block wins, then the first think and answer blocks
    after it. A missing perception or answer block raises ParseError.
    """
    perception, reasoning, answer = scan_blocks(raw)
    if perception is None:
        raise ParseError("perception missing", "perception")
    if answer is None:
        raise ParseError("answer missing", "answer")
    return StructuredOutput(perception, reasoning, parse_answer(answer, task_kind), answer)


# ---------------------------------------------------------------------------
# checkers

def perception_accuracy(p: "CanonicalPerception | Exception | None", p_star: CanonicalPerception) -> int:
    if p is None or isinstance(p, Exception):
        return 0
    return int(type(p) is type(p_star) and p.serialize() == p_star.serialize())


@lru_cache(maxsize=65536)
def _chi(edges: tuple[tuple[int, int], ...], node_count: int) -> int:
    return chromatic_number(edges, node_count)


def acc_gc(answer: "ColoringAnswer | Mapping[int, int] | None", perception: EdgeList, node_count: int, chi: int) -> int:
    """1 iff the answer colors exactly nodes 0..node_count-1, properly, with chi colors."""
    if answer is None:
        return 0
    colors = answer.as_dict() if isinstance(answer, ColoringAnswer) else dict(answer)
    if set(colors) != set(range(node_count)):
        return 0
    for u, v in perception.edges:
        if colors.get(u) is None or colors.get(v) is None or colors[u] == colors[v]:
            return 0
    return int(len(set(colors.values())) == chi)


def acc_sudoku(answer: "GridAnswer | Sequence[Sequence[int]] | None", perception: GivensGrid) -> int:
    """1 iff the answer is a complete valid grid that keeps every given."""
    if answer is None:
        return 0
    cells = answer.cells if isinstance(answer, GridAnswer) else answer
    if len(cells) != 9 or any(len(row) != 9 for row in cells):
        return 0
    digits = set(range(1, 10))
    for i in range(9):
        if set(cells[i]) != digits:
            return 0
        if {cells[r][i] for r in range(9)} != digits:
            return 0
        br, bc = 3 * (i // 3), 3 * (i % 3)
        if {cells[br + a][bc + b] for a in range(3) for b in range(3)} != digits:
            return 0
    for r in range(9):
        for c in range(9):
            g = perception.cells[r][c]
            if g and cells[r][c] != g:
                return 0
    return 1


def accuracy(answer: Optional[Answer], perception: CanonicalPerception, node_count: Optional[int] = None) -> int:
    """Acc(answer | perception) for either task.

    For coloring, chi is recomputed on the supplied edge list, and the node set
    grows to cover any edge endpoint beyond ``node_count``. Edge lists too
    large for the exact solver score 0.
    """
    if isinstance(perception, EdgeList):
        if not isinstance(answer, ColoringAnswer):
            return 0
        n = node_count or 0
        if perception.edges:
            n = max(n, max(v for _, v in perception.edges) + 1)
        if n > MAX_NODES:
            return 0
        try:
            chi = _chi(perception.edges, n)
        except DiagnosticError:
            return 0
        return acc_gc(answer, perception, n, chi)
    if not isinstance(answer, GridAnswer):
        return 0
    return acc_sudoku(answer, perception)


def extract_answer(raw: str, task_kind: "TaskKind | str | None" = None) -> Optional[Answer]:
    """Parse the first answer block anywhere in ``raw``; None if absent or malformed."""
    m = _ANSWER.search(raw)
    return parse_answer(m.group(1).strip(), task_kind) if m else None


def score(raw_output: str, instance: TaskInstance) -> MetricRecord:
    p_star = instance.canonical_perception
    perception_text, _, answer_text = scan_blocks(raw_output)
    answer = parse_answer(answer_text, instance.task_kind) if answer_text is not None else None
    perception: Optional[CanonicalPerception] = None
    if perception_text is not None:
        try:
            perception = parse_perception(perception_text, instance.task_kind)
        except PerceptionParseError:
            perception = None
    n = instance.node_count
    a = accuracy(answer, p_star, n)
    a_p = perception_accuracy(perception, p_star)
    a_r = accuracy(answer, perception, n) if perception is not None else 0
    return MetricRecord(a, a_p, a_r)
