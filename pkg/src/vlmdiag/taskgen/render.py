"""Deterministic SVG rendering of task payloads, plus the inverse decoder.

Every number is written with fixed precision so a payload always maps to the
same bytes. Structural elements carry ``class`` and ``data-*`` attributes;
``decode_document`` reads those back, which is what the simulated policy and
the stub embedder use to "see" an image.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .graphs import GraphInstance
from .perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind
from .sudoku import SudokuInstance

GRAPH_SIZE = 400
GRAPH_RADIUS = 150
NODE_RADIUS = 16
CELL = 40
MARGIN = 10


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _node_xy(i: int, n: int) -> tuple[float, float]:
    angle = 2 * math.pi * i / n - math.pi / 2
    c = GRAPH_SIZE / 2
    return c + GRAPH_RADIUS * math.cos(angle), c + GRAPH_RADIUS * math.sin(angle)


def render_graph(graph: GraphInstance) -> str:
    n = graph.node_count
    pos = [_node_xy(i, n) for i in range(n)]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{GRAPH_SIZE}" height="{GRAPH_SIZE}" '
        f'viewBox="0 0 {GRAPH_SIZE} {GRAPH_SIZE}" data-task="GC" data-nodes="{n}">',
        f'<rect width="{GRAPH_SIZE}" height="{GRAPH_SIZE}" fill="white"/>',
    ]
    for u, v in graph.edges:
        (x1, y1), (x2, y2) = pos[u], pos[v]
        out.append(
            f'<line class="edge" data-u="{u}" data-v="{v}" x1="{_f(x1)}" y1="{_f(y1)}" '
            f'x2="{_f(x2)}" y2="{_f(y2)}" stroke="black" stroke-width="2"/>'
        )
    for i, (x, y) in enumerate(pos):
        out.append(
            f'<circle class="node" data-node="{i}" cx="{_f(x)}" cy="{_f(y)}" r="{NODE_RADIUS}" '
            f'fill="white" stroke="black" stroke-width="2"/>'
        )
        out.append(
            f'<text class="label" data-node="{i}" x="{_f(x)}" y="{_f(y + 6)}" '
            f'font-family="sans-serif" font-size="16" text-anchor="middle">{i}</text>'
        )
    out.append("</svg>")
    return "\n".join(out)


def render_sudoku(puzzle: SudokuInstance) -> str:
    size = 9 * CELL + 2 * MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" data-task="Sudoku">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    lo, hi = MARGIN, MARGIN + 9 * CELL
    for k in range(10):
        heavy = k % 3 == 0
        cls = "grid-heavy" if heavy else "grid-thin"
        width = 3 if heavy else 1
        p = MARGIN + k * CELL
        out.append(f'<line class="{cls}" x1="{p}" y1="{lo}" x2="{p}" y2="{hi}" stroke="black" stroke-width="{width}"/>')
        out.append(f'<line class="{cls}" x1="{lo}" y1="{p}" x2="{hi}" y2="{p}" stroke="black" stroke-width="{width}"/>')
    for r, row in enumerate(puzzle.givens):
        for c, d in enumerate(row):
            if not d:
                continue
            x = MARGIN + c * CELL + CELL / 2
            y = MARGIN + r * CELL + CELL / 2 + 9
            out.append(
                f'<text class="digit" data-row="{r}" data-col="{c}" x="{_f(x)}" y="{_f(y)}" '
                f'font-family="sans-serif" font-size="26" text-anchor="middle">{d}</text>'
            )
    out.append("</svg>")
    return "\n".join(out)


def render(obj) -> str:
    """Render a TaskInstance, GraphInstance or SudokuInstance to SVG text."""
    payload = getattr(obj, "payload", obj)
    if isinstance(payload, GraphInstance):
        return render_graph(payload)
    if isinstance(payload, SudokuInstance):
        return render_sudoku(payload)
    raise TypeError(f"cannot render {type(obj).__name__}")


@dataclass(frozen=True)
class DecodedImage:
    task_kind: TaskKind
    perception: CanonicalPerception
    node_count: int | None = None


_TASK = re.compile(r'data-task="(\w+)"')
_NODES = re.compile(r'<circle class="node"')
_EDGE = re.compile(r'<line class="edge" data-u="(\d+)" data-v="(\d+)"')
_DIGIT = re.compile(r'<text class="digit" data-row="(\d)" data-col="(\d)"[^>]*>(\d)</text>')


def decode_document(svg: str) -> DecodedImage:
    m = _TASK.search(svg)
    if m is None:
        raise ValueError("not a task document")
    kind = TaskKind.parse(m.group(1))
    if kind is TaskKind.GC:
        edges = EdgeList(tuple((int(u), int(v)) for u, v in _EDGE.findall(svg)))
        return DecodedImage(kind, edges, len(_NODES.findall(svg)))
    cells = [[0] * 9 for _ in range(9)]
    for r, c, d in _DIGIT.findall(svg):
        cells[int(r)][int(c)] = int(d)
    return DecodedImage(kind, GivensGrid(tuple(tuple(row) for row in cells)))
