"""Policy interface and the simulated policy used as a verification oracle."""

from __future__ import annotations

import hashlib
import random
import re
from typing import Optional, Protocol, Sequence

import numpy as np

from ..errors import ParameterError
from ..evaluator import ColoringAnswer, GridAnswer, accuracy, parse_perception
from ..seeding import derive_seed
from ..taskgen.graphs import MAX_NODES, find_coloring, optimal_coloring
from ..taskgen.perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind
from ..taskgen.render import decode_document
from ..taskgen.sudoku import solve

PromptParts = Sequence[dict]

_PERCEPTION = re.compile(r"<perception>(.*?)</perception>", re.S)
_NODE_COUNT = re.compile(r"(\d+) nodes")
_TOKEN = re.compile(r"\w+|[^\w\s]")


class Policy(Protocol):
    """generate() returns the raw response; with a prefix it must start with it."""

    tag: str

    def generate(self, prompt_parts: PromptParts, response_prefix: Optional[str], seed: int) -> str: ...


def image_part(parts: PromptParts) -> Optional[str]:
    for part in parts:
        if part.get("kind") == "image":
            return part["data"]
    return None


def text_of(parts: PromptParts) -> str:
    return "\n".join(p["data"] for p in parts if p.get("kind") == "text")


def split_spans(raw: str) -> tuple[list[str], list[str]]:
    """Tokens before and after the end of the perception block."""
    end = raw.find("</perception>")
    cut = end + len("</perception>") if end >= 0 else 0
    return _TOKEN.findall(raw[:cut]), _TOKEN.findall(raw[cut:])


def _coloring_text(colors: Sequence[int]) -> str:
    return ColoringAnswer(tuple((i, c + 1) for i, c in enumerate(colors))).serialize()


class SimulatedPolicy:
    """Bernoulli policy over the delimited output format.

    Perception succeeds with probability ``q_p`` (the exact transcription is
    emitted) and otherwise emits one fixed single-element corruption per
    instance. Reasoning succeeds with probability ``q_r`` when the image is in
    context and ``q_r_text`` when the policy is handed a transcription (a
    text-only prompt or a prefilled perception block). Success yields a correct
    answer for whatever perception the policy is working from; failure yields
    an answer that is wrong under every perception.

    Corruptions are chosen so that a correct answer for the corrupted
    transcription is wrong for the true one, which makes end-to-end accuracy
    equal the product of the perception and conditional reasoning bits.
    """

    deterministic = True

    def __init__(self, q_p: float, q_r: float, q_r_text: Optional[float] = None, seed: int = 0):
        q_r_text = q_r if q_r_text is None else q_r_text
        for name, q in (("q_p", q_p), ("q_r", q_r), ("q_r_text", q_r_text)):
            if not 0.0 <= q <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {q}")
        self.q_p, self.q_r, self.q_r_text, self.seed = q_p, q_r, q_r_text, seed
        self.tag = f"sim(qp={q_p},qr={q_r},qrt={q_r_text},seed={seed})"
        self._decoded: dict[str, tuple] = {}
        self._answers: dict[tuple, tuple[str, str]] = {}
        self._corruptions: dict[tuple, CanonicalPerception] = {}

    # -- generate --------------------------------------------------------

    def generate(self, prompt_parts: PromptParts, response_prefix: Optional[str], seed: int) -> str:
        rng = random.Random(derive_seed(self.seed, seed))
        u_p, u_r = rng.random(), rng.random()
        image = image_part(prompt_parts)
        text = text_of(prompt_parts)
        kind, truth, n = self._see(image, text)

        if response_prefix is not None:
            m = _PERCEPTION.search(response_prefix)
            perceived = self._read(m.group(1) if m else "", kind)
            body = self._continuation(perceived, n, u_r < self.q_r_text)
            return response_prefix + body
        if image is None:
            m = _PERCEPTION.search(text)
            perceived = self._read(m.group(1) if m else "", kind)
            return self._continuation(perceived, n, u_r < self.q_r_text)
        perceived = truth if u_p < self.q_p else self._corrupt(truth, n)
        return f"<perception>{perceived.serialize()}</perception>\n" + self._continuation(perceived, n, u_r < self.q_r)

    def token_scalars(self, raw: str, seed: int) -> dict:
        """Synthetic per-token NLLs and importance ratios for a response."""
        p_tok, r_tok = split_spans(raw)
        total = len(p_tok) + len(r_tok)
        rng = np.random.default_rng(derive_seed(self.seed, seed, 0x70C))
        nll = np.round(rng.exponential(0.4, total), 6)
        ratio = np.round(np.exp(rng.normal(0.0, 0.05, total)), 6)
        return {"nll": nll.tolist(), "ratio": ratio.tolist(), "p_len": len(p_tok), "r_len": len(r_tok)}

    # -- helpers ---------------------------------------------------------

    def _see(self, image: Optional[str], text: str):
        if image is not None:
            hit = self._decoded.get(image)
            if hit is None:
                d = decode_document(image)
                hit = self._decoded[image] = (d.task_kind, d.perception, d.node_count)
            return hit
        kind = TaskKind.GC if "edges" in text else TaskKind.SUDOKU
        m = _NODE_COUNT.search(text)
        return kind, None, int(m.group(1)) if m else None

    @staticmethod
    def _read(text: str, kind: TaskKind) -> Optional[CanonicalPerception]:
        try:
            return parse_perception(text.strip(), kind)
        except Exception:
            return None

    def _continuation(self, perceived: Optional[CanonicalPerception], n: Optional[int], success: bool) -> str:
        good, bad = self._answer_pair(perceived, n)
        if isinstance(perceived, EdgeList):
            think = "Find a proper coloring with as few colors as possible, checking every edge."
        else:
            think = "Fill each blank by elimination over rows, columns and boxes."
        return f"<think>{think}</think>\n<answer>{good if success else bad}</answer>"

    def _answer_pair(self, p: Optional[CanonicalPerception], n: Optional[int]) -> tuple[str, str]:
        """(correct answer, always-wrong answer) for a perception."""
        key = (type(p).__name__, p.serialize() if p is not None else "", n)
        hit = self._answers.get(key)
        if hit is not None:
            return hit
        if isinstance(p, EdgeList):
            size = max([n or 0] + [v + 1 for _, v in p.edges])
            if size > MAX_NODES:
                pair = ("", "")
            else:
                colors = optimal_coloring(p.edges, size)
                pair = (_coloring_text(colors), _coloring_text(colors[:-1]))
        elif isinstance(p, GivensGrid):
            sol = solve(p.cells)
            if sol is None:
                pair = ("\n".join(["1" * 9] * 9),) * 2
            else:
                wrong = [list(row) for row in sol]
                wrong[0][0] = wrong[0][1]
                pair = (GridAnswer(sol).serialize(), GridAnswer(tuple(map(tuple, wrong))).serialize())
        else:
            pair = ("", "")
        self._answers[key] = pair
        return pair

    def _corrupt(self, truth: CanonicalPerception, n: Optional[int]) -> CanonicalPerception:
        key = (truth.serialize(), n)
        hit = self._corruptions.get(key)
        if hit is None:
            digest = hashlib.blake2b(key[0].encode(), digest_size=8).digest()
            rng = random.Random(derive_seed(self.seed, int.from_bytes(digest, "little"), n or 0))
            if isinstance(truth, EdgeList):
                hit = self._corrupt_graph(truth, n or 0, rng)
            else:
                hit = self._corrupt_grid(truth, rng)
            self._corruptions[key] = hit
        return hit

    def _corrupt_graph(self, truth: EdgeList, n: int, rng: random.Random) -> EdgeList:
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(pairs)
        present = set(truth.edges)
        for u, v in pairs:
            if (u, v) in present:
                candidate = EdgeList(tuple(e for e in truth.edges if e != (u, v)))
                answer = _merged_coloring(candidate, n, u, v)
            else:
                candidate = EdgeList(truth.edges + ((u, v),))
                answer = _coloring_text(optimal_coloring(candidate.edges, n))
            if answer is None:
                continue
            parsed = _parse_colors(answer)
            if accuracy(parsed, candidate, n) == 1 and accuracy(parsed, truth, n) == 0:
                self._answers[(EdgeList.__name__, candidate.serialize(), n)] = (
                    answer,
                    ColoringAnswer(parsed.colors[:-1]).serialize(),
                )
                return candidate
        # no in-range flip works: point an edge at a node the graph does not have
        return EdgeList(truth.edges + ((0, n),))

    def _corrupt_grid(self, truth: GivensGrid, rng: random.Random) -> GivensGrid:
        cells = [list(row) for row in truth.cells]
        givens = [(r, c) for r in range(9) for c in range(9) if cells[r][c]]
        rng.shuffle(givens)
        for r, c in givens:
            digits = list(range(1, 10))
            rng.shuffle(digits)
            for d in digits:
                if d == cells[r][c]:
                    continue
                trial = [row[:] for row in cells]
                trial[r][c] = d
                if solve(trial) is not None:
                    return GivensGrid(tuple(map(tuple, trial)))
        raise ParameterError("no solvable single-given corruption exists for this puzzle")


def _parse_colors(text: str) -> ColoringAnswer:
    pairs = [tuple(int(x) for x in item.split(":")) for item in text.split(",") if item]
    return ColoringAnswer(tuple(sorted(pairs)))


def _merged_coloring(graph: EdgeList, n: int, u: int, v: int) -> Optional[str]:
    """An optimal coloring of ``graph`` that gives u and v the same color, if one exists."""
    k = len(set(optimal_coloring(graph.edges, n)))

    def squash(w: int) -> int:
        w = u if w == v else w
        return w - 1 if w > v else w

    merged = {tuple(sorted((squash(a), squash(b)))) for a, b in graph.edges}
    merged = [e for e in merged if e[0] != e[1]]
    coloring = find_coloring(merged, n - 1, k)
    if coloring is None:
        return None
    return _coloring_text([coloring[squash(w)] for w in range(n)])
