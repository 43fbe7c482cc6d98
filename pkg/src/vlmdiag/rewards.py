"""Outcome, perception-augmented and surrogate rewards, and their correlation diagnostics."""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Protocol, Sequence

import numpy as np

from .errors import ParameterError, PerceptionParseError, PolicyError, RewardError
from .evaluator import MetricRecord, accuracy, extract_answer, parse_perception, perception_accuracy
from .seeding import derive_seed
from .taskgen.instances import TaskInstance
from .taskgen.perception import CanonicalPerception, EdgeList, GivensGrid, TaskKind
from .taskgen.render import decode_document

VARIANCE_EPS = 1e-12
SURROGATES = ("none", "similarity", "self", "teacher")


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.0
    surrogate: str = "none"
    n: int = 1  # rollout budget for the self reward
    teacher_failure: str = "skip"  # or "zero"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.surrogate not in SURROGATES:
            raise ParameterError(f"unknown surrogate {self.surrogate!r}")
        if self.n < 1:
            raise ParameterError("self-reward budget N must be >= 1")
        if self.teacher_failure not in ("skip", "zero"):
            raise ParameterError("teacher_failure must be 'skip' or 'zero'")

    @classmethod
    def parse(cls, alpha: float, surrogate: str, **kw) -> "RewardConfig":
        """Accepts the CLI spellings none | similarity | self:N | teacher."""
        if surrogate.startswith("self"):
            _, _, n = surrogate.partition(":")
            return cls(alpha, "self", int(n) if n else 1, **kw)
        return cls(alpha, surrogate, **kw)

    @property
    def label(self) -> str:
        return f"self:{self.n}" if self.surrogate == "self" else self.surrogate

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "surrogate": self.label, "teacher_failure": self.teacher_failure}


@dataclass(frozen=True)
class RewardRecord:
    outcome: int
    perception_signal: Optional[float]
    augmented: Optional[float]
    signals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "perception_signal": self.perception_signal,
            "augmented": self.augmented,
            "signals": dict(self.signals),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardRecord":
        return cls(int(d["outcome"]), d.get("perception_signal"), d.get("augmented"), dict(d.get("signals") or {}))


def outcome_reward(metrics: MetricRecord) -> int:
    return metrics.end_to_end


def augmented_reward(a: float, perception_signal: float, alpha: float) -> float:
    """alpha * perception_signal + (1 - alpha) * a."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return float(a)
    if alpha == 1.0:
        return float(perception_signal)
    return alpha * perception_signal + (1 - alpha) * a


# ---------------------------------------------------------------------------
# self reward

TEXT_ONLY_PROMPT = (
    "No image is available. {task}\nTranscription of the image:\n"
    "<perception>{perception}</perception>\n"
    "Reason from this transcription inside <think></think> and give the final answer "
    "inside <answer></answer>."
)


def text_only_prompt(instance: TaskInstance, perception_text: str) -> list[dict]:
    if instance.task_kind is TaskKind.GC:
        task = f"The task concerns an undirected graph with {instance.node_count} nodes; color it with the minimum number of colors."
    else:
        task = "The task is to complete a 9x9 Sudoku grid."
    return [{"kind": "text", "data": TEXT_ONLY_PROMPT.format(task=task, perception=perception_text)}]


def self_reward(policy, perception_text: str, instance: TaskInstance, n: int, seed: int) -> float:
    """Mean end-to-end accuracy of ``n`` text-only rollouts conditioned on the transcription."""
    if n < 1:
        raise ParameterError("N must be >= 1")
    parts = text_only_prompt(instance, perception_text)
    hits = 0
    for k in range(n):
        try:
            raw = policy.generate(parts, None, derive_seed(seed, k))
        except PolicyError as exc:
            raise PolicyError(str(exc), rollout_index=k) from exc
        answer = extract_answer(raw, instance.task_kind)
        hits += accuracy(answer, instance.canonical_perception, instance.node_count)
    return hits / n


# ---------------------------------------------------------------------------
# teacher reward

TEACHER_INSTRUCTION = "Transcribe the image into its canonical textual form. Output only the transcription."


class TeacherClient(Protocol):
    def perceive(self, image: str, task_kind: TaskKind, instruction: str, seed: int) -> str: ...


class OracleTeacher:
    """Returns the exact transcription of the image document."""

    def perceive(self, image: str, task_kind: TaskKind, instruction: str, seed: int) -> str:
        return decode_document(image).perception.serialize()


class NoisyTeacher:
    """Oracle transcription, corrupted with probability ``q``.

    The corruption adds a phantom edge (GC) or blanks a given (Sudoku), neither
    of which the simulated policy ever emits, so a corrupted teacher never
    agrees with any model transcription.
    """

    def __init__(self, q: float, seed: int = 0):
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"corruption probability must be in [0, 1], got {q}")
        self.q = q
        self.seed = seed

    def perceive(self, image: str, task_kind: TaskKind, instruction: str, seed: int) -> str:
        decoded = decode_document(image)
        if random.Random(derive_seed(self.seed, seed)).random() >= self.q:
            return decoded.perception.serialize()
        p = decoded.perception
        if isinstance(p, EdgeList):
            n = decoded.node_count or 0
            return EdgeList(p.edges + ((n, n + 1),)).serialize()
        cells = [list(row) for row in p.cells]
        for r in range(9):
            for c in range(9):
                if cells[r][c]:
                    cells[r][c] = 0
                    return GivensGrid(tuple(map(tuple, cells))).serialize()
        cells[0][0] = 1
        return GivensGrid(tuple(map(tuple, cells))).serialize()


def teacher_reward(teacher: TeacherClient, instance: TaskInstance, model_perception, seed: int = 0) -> int:
    """1 iff the model's parsed transcription equals the teacher's.

    ``model_perception`` may be a CanonicalPerception, an exception, or None
    (an unparseable transcription scores 0).
    """
    try:
        text = teacher.perceive(instance.image_document, instance.task_kind, TEACHER_INSTRUCTION, seed)
        reference = parse_perception(text, instance.task_kind)
    except PerceptionParseError as exc:
        raise RewardError(f"teacher transcription unparseable: {exc}") from exc
    except PolicyError as exc:
        raise RewardError(f"teacher unavailable: {exc}") from exc
    return perception_accuracy(model_perception, reference)


# ---------------------------------------------------------------------------
# similarity reward

class Similarity(NamedTuple):
    value: float
    degenerate: bool


class StubEmbedder:
    """Hashed bag-of-symbols embedder standing in for an image-text encoder.

    Images and texts are reduced to the same symbol vocabulary (one symbol per
    edge or per given cell), each symbol is hashed to a signed bucket. Texts
    that fail to parse fall back to their raw word tokens.
    """

    def __init__(self, dim: int = 512):
        self.dim = dim

    def _vector(self, symbols: Iterable[str]) -> np.ndarray:
        vec = np.zeros(self.dim)
        for sym in symbols:
            h = hashlib.blake2b(sym.encode(), digest_size=8).digest()
            idx = int.from_bytes(h[:4], "little") % self.dim
            vec[idx] += 1.0 if h[4] & 1 else -1.0
        return vec

    @staticmethod
    def _symbols(p: CanonicalPerception) -> list[str]:
        if isinstance(p, EdgeList):
            return [f"edge:{u}-{v}" for u, v in p.edges]
        return [f"cell:{r},{c}={d}" for r, row in enumerate(p.cells) for c, d in enumerate(row) if d]

    def embed_image(self, image: str) -> np.ndarray:
        return self._vector(self._symbols(decode_document(image).perception))

    def embed_text(self, text: str) -> np.ndarray:
        for kind in TaskKind:
            try:
                return self._vector(self._symbols(parse_perception(text, kind)))
            except PerceptionParseError:
                continue
        return self._vector(f"tok:{t}" for t in re.findall(r"\w+", text))


def cosine(u: np.ndarray, v: np.ndarray) -> Similarity:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return Similarity(0.0, True)
    return Similarity(float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)), False)


def similarity_reward(embedder, instance: TaskInstance, perception_text: str) -> Similarity:
    return cosine(embedder.embed_image(instance.image_document), embedder.embed_text(perception_text))


# ---------------------------------------------------------------------------
# correlation diagnostics

def pearson(xs: Sequence[float], ys: Sequence[float], eps: float = VARIANCE_EPS) -> Optional[float]:
    """Pearson's r; None flags a sample whose variance is below ``eps``."""
    if len(xs) != len(ys):
        raise ParameterError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ParameterError("need at least 2 samples")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx / x.size < eps or syy / y.size < eps:
        return None
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CouplingReport:
    reward_field: str
    r_reward_perception: Optional[float]
    r_reward_reasoning: Optional[float]
    sample_count: int

    @property
    def degenerate(self) -> bool:
        return self.r_reward_perception is None or self.r_reward_reasoning is None

    def to_dict(self) -> dict:
        return {
            "reward_field": self.reward_field,
            "r_reward_perception": self.r_reward_perception,
            "r_reward_reasoning": self.r_reward_reasoning,
            "sample_count": self.sample_count,
            "degenerate_perception": self.r_reward_perception is None,
            "degenerate_reasoning": self.r_reward_reasoning is None,
        }


def _paired(records, field_a: str, field_b: str) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for rec in records:
        a, b = rec.value(field_a), rec.value(field_b)
        if a is not None and b is not None:
            xs.append(float(a))
            ys.append(float(b))
    return xs, ys


def coupling_diagnostic(rollouts, reward_field: str = "outcome") -> CouplingReport:
    """Correlate a reward with perception accuracy and conditional reasoning accuracy.

    Conditional (not counterfactual) reasoning accuracy is used because it is
    defined within a single rollout.
    """
    rewards_p, a_p = _paired(rollouts, reward_field, "perception")
    rewards_r, a_r = _paired(rollouts, reward_field, "conditional_reasoning")
    if len(rewards_p) < 2:
        raise ParameterError(f"need at least 2 rollouts with {reward_field!r}")
    return CouplingReport(reward_field, pearson(rewards_p, a_p), pearson(rewards_r, a_r), len(rewards_p))


def surrogate_quality(rollouts, surrogate_field: str) -> Optional[float]:
    """Pearson r between a surrogate perception reward and ground-truth perception accuracy."""
    xs, ys = _paired(rollouts, surrogate_field, "perception")
    if len(xs) < 2:
        raise ParameterError(f"need at least 2 rollouts with {surrogate_field!r}")
    return pearson(xs, ys)
