"""Decomposed SFT and GRPO objectives over per-token scalars.

Responses are perception tokens followed by reasoning tokens. Functions here
take plain numbers (token NLLs, importance ratios, sequence advantages) and
never touch a model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ParameterError

ADVANTAGE_EPS = 1e-8
NORM_EPS = 1e-12


@dataclass(frozen=True)
class TokenizedResponse:
    values: tuple[float, ...]
    perception_len: int
    reasoning_len: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.perception_len < 0 or self.reasoning_len < 0:
            raise ParameterError("span lengths must be >= 0")
        if len(self.values) != self.perception_len + self.reasoning_len:
            raise ParameterError(
                f"{len(self.values)} values for spans {self.perception_len}+{self.reasoning_len}"
            )

    @property
    def length(self) -> int:
        return self.perception_len + self.reasoning_len

    @property
    def perception_share(self) -> float:
        return self.perception_len / self.length


@dataclass(frozen=True)
class GroupRollouts:
    rewards: tuple[float, ...]
    responses: tuple[TokenizedResponse, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "responses", tuple(self.responses))
        if self.responses and len(self.responses) != len(self.rewards):
            raise ParameterError("one reward per response is required")
        if not all(math.isfinite(r) for r in self.rewards):
            raise ParameterError("rewards must be finite")


class NGDiffWeight(NamedTuple):
    weight: float
    degenerate: bool


def sft_losses(resp: TokenizedResponse) -> tuple[float, float, float]:
    """Return (L_p, L_r, L_std): span sums and the token-averaged total."""
    if resp.length == 0:
        raise ParameterError("empty response")
    v = np.asarray(resp.values, dtype=np.float64)
    if np.any(v < 0):
        raise ParameterError("negative log-likelihood terms must be >= 0")
    l_p = math.fsum(v[: resp.perception_len])
    l_r = math.fsum(v[resp.perception_len:])
    return l_p, l_r, (l_p + l_r) / resp.length


def sft_reweighted(l_p: float, l_r: float, p_len: int, r_len: int, lam: float) -> float:
    """lam * L_p/|p| + (1 - lam) * L_r/|r|."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must be in [0, 1], got {lam}")
    total = 0.0
    if lam > 0:
        if p_len < 1:
            raise ParameterError("perception span is empty but carries weight")
        total += lam * l_p / p_len
    if lam < 1:
        if r_len < 1:
            raise ParameterError("reasoning span is empty but carries weight")
        total += (1 - lam) * l_r / r_len
    return total


def ngdiff_weight(g_p_norm: float, g_r_norm: float, eps: float = NORM_EPS) -> NGDiffWeight:
    """Perception weight from inverse gradient norms, (1/gp) / (1/gp + 1/gr).

    Written in the equivalent form gr / (gp + gr). A norm at or below ``eps``
    falls back to 0.5 and sets ``degenerate``.
    """
    if not (math.isfinite(g_p_norm) and math.isfinite(g_r_norm)) or g_p_norm < 0 or g_r_norm < 0:
        raise ParameterError("gradient norms must be finite and >= 0")
    if g_p_norm <= eps or g_r_norm <= eps:
        return NGDiffWeight(0.5, True)
    return NGDiffWeight(g_r_norm / (g_p_norm + g_r_norm), False)


def grpo_advantages(rewards: Sequence[float], eps: float = ADVANTAGE_EPS) -> np.ndarray:
    """Group-normalized advantages with the population standard deviation.

    A group whose reward spread is below ``eps`` gets all-zero advantages.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ParameterError("need a group of at least 2 rewards")
    if not np.all(np.isfinite(r)):
        raise ParameterError("rewards must be finite")
    centered = r - r.mean()
    std = math.sqrt(math.fsum(centered * centered) / r.size)
    if std < eps:
        return np.zeros_like(r)
    return centered / std


def rescale_advantages(resp: TokenizedResponse, advantage: float, lam: float) -> np.ndarray:
    """Per-token advantages that turn the token-averaged objective into a span mix.

    Perception tokens get lam * |y|/|p| * A, reasoning tokens (1-lam) * |y|/|r| * A.
    The factors are computed as lam / share and (1-lam) / (1-share), with
    share = |p|/|y|, so lam == share gives factors of exactly 1.
    """
    if resp.perception_len < 1 or resp.reasoning_len < 1:
        raise ParameterError("both spans must hold at least one token")
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must be in [0, 1], got {lam}")
    share = resp.perception_share
    out = np.empty(resp.length, dtype=np.float64)
    out[: resp.perception_len] = (lam / share) * advantage
    out[resp.perception_len:] = ((1 - lam) / (1 - share)) * advantage
    return out


def grpo_objective(group: GroupRollouts, advantages_per_token: Sequence[Sequence[float]]) -> float:
    """(1/G) sum_i (1/|y_i|) sum_t rho_it * A_it, without clipping or KL."""
    if len(advantages_per_token) != len(group.responses):
        raise ParameterError("one advantage sequence per response is required")
    if not group.responses:
        raise ParameterError("empty group")
    terms = []
    for i, (resp, adv) in enumerate(zip(group.responses, advantages_per_token)):
        adv = np.asarray(adv, dtype=np.float64)
        if adv.shape != (resp.length,):
            raise ParameterError(f"response {i}: {adv.size} advantages for {resp.length} tokens")
        if resp.length == 0:
            raise ParameterError(f"response {i} is empty")
        rho = np.asarray(resp.values, dtype=np.float64)
        terms.append(math.fsum(rho * adv) / resp.length)
    return math.fsum(terms) / len(terms)


def span_objectives(group: GroupRollouts, advantages: Sequence[float]) -> tuple[float, float]:
    """(J_p, J_r): span-averaged ratio-weighted advantages, averaged over the group."""
    if len(advantages) != len(group.responses) or not group.responses:
        raise ParameterError("one sequence advantage per response is required")
    jp, jr = [], []
    for resp, a in zip(group.responses, advantages):
        if resp.perception_len < 1 or resp.reasoning_len < 1:
            raise ParameterError("both spans must hold at least one token")
        rho = np.asarray(resp.values, dtype=np.float64)
        jp.append(math.fsum(rho[: resp.perception_len]) * a / resp.perception_len)
        jr.append(math.fsum(rho[resp.perception_len:]) * a / resp.reasoning_len)
    g = len(group.responses)
    return math.fsum(jp) / g, math.fsum(jr) / g


def reweighted_grpo_objective(group: GroupRollouts, advantages: Sequence[float], lam: float) -> float:
    """Token-averaged objective evaluated on rescaled advantages."""
    per_token = [rescale_advantages(r, a, lam) for r, a in zip(group.responses, advantages)]
    return grpo_objective(group, per_token)
