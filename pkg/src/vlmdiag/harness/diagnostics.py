"""Aggregate rollout files into diagnostic reports and parameter sweeps."""

from __future__ import annotations

import math
import os
from collections import OrderedDict
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..errors import ParameterError
from ..objectives import (
    GroupRollouts,
    TokenizedResponse,
    grpo_advantages,
    grpo_objective,
    rescale_advantages,
    sft_losses,
    sft_reweighted,
    span_objectives,
)
from ..rewards import augmented_reward, coupling_diagnostic, pearson, surrogate_quality
from .records import RolloutFile, RolloutRecord, file_sha256, read_rollouts

SFT_REL_TOL = 1e-12
DECOMP_REL_TOL = 1e-10
DECOMP_ABS_TOL = 1e-12
SHARE = "share"  # per-record lambda = |p| / |y|

Lambda = Union[float, str]


def _mean(xs: Sequence[float]) -> Optional[float]:
    return math.fsum(xs) / len(xs) if xs else None


def _percent(xs: Sequence[float]) -> Optional[float]:
    m = _mean(xs)
    return None if m is None else 100.0 * m


def _load(rollouts) -> tuple[RolloutFile, Optional[str]]:
    if isinstance(rollouts, RolloutFile):
        return rollouts, None
    if isinstance(rollouts, (str, os.PathLike)):
        return read_rollouts(rollouts), os.fspath(rollouts)
    return RolloutFile(header={}, records=list(rollouts)), None


def _source(rf: RolloutFile, path: Optional[str]) -> dict:
    return {
        "path": path,
        "sha256": file_sha256(path) if path else None,
        "config_hash": rf.header.get("config_hash"),
        "seed": rf.header.get("seed"),
        "policy_tag": rf.header.get("policy_tag"),
        "kind": rf.header.get("kind"),
    }


# ---------------------------------------------------------------------------
# objective identities over logged token scalars

def _responses(rec: RolloutRecord) -> Optional[tuple[TokenizedResponse, TokenizedResponse]]:
    t = rec.tokens
    if not t:
        return None
    p, r = int(t["p_len"]), int(t["r_len"])
    return TokenizedResponse(t["nll"], p, r), TokenizedResponse(t["ratio"], p, r)


def lambda_row(records: Sequence[RolloutRecord], lam: Lambda, reward_field: str = "outcome") -> dict:
    """Reweighted SFT loss and GRPO objective at one lambda, with identity checks.

    ``lam == "share"`` uses each record's own perception share |p|/|y|, at which
    the reweighted SFT loss must equal the token-averaged loss and rescaled
    advantages must equal the unscaled ones.
    """
    if lam != SHARE and not (isinstance(lam, (int, float)) and 0.0 <= lam <= 1.0):
        raise ParameterError(f"lambda must be in [0, 1] or {SHARE!r}, got {lam!r}")
    losses, std_losses = [], []
    sft_ok = rescale_ok = skipped = 0
    groups: "OrderedDict[str, list]" = OrderedDict()
    for rec in records:
        pair = _responses(rec)
        if pair is None:
            continue
        nll, ratio = pair
        if nll.perception_len < 1 or nll.reasoning_len < 1:
            skipped += 1
            continue
        lam_i = nll.perception_share if lam == SHARE else float(lam)
        l_p, l_r, l_std = sft_losses(nll)
        loss = sft_reweighted(l_p, l_r, nll.perception_len, nll.reasoning_len, lam_i)
        losses.append(loss)
        std_losses.append(l_std)
        sft_ok += math.isclose(loss, l_std, rel_tol=SFT_REL_TOL, abs_tol=0.0)
        rescale_ok += bool(np.all(rescale_advantages(ratio, 1.0, lam_i) == 1.0))
        reward = rec.value(reward_field)
        if reward is not None:
            groups.setdefault(rec.task_id, []).append((ratio, float(reward), lam_i))

    objectives, decomp_ok, n_groups = [], 0, 0
    for members in groups.values():
        if len(members) < 2:
            continue
        n_groups += 1
        group = GroupRollouts([m[1] for m in members], [m[0] for m in members])
        adv = grpo_advantages(group.rewards)
        per_token = [rescale_advantages(resp, a, l) for (resp, _, l), a in zip(members, adv)]
        value = grpo_objective(group, per_token)
        expected = []
        for (resp, reward, l), a in zip(members, adv):
            jp, jr = span_objectives(GroupRollouts([reward], [resp]), [a])
            expected.append(l * jp + (1 - l) * jr)
        if lam != SHARE:
            jp, jr = span_objectives(group, adv)
            target = lam * jp + (1 - lam) * jr
        else:
            target = math.fsum(expected) / len(expected)
        objectives.append(value)
        decomp_ok += math.isclose(value, target, rel_tol=DECOMP_REL_TOL, abs_tol=DECOMP_ABS_TOL)

    n = len(losses)
    return {
        "lambda": lam,
        "records": n,
        "skipped": skipped,
        "mean_sft_loss": _mean(losses),
        "mean_standard_loss": _mean(std_losses),
        "sft_identity_holds": sft_ok,
        "rescale_identity_holds": rescale_ok,
        "groups": n_groups,
        "mean_grpo_objective": _mean(objectives),
        "decomposition_holds": decomp_ok,
        "identity_holds": n > 0 and sft_ok == n and rescale_ok == n,
    }


# ---------------------------------------------------------------------------
# diagnose

_BASE_REWARDS = ("outcome", "augmented", "perception_signal")


def _reward_fields(records: Iterable[RolloutRecord]) -> tuple[list[str], list[str]]:
    present, signals = set(), []
    for rec in records:
        if rec.rewards is None:
            continue
        for name in _BASE_REWARDS:
            if getattr(rec.rewards, name) is not None:
                present.add(name)
        for name in rec.rewards.signals:
            if name not in signals:
                signals.append(name)
    return [n for n in _BASE_REWARDS if n in present], sorted(signals)


def diagnose(rollouts, *, identity_lambda: float = 0.5, reward_field: str = "outcome") -> dict:
    """Accuracies, reward coupling, surrogate quality and objective identity checks."""
    rf, path = _load(rollouts)
    scored = [r for r in rf.records if r.metrics is not None]
    errors = [r for r in rf.records if r.error is not None]
    parse_errors = sum(1 for r in scored if r.parsed and r.parsed.get("parse_error"))
    cf = [r.metrics.counterfactual_reasoning for r in scored if r.metrics.counterfactual_reasoning is not None]

    base, signals = _reward_fields(scored)
    coupling = []
    for name in base + [f"signals.{s}" for s in signals]:
        values = [r for r in scored if r.value(name) is not None]
        if len(values) >= 2:
            coupling.append(coupling_diagnostic(values, name).to_dict())
    surrogates = []
    for name in (["perception_signal"] if "perception_signal" in base else []) + [f"signals.{s}" for s in signals]:
        values = [r for r in scored if r.value(name) is not None]
        if len(values) >= 2:
            r = surrogate_quality(values, name)
            surrogates.append({"field": name, "r": r, "sample_count": len(values), "degenerate": r is None})

    share = lambda_row(scored, SHARE, reward_field)
    fixed = lambda_row(scored, identity_lambda, reward_field)
    return {
        "report": "diagnose",
        "source": _source(rf, path),
        "counts": {
            "records": len(rf.records),
            "scored": len(scored),
            "errors": len(errors),
            "parse_errors": parse_errors,
            "malformed": [{"line": ln, "message": msg} for ln, msg in rf.malformed],
        },
        "accuracy": {
            "end_to_end": _percent([r.metrics.end_to_end for r in scored]),
            "perception": _percent([r.metrics.perception for r in scored]),
            "conditional_reasoning": _percent([r.metrics.conditional_reasoning for r in scored]),
            "counterfactual_reasoning": _percent(cf),
            "sample_count": len(scored),
        },
        "coupling": coupling,
        "surrogates": surrogates,
        "objectives": {
            "records_with_tokens": share["records"],
            "sft_identity_holds": share["sft_identity_holds"],
            "rescale_identity_holds": share["rescale_identity_holds"],
            "identity_lambda": identity_lambda,
            "groups_checked": fixed["groups"],
            "decomposition_holds": fixed["decomposition_holds"],
        },
    }


# ---------------------------------------------------------------------------
# sweeps

def alpha_row(records: Sequence[RolloutRecord], alpha: float, signal_field: str = "perception") -> dict:
    """Recompute the augmented reward at ``alpha`` from logged outcome and perception signal."""
    rewards, outcome, signal, kept = [], [], [], []
    for rec in records:
        a, s = rec.value("outcome"), rec.value(signal_field)
        if a is None or s is None:
            continue
        rewards.append(augmented_reward(a, s, alpha))
        outcome.append(float(a))
        signal.append(float(s))
        kept.append(rec)
    if len(kept) < 2:
        raise ParameterError(f"need at least 2 rollouts with outcome and {signal_field!r}")
    a_p = [float(r.value("perception")) for r in kept]
    a_r = [float(r.value("conditional_reasoning")) for r in kept]
    r_p, r_r = pearson(rewards, a_p), pearson(rewards, a_r)
    return {
        "alpha": alpha,
        "n": len(kept),
        "mean_reward": _mean(rewards),
        "mean_outcome": _mean(outcome),
        "mean_signal": _mean(signal),
        "r_reward_perception": r_p,
        "r_reward_reasoning": r_r,
        "degenerate": r_p is None or r_r is None,
    }


def sweep(
    parameter: str,
    values: Sequence[Lambda],
    rollouts,
    *,
    signal_field: str = "perception",
    reward_field: str = "outcome",
) -> dict:
    """One row per value; never calls a policy, everything is recomputed from the log."""
    if not values:
        raise ParameterError("sweep needs at least one value")
    rf, path = _load(rollouts)
    scored = [r for r in rf.records if r.metrics is not None]
    if parameter == "alpha":
        rows = [alpha_row(scored, float(v), signal_field) for v in values]
    elif parameter == "lambda":
        rows = [lambda_row(scored, v if v == SHARE else float(v), reward_field) for v in values]
    else:
        raise ParameterError(f"unknown sweep parameter {parameter!r}")
    return {
        "report": "sweep",
        "parameter": parameter,
        "source": _source(rf, path),
        "malformed": [{"line": ln, "message": msg} for ln, msg in rf.malformed],
        "rows": rows,
    }
