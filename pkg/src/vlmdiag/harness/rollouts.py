"""Rollout execution: sampling, scoring, reward computation and the counterfactual protocol."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Mapping, Optional, Sequence

from ..errors import ParseError, PerceptionParseError, PolicyError, RewardError
from ..evaluator import accuracy, extract_answer, parse_output, parse_perception, scan_blocks, score
from ..rewards import (
    RewardConfig,
    RewardRecord,
    augmented_reward,
    outcome_reward,
    self_reward,
    similarity_reward,
    teacher_reward,
)
from ..seeding import derive_seed
from ..taskgen.instances import TaskInstance
from .records import RolloutRecord, config_hash, write_rollouts

log = logging.getLogger(__name__)

DEFAULT_RETRIES = 2

# (instance, parsed perception or exception, perception text, seed) -> value or None
SignalFn = Callable[[TaskInstance, object, Optional[str], int], Optional[float]]


def teacher_signal(teacher) -> SignalFn:
    """Teacher agreement as an extra logged signal; teacher failures log None."""

    def fn(instance, perception, perception_text, seed):
        try:
            return float(teacher_reward(teacher, instance, perception, seed))
        except RewardError:
            return None

    return fn


def constant_signal(value: float) -> SignalFn:
    return lambda instance, perception, perception_text, seed: float(value)


def prompt_parts(instance: TaskInstance, include_image: bool = True) -> list[dict]:
    parts = [{"kind": "text", "data": instance.prompt_text}]
    if include_image:
        parts.insert(0, {"kind": "image", "data": instance.image_document})
    return parts


def _generate(policy, parts, prefix, seed, retries) -> tuple[Optional[str], Optional[str]]:
    last: Optional[Exception] = None
    for attempt in range(retries + 1):
        try:
            return policy.generate(parts, prefix, seed), None
        except PolicyError as exc:
            last = exc
            log.warning("policy call failed (attempt %d/%d): %s", attempt + 1, retries + 1, exc)
    return None, f"{type(last).__name__}: {last}"


def _parsed_summary(raw: str, task_kind) -> dict:
    perception, reasoning, answer = scan_blocks(raw)
    error = None
    try:
        if parse_output(raw, task_kind).answer is None:
            error = "answer unparseable"
    except ParseError as exc:
        error = str(exc)
    return {"perception_text": perception, "reasoning_text": reasoning, "answer": answer, "parse_error": error}


def _perception_or_error(text: Optional[str], kind):
    if text is None:
        return None
    try:
        return parse_perception(text, kind)
    except PerceptionParseError as exc:
        return exc


def _order_map(fn, jobs: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))  # map() yields in submission order


def _header(kind: str, policy, seed: int, dataset_path, config: dict) -> dict:
    config = dict(config, kind=kind, policy_tag=policy.tag, seed=seed)
    return {
        "kind": kind,
        "config_hash": config_hash(config),
        "seed": seed,
        "dataset_path": None if dataset_path is None else os.fspath(dataset_path),
        "policy_tag": policy.tag,
        "config": config,
    }


def run_rollouts(
    policy,
    dataset: Sequence[TaskInstance],
    samples_per_instance: int = 1,
    reward_config: RewardConfig = RewardConfig(),
    seed: int = 0,
    out: "str | os.PathLike | None" = None,
    *,
    teacher=None,
    embedder=None,
    signals: Optional[Mapping[str, SignalFn]] = None,
    retries: int = DEFAULT_RETRIES,
    workers: int = 1,
    log_tokens: bool = True,
    dataset_path: "str | os.PathLike | None" = None,
) -> list[RolloutRecord]:
    """Sample every instance ``samples_per_instance`` times, score, and reward.

    Sample j of instance i uses seed derive_seed(seed, i, j). Records come back
    (and are written) in (instance, sample) order whatever ``workers`` is.
    """
    if samples_per_instance < 1:
        raise ValueError("samples_per_instance must be >= 1")
    if reward_config.surrogate == "teacher" and teacher is None:
        raise ValueError("teacher surrogate requires a teacher client")
    if reward_config.surrogate == "similarity" and embedder is None:
        raise ValueError("similarity surrogate requires an embedder")
    signals = dict(signals or {})
    tokens_fn = getattr(policy, "token_scalars", None) if log_tokens else None

    def one(job) -> RolloutRecord:
        i, j = job
        inst = dataset[i]
        s = derive_seed(seed, i, j)
        raw, error = _generate(policy, prompt_parts(inst), None, s, retries)
        rec = RolloutRecord(task_id=inst.id, sample_index=j, seed=s, policy_tag=policy.tag)
        if raw is None:
            rec.error = error
            return rec
        rec.raw_output = raw
        rec.parsed = _parsed_summary(raw, inst.task_kind)
        rec.metrics = score(raw, inst)
        rec.rewards = _rewards(inst, rec, reward_config, s, policy, teacher, embedder, signals)
        if tokens_fn is not None:
            rec.tokens = tokens_fn(raw, s)
        return rec

    jobs = [(i, j) for i in range(len(dataset)) for j in range(samples_per_instance)]
    records = list(_order_map(one, jobs, workers))
    if out is not None:
        config = {
            "samples_per_instance": samples_per_instance,
            "reward": reward_config.to_dict(),
            "signals": sorted(signals),
            "instances": len(dataset),
            "log_tokens": tokens_fn is not None,
        }
        write_rollouts(out, _header("rollouts", policy, seed, dataset_path, config), records)
    return records


def _rewards(inst, rec, cfg: RewardConfig, seed, policy, teacher, embedder, signals) -> RewardRecord:
    a = outcome_reward(rec.metrics)
    text = rec.parsed["perception_text"]
    perception = _perception_or_error(text, inst.task_kind)
    signal: Optional[float]
    try:
        if cfg.surrogate == "none":
            signal = float(rec.metrics.perception)
        elif cfg.surrogate == "similarity":
            signal = similarity_reward(embedder, inst, text or "").value
        elif cfg.surrogate == "self":
            signal = self_reward(policy, text or "", inst, cfg.n, derive_seed(seed, 0x5E1F))
        else:
            signal = float(teacher_reward(teacher, inst, perception, seed))
    except (RewardError, PolicyError) as exc:
        rec.parsed["reward_error"] = str(exc)
        signal = 0.0 if cfg.teacher_failure == "zero" else None
    extra = {name: fn(inst, perception, text, seed) for name, fn in signals.items()}
    augmented = None if signal is None else augmented_reward(a, signal, cfg.alpha)
    return RewardRecord(a, signal, augmented, extra)


def counterfactual_eval(
    policy,
    dataset: Sequence[TaskInstance],
    samples_per_instance: int = 1,
    seed: int = 0,
    out: "str | os.PathLike | None" = None,
    *,
    include_image: bool = True,
    retries: int = DEFAULT_RETRIES,
    workers: int = 1,
    dataset_path: "str | os.PathLike | None" = None,
) -> list[RolloutRecord]:
    """Prefill the true transcription and score the continuation against it.

    Uses the same per-sample seeds as run_rollouts, so a simulated policy
    draws the same random numbers in both passes.
    """
    if samples_per_instance < 1:
        raise ValueError("samples_per_instance must be >= 1")

    def one(job) -> RolloutRecord:
        i, j = job
        inst = dataset[i]
        s = derive_seed(seed, i, j)
        prefix = f"<perception>{inst.canonical_perception.serialize()}</perception>"
        raw, error = _generate(policy, prompt_parts(inst, include_image), prefix, s, retries)
        rec = RolloutRecord(task_id=inst.id, sample_index=j, seed=s, policy_tag=policy.tag)
        if raw is None:
            rec.error = error
            return rec
        if not raw.startswith(prefix):
            rec.error = "ContractViolation: response does not start with the requested prefix"
            return rec
        rec.raw_output = raw
        rec.parsed = _parsed_summary(raw, inst.task_kind)
        a_r = accuracy(extract_answer(raw[len(prefix):], inst.task_kind), inst.canonical_perception, inst.node_count)
        m = score(raw, inst)
        rec.metrics = type(m)(m.end_to_end, m.perception, m.conditional_reasoning, a_r)
        return rec

    jobs = [(i, j) for i in range(len(dataset)) for j in range(samples_per_instance)]
    records = list(_order_map(one, jobs, workers))
    if out is not None:
        config = {"samples_per_instance": samples_per_instance, "include_image": include_image, "instances": len(dataset)}
        write_rollouts(out, _header("counterfactual", policy, seed, dataset_path, config), records)
    return records
