"""Rollout log records and the line-delimited rollout file."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..errors import DatasetError
from ..evaluator import MetricRecord
from ..rewards import RewardRecord

_METRIC_ALIASES = {
    "a": "end_to_end",
    "a_p": "perception",
    "a_r_cond": "conditional_reasoning",
    "a_r": "counterfactual_reasoning",
}
_METRICS = ("end_to_end", "perception", "conditional_reasoning", "counterfactual_reasoning")
_REWARDS = ("outcome", "perception_signal", "augmented")


@dataclass
class RolloutRecord:
    task_id: str
    sample_index: int
    seed: int
    policy_tag: str
    raw_output: Optional[str] = None
    parsed: Optional[dict] = None
    metrics: Optional[MetricRecord] = None
    rewards: Optional[RewardRecord] = None
    tokens: Optional[dict] = None
    error: Optional[str] = None

    def value(self, name: str) -> Optional[float]:
        """Look up a metric, reward or named surrogate signal by field name."""
        name = _METRIC_ALIASES.get(name, name)
        if name in _METRICS:
            return None if self.metrics is None else getattr(self.metrics, name)
        if self.rewards is None:
            return None
        if name in _REWARDS:
            return getattr(self.rewards, name)
        name = name.removeprefix("signals.")
        return self.rewards.signals.get(name)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "sample_index": self.sample_index,
            "seed": self.seed,
            "policy_tag": self.policy_tag,
            "raw_output": self.raw_output,
            "parsed": self.parsed,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "rewards": None if self.rewards is None else self.rewards.to_dict(),
            "tokens": self.tokens,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RolloutRecord":
        return cls(
            task_id=str(d["task_id"]),
            sample_index=int(d["sample_index"]),
            seed=int(d["seed"]),
            policy_tag=str(d["policy_tag"]),
            raw_output=d.get("raw_output"),
            parsed=d.get("parsed"),
            metrics=None if d.get("metrics") is None else MetricRecord.from_dict(d["metrics"]),
            rewards=None if d.get("rewards") is None else RewardRecord.from_dict(d["rewards"]),
            tokens=d.get("tokens"),
            error=d.get("error"),
        )


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def file_sha256(path: "str | os.PathLike") -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@dataclass
class RolloutFile:
    header: dict
    records: list[RolloutRecord] = field(default_factory=list)
    malformed: list[tuple[int, str]] = field(default_factory=list)


def read_rollouts(path: "str | os.PathLike", strict: bool = False) -> RolloutFile:
    """Read a rollout file; malformed lines are collected (or raised when strict)."""
    out = RolloutFile(header={})
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if lineno == 1 and isinstance(obj, dict) and "header" in obj:
                    out.header = obj["header"]
                    continue
                out.records.append(RolloutRecord.from_dict(obj))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                if strict:
                    raise DatasetError(str(exc) or type(exc).__name__, line=lineno) from exc
                out.malformed.append((lineno, f"{type(exc).__name__}: {exc}"))
    return out


def write_rollouts(path: "str | os.PathLike", header: dict, records: Iterable[RolloutRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps({"header": header}) + "\n")
        for rec in records:
            f.write(dumps(rec.to_dict()) + "\n")
            n += 1
    return n
