"""Line-delimited JSON persistence for task instances."""

from __future__ import annotations

import json
import os
from typing import Iterable

from ..errors import DatasetError, DiagnosticError
from .graphs import GraphInstance
from .instances import TaskInstance, canonical_of
from .perception import TaskKind
from .sudoku import SudokuInstance

_FIELDS = ("id", "task_kind", "prompt_text", "image", "canonical_perception", "payload", "seed")


def instance_to_record(inst: TaskInstance) -> dict:
    return {
        "id": inst.id,
        "task_kind": inst.task_kind.value,
        "prompt_text": inst.prompt_text,
        "image": inst.image_document,
        "canonical_perception": inst.canonical_perception.serialize(),
        "payload": inst.payload.to_dict(),
        "seed": inst.payload.seed,
    }


def instance_from_record(rec: dict) -> TaskInstance:
    missing = [f for f in _FIELDS if f not in rec]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    kind = TaskKind.parse(rec["task_kind"])
    cls = GraphInstance if kind is TaskKind.GC else SudokuInstance
    payload = cls.from_dict(rec["payload"])
    canonical = canonical_of(payload)
    if canonical.serialize() != rec["canonical_perception"]:
        raise ValueError("canonical_perception does not match payload")
    if int(rec["seed"]) != payload.seed:
        raise ValueError("seed does not match payload")
    return TaskInstance(
        id=str(rec["id"]),
        task_kind=kind,
        prompt_text=rec["prompt_text"],
        image_document=rec["image"],
        canonical_perception=canonical,
        payload=payload,
    )


def write_dataset(instances: Iterable[TaskInstance], path: "str | os.PathLike") -> int:
    count = 0
    seen = set()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for inst in instances:
            if inst.id in seen:
                raise DatasetError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            f.write(json.dumps(instance_to_record(inst), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_dataset(path: "str | os.PathLike") -> list[TaskInstance]:
    out = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                inst = instance_from_record(json.loads(line))
            except (ValueError, KeyError, TypeError, DiagnosticError) as exc:
                raise DatasetError(str(exc), line=lineno) from exc
            if inst.id in seen:
                raise DatasetError(f"duplicate instance id {inst.id!r}", line=lineno)
            seen.add(inst.id)
            out.append(inst)
    return out
