"""Command line entry point: generate, rollout, counterfactual, diagnose, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import DiagnosticError
from .harness.diagnostics import SHARE, diagnose, sweep
from .harness.policy import SimulatedPolicy
from .harness.report import format_report, validate_report
from .harness.rollouts import constant_signal, counterfactual_eval, run_rollouts, teacher_signal
from .harness.wire import ExternalPolicyClient, WireTeacher
from .rewards import NoisyTeacher, OracleTeacher, RewardConfig, StubEmbedder
from .taskgen import TaskKind, generate_tasks, read_dataset, write_dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message)


def _fail(kind: str, message: str, code: int = 2):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def _node_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    return (int(lo), int(hi)) if sep else (int(lo), int(lo))


def _teacher(spec: str):
    if spec == "oracle":
        return OracleTeacher()
    if spec.startswith("noisy:"):
        return NoisyTeacher(float(spec.split(":", 1)[1]))
    return WireTeacher(spec)


def _signal(spec: str):
    name, _, body = spec.partition("=")
    if not body:
        raise DiagnosticError(f"signal must look like NAME=SPEC, got {spec!r}")
    if body.startswith("constant:"):
        return name, constant_signal(float(body.split(":", 1)[1]))
    return name, teacher_signal(_teacher(body))


def _policy(args):
    if args.policy == "sim":
        return SimulatedPolicy(args.qp, args.qr, args.qrt, seed=args.policy_seed)
    if not args.endpoint:
        raise DiagnosticError("--policy endpoint needs --endpoint")
    return ExternalPolicyClient(args.endpoint, timeout=args.timeout, retries=args.retries)


def _datasets(paths):
    instances = []
    for p in paths:
        instances.extend(read_dataset(p))
    return instances, ",".join(paths)


def _write_json(path: str, obj: dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def cmd_generate(args):
    kind = TaskKind.parse(args.task)
    tasks = generate_tasks(
        kind, args.count, args.seed,
        nodes=_node_range(args.nodes), edge_probability=args.edge_prob,
        givens=args.givens, unique=args.unique,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{kind.value.lower()}.jsonl"
    n = write_dataset(tasks, path)
    print(json.dumps({"path": str(path), "count": n}))


def cmd_rollout(args):
    instances, dataset_path = _datasets(args.dataset)
    policy = _policy(args)
    cfg = RewardConfig.parse(args.alpha, args.surrogate, teacher_failure=args.teacher_failure)
    signals = dict(_signal(s) for s in args.signal)
    records = run_rollouts(
        policy, instances, args.samples, cfg, args.seed, args.out,
        teacher=_teacher(args.teacher), embedder=StubEmbedder(), signals=signals,
        retries=args.retries, workers=args.workers, log_tokens=not args.no_tokens,
        dataset_path=dataset_path,
    )
    print(json.dumps({"path": args.out, "records": len(records), "errors": sum(r.error is not None for r in records)}))


def cmd_counterfactual(args):
    instances, dataset_path = _datasets(args.dataset)
    records = counterfactual_eval(
        _policy(args), instances, args.samples, args.seed, args.out,
        include_image=not args.text_only, retries=args.retries, workers=args.workers,
        dataset_path=dataset_path,
    )
    print(json.dumps({"path": args.out, "records": len(records), "errors": sum(r.error is not None for r in records)}))


def cmd_diagnose(args):
    report = diagnose(args.rollouts, identity_lambda=args.identity_lambda)
    validate_report(report)
    _write_json(args.out, report)
    print(format_report(report))


def cmd_sweep(args):
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    values = [v if v == SHARE else float(v) for v in values]
    report = sweep(args.param, values, args.rollouts, signal_field=args.signal_field)
    validate_report(report)
    _write_json(args.out, report)
    print(format_report(report))


def _policy_args(p):
    p.add_argument("--dataset", action="append", required=True, help="dataset file; repeatable")
    p.add_argument("--policy", choices=["sim", "endpoint"], default="sim")
    p.add_argument("--endpoint", help="tcp://host:port or cmd:<command>")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--qp", type=float, default=0.5, help="simulated perception success probability")
    p.add_argument("--qr", type=float, default=0.5, help="simulated reasoning success probability")
    p.add_argument("--qrt", type=float, default=None, help="simulated text-conditioned reasoning probability")
    p.add_argument("--policy-seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vlmdiag", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a task dataset")
    g.add_argument("--task", choices=["gc", "sudoku"], required=True)
    g.add_argument("--count", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--nodes", default="7..9", help="node count range, e.g. 7..9")
    g.add_argument("--edge-prob", type=float, default=0.4)
    g.add_argument("--givens", type=int, default=30)
    g.add_argument("--unique", action="store_true")
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("rollout", help="sample, score and reward rollouts")
    _policy_args(r)
    r.add_argument("--alpha", type=float, default=0.0)
    r.add_argument("--surrogate", default="none", help="none | similarity | self:N | teacher")
    r.add_argument("--teacher", default="oracle", help="oracle | noisy:Q | tcp://host:port")
    r.add_argument("--teacher-failure", choices=["skip", "zero"], default="skip")
    r.add_argument("--signal", action="append", default=[], help="extra logged signal NAME=oracle|noisy:Q|constant:V|ENDPOINT")
    r.add_argument("--no-tokens", action="store_true", help="do not log token scalars")
    r.set_defaults(fn=cmd_rollout)

    c = sub.add_parser("counterfactual", help="counterfactual reasoning accuracy with prefilled true perception")
    _policy_args(c)
    c.add_argument("--text-only", action="store_true", help="omit the image when prefilling")
    c.set_defaults(fn=cmd_counterfactual)

    d = sub.add_parser("diagnose", help="summarize a rollout file")
    d.add_argument("--rollouts", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--identity-lambda", type=float, default=0.5)
    d.set_defaults(fn=cmd_diagnose)

    s = sub.add_parser("sweep", help="recompute rewards or objectives over a parameter grid")
    s.add_argument("--param", choices=["alpha", "lambda"], required=True)
    s.add_argument("--values", required=True, help=f"comma separated; lambda also accepts '{SHARE}'")
    s.add_argument("--rollouts", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--signal-field", default="perception")
    s.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except (DiagnosticError, OSError, ValueError) as exc:
        _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
