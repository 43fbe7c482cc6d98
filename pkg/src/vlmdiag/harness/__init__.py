"""Rollout orchestration, counterfactual inference, diagnostics and transport."""

from .diagnostics import SHARE, diagnose, lambda_row, sweep
from .policy import Policy, SimulatedPolicy
from .records import RolloutRecord, read_rollouts, write_rollouts
from .rollouts import constant_signal, counterfactual_eval, run_rollouts, teacher_signal
from .wire import ExternalPolicyClient, WireTeacher, external_policy_client, serve

__all__ = [
    "ExternalPolicyClient", "Policy", "RolloutRecord", "SHARE", "SimulatedPolicy", "WireTeacher",
    "constant_signal", "counterfactual_eval", "diagnose", "external_policy_client", "lambda_row",
    "read_rollouts", "run_rollouts", "serve", "sweep", "teacher_signal", "write_rollouts",
]
