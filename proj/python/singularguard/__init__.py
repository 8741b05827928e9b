"""Singularity-aware UR10 kinematics, fuzzy safety assessment and monitoring."""

import os
from pathlib import Path

_data = Path(__file__).with_name("data")
if _data.is_dir():
    os.environ.setdefault("SINGULARGUARD_DATA_DIR", str(_data))

from ._core import (  # noqa: E402
    MAX_REACH,
    IkSolution,
    RuleBaseError,
    SafetyAssessment,
    SingularityMetrics,
    TrainResult,
    assess,
    emergency_decision,
    evaluate,
    forward_kinematics,
    jacobian,
    metrics,
    monitor_event,
    passes_thresholds,
    solve_ik,
    train,
    workspace_scan,
)

__all__ = [
    "MAX_REACH",
    "IkSolution",
    "RuleBaseError",
    "SafetyAssessment",
    "SingularityMetrics",
    "TrainResult",
    "assess",
    "emergency_decision",
    "evaluate",
    "forward_kinematics",
    "jacobian",
    "metrics",
    "monitor_event",
    "passes_thresholds",
    "solve_ik",
    "train",
    "workspace_scan",
]
