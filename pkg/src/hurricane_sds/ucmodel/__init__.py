"""Two-stage stochastic unit commitment with scenario line outages."""

from .backends import BACKENDS, Backend, HighsFileBackend, OracleBackend, ScipyBackend, get_backend
from .build import UcInstance, build_suc, expected_counts
from .lp import LinearModel, read_mps
from .oracle import brute_force
from .solve import (
    COST_KEYS,
    CommitmentPlan,
    DispatchResult,
    SolveResult,
    dispatch_fixed,
    evaluate_plan,
    severity,
    solve,
    solve_instance,
)

__all__ = [
    "BACKENDS",
    "Backend",
    "COST_KEYS",
    "CommitmentPlan",
    "DispatchResult",
    "HighsFileBackend",
    "LinearModel",
    "OracleBackend",
    "ScipyBackend",
    "SolveResult",
    "UcInstance",
    "brute_force",
    "build_suc",
    "dispatch_fixed",
    "evaluate_plan",
    "expected_counts",
    "get_backend",
    "read_mps",
    "severity",
    "solve",
    "solve_instance",
]
