"""Whittle indices for restless bandits, indexability checks and policy benchmarks."""

from .core import BanditModel, MultiArmModel, is_restart, load_model, save_model, validate
from .estimators import (MyopicPolicy, OptimalJointPolicy, WhittleIndex, WhittleIndexPolicy,
                         whittle_table)
from .exceptions import (BudgetExceededError, ModelValidationError, NonIndexableError,
                         WhittleLabError)
from .indexability import check_prop_refinements, check_thm1, full_report, verify_nesting
from .mdp import policy_eval, solve_lambda
from .monotone import check_monotone, whittle_threshold
from .restart import compute_whittle_restart, restart_dn
from .simulate import SimConfig, compare_policies, opt_policy, run_mc
from .whittle import (WhittleTable, adaptive_greedy_pcl, check_pcl, compute_whittle,
                      whittle_oracle, whittle_oracle_all)

__version__ = "0.1.0"

__all__ = [
    "BanditModel", "MultiArmModel", "is_restart", "load_model", "save_model", "validate",
    "MyopicPolicy", "OptimalJointPolicy", "WhittleIndex", "WhittleIndexPolicy", "whittle_table",
    "BudgetExceededError", "ModelValidationError", "NonIndexableError", "WhittleLabError",
    "check_prop_refinements", "check_thm1", "full_report", "verify_nesting",
    "policy_eval", "solve_lambda", "check_monotone", "whittle_threshold",
    "compute_whittle_restart", "restart_dn", "SimConfig", "compare_policies", "opt_policy",
    "run_mc", "WhittleTable", "adaptive_greedy_pcl", "check_pcl", "compute_whittle",
    "whittle_oracle", "whittle_oracle_all", "__version__",
]
