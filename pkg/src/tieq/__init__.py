"""Relaxed equilibria of time-inconsistent Markov decision processes.

Entropy-regularised Gibbs fixed points, annealing of the entropy weight,
and certificates for the unregularised limit, in discrete and continuous time.
"""

from .anneal import Schedule, SolverConfig, Thresholds, certify, extract_support, solve_annealed
from .bridge import convergence_study, discretize
from .catalog import entropy_only, example_ct
from .entropy_gibbs import entropy, gibbs, gibbs_diagnostics, gibbs_policy
from .eval_ct import policy_generator, transition_matrix, value_ct
from .eval_dt import policy_kernel, value_dt
from .fixedpoint import psi, solve_fixed_point, solve_multistart
from .model import (ActionGrid, ModelSpec, RelaxedPolicy, build_action_grid, truncation_horizon,
                    validate_model)
from .verify import (bellman_consistency, brute_force_oracle, deviation_test, mean_action_policy,
                     mean_action_value_check, standard_equilibrium_scan)

__version__ = "0.1.0"

__all__ = [
    "ActionGrid", "ModelSpec", "RelaxedPolicy", "Schedule", "SolverConfig", "Thresholds",
    "bellman_consistency", "brute_force_oracle", "build_action_grid", "certify", "convergence_study",
    "deviation_test", "discretize", "entropy", "entropy_only", "example_ct", "extract_support", "gibbs", "gibbs_diagnostics",
    "gibbs_policy", "mean_action_policy", "mean_action_value_check", "policy_generator",
    "policy_kernel", "psi", "solve_annealed", "solve_fixed_point", "solve_multistart",
    "standard_equilibrium_scan", "transition_matrix", "truncation_horizon", "validate_model",
    "value_ct", "value_dt",
]
