"""Layered MDPs with dueling feedback.

Errors raised by the C++ core surface as ``ValueError`` (invalid structure,
parameters or config) or ``RuntimeError`` (numerical failure).
"""

from ._pbmdp import (
    LayeredMdp,
    best_fixed_policy,
    block_preference_matrix,
    borda_scores,
    extremal_transition,
    ftrl_update,
    initial_value,
    max_reach,
    occupancy,
    philox4x32,
    random_layered_mdp,
    run_experiment,
    run_experiment_csv,
    slope_fit,
    uniform_layered_mdp,
    validate_config,
    verify,
)

__all__ = [
    "LayeredMdp",
    "best_fixed_policy",
    "block_preference_matrix",
    "borda_scores",
    "extremal_transition",
    "ftrl_update",
    "initial_value",
    "max_reach",
    "occupancy",
    "philox4x32",
    "random_layered_mdp",
    "run_experiment",
    "run_experiment_csv",
    "slope_fit",
    "uniform_layered_mdp",
    "validate_config",
    "verify",
]
