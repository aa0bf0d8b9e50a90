"""Exact finite-MDP ground truth: decompositions, explicit losses and values."""
from .decomposition import (ExactDecomposition, bellman_residual, exact_decomposition,
                            exact_policy_q, exact_policy_v, explicit_density_loss, gram,
                            greedy_policy, linear_q_weights, max_entropy_policy,
                            one_hot_decomposition, orthogonal_residual_directions,
                            residual_decomposition, residual_matrix, stacked_model_loss,
                            state_action_visitation, value_iteration)
from .mdp import (ParameterError, TabularMDP, check_policy, fixture_names, load_fixture,
                  random_policy, uniform_weighting)
from .planted import low_rank_mdp, planted_residual
from .svd import jacobi_svd, lstsq, numerical_rank, truncated_svd

__all__ = [
    "ExactDecomposition", "ParameterError", "TabularMDP", "bellman_residual", "check_policy",
    "exact_decomposition", "exact_policy_q", "exact_policy_v", "explicit_density_loss",
    "fixture_names", "gram", "greedy_policy", "jacobi_svd", "linear_q_weights",
    "load_fixture", "low_rank_mdp", "lstsq", "max_entropy_policy", "numerical_rank",
    "one_hot_decomposition", "orthogonal_residual_directions", "planted_residual",
    "random_policy", "residual_decomposition", "residual_matrix", "stacked_model_loss",
    "state_action_visitation", "truncated_svd", "uniform_weighting", "value_iteration",
]
