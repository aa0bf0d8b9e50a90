"""Exact spectral decompositions, explicit losses and values on tabular MDPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import ParameterError, TabularMDP, check_policy, uniform_weighting
from .svd import jacobi_svd, lstsq, numerical_rank


@dataclass
class ExactDecomposition:
    """``Phi @ M`` approximates a flattened transition (or residual) matrix.

    ``Phi`` is ``(|S||A|, d)``, ``M`` is ``(d, |S|)``. ``theta_r`` (``(d,)``)
    is present when the reward was factored jointly, so ``Phi @ theta_r = R``.
    ``error`` is the discarded squared singular mass (Frobenius).
    """

    Phi: np.ndarray
    M: np.ndarray
    singular_values: np.ndarray
    error: float
    theta_r: np.ndarray | None = None

    @property
    def rank(self):
        return self.Phi.shape[1]

    def reconstruct(self):
        return self.Phi @ self.M


def _factor(mat, d):
    u, s, vt = jacobi_svd(mat)
    if d is None:
        d = numerical_rank(s, mat.shape)
    d = min(int(d), s.size)
    return u[:, :d] * s[:d], vt[:d], s, float(np.sum(s[d:] ** 2))


def exact_decomposition(mdp: TabularMDP, d=None, with_reward=False):
    """Best rank-``d`` factorization of the flattened ``P`` by truncated SVD.

    ``d=None`` uses the numerical rank (exact reconstruction). With
    ``with_reward`` the matrix ``[P | R]`` is factored instead, which yields
    ``theta_r`` and makes the linear-Q identity exact at full rank.
    """
    if with_reward:
        phi, right, s, err = _factor(np.column_stack([mdp.P_flat, mdp.R_flat]), d)
        return ExactDecomposition(phi, right[:, :-1], s, err, right[:, -1])
    phi, m, s, err = _factor(mdp.P_flat, d)
    return ExactDecomposition(phi, m, s, err)


def one_hot_decomposition(mdp: TabularMDP):
    """``Phi = I``, ``M = P`` rows, ``theta_r = R``: the trivial exact construction."""
    n = mdp.num_states * mdp.num_actions
    return ExactDecomposition(np.eye(n), mdp.P_flat.copy(), np.array([]), 0.0, mdp.R_flat.copy())


def explicit_density_loss(phi, mu, mdp: TabularMDP, weighting=None):
    """Weighted squared error ``sum_sa w(s,a) sum_s' (P(s'|s,a) - phi(s,a) . mu(s'))^2``.

    ``phi`` is ``(|S||A|, d)`` (or ``(|S|, |A|, d)``) and ``mu`` is ``(|S|, d)``.
    ``weighting`` defaults to uniform over state-action pairs.
    """
    w = uniform_weighting(mdp) if weighting is None else np.asarray(weighting, dtype=float)
    phi = np.asarray(phi, dtype=float).reshape(mdp.num_states * mdp.num_actions, -1)
    model = phi @ np.asarray(mu, dtype=float).T
    return float(np.sum(w.reshape(-1) * np.sum((mdp.P_flat - model) ** 2, axis=1)))


def residual_matrix(real: TabularMDP, sim: TabularMDP):
    if real.P.shape != sim.P.shape:
        raise ParameterError("real and simulator MDPs must share state/action spaces")
    return real.P_flat - sim.P_flat


def residual_decomposition(real: TabularMDP, sim: TabularMDP, s):
    """Best rank-``s`` SVD factorization of the signed residual ``P - P_sim``."""
    phi, m, sv, err = _factor(residual_matrix(real, sim), s)
    return ExactDecomposition(phi, m, sv, err)


def _weighted_fit(features, target, weights):
    sw = np.sqrt(np.asarray(weights, dtype=float).reshape(-1))[:, None]
    return lstsq(sw * features, sw * target)


def stacked_model_loss(sim_phi, extra_phi, real: TabularMDP, weighting=None):
    """Explicit loss of the best model on features ``[sim_phi | extra_phi]``.

    The right factors are fitted jointly by weighted least squares, so the
    value depends only on the span of the stacked features.
    """
    w = uniform_weighting(real) if weighting is None else np.asarray(weighting, dtype=float)
    feats = np.column_stack([sim_phi, extra_phi])
    m = _weighted_fit(feats, real.P_flat, w)
    return explicit_density_loss(feats, m.T, real, w)


def orthogonal_residual_directions(sim_phi, residual_phi, weighting):
    """Residual left factors projected orthogonal (under ``weighting``) to ``span(sim_phi)``."""
    w = np.asarray(weighting, dtype=float).reshape(-1)
    coef = _weighted_fit(sim_phi, residual_phi, w)
    return residual_phi - sim_phi @ coef


def gram(phi_a, phi_b, weighting):
    """``E_w[phi_a phi_b^T]`` over state-action pairs."""
    w = np.asarray(weighting, dtype=float).reshape(-1)
    return (phi_a * w[:, None]).T @ phi_b


def value_iteration(mdp: TabularMDP, tol=1e-10, max_iter=100_000):
    """Optimal ``Q*`` with sup-norm Bellman residual at most ``tol``."""
    if mdp.gamma >= 1:
        raise ParameterError("value iteration needs gamma < 1")
    q = np.zeros_like(mdp.R)
    for _ in range(max_iter):
        nxt = mdp.R + mdp.gamma * mdp.P @ q.max(axis=1)
        if np.max(np.abs(nxt - q)) <= tol * (1 - mdp.gamma) / 2:
            return nxt
        q = nxt
    raise RuntimeError("value iteration did not converge")


def bellman_residual(mdp: TabularMDP, q):
    return float(np.max(np.abs(mdp.R + mdp.gamma * mdp.P @ q.max(axis=1) - q)))


def exact_policy_q(mdp: TabularMDP, policy):
    """Solve ``Q = R + gamma P Pi Q`` as one ``|S||A|`` linear system."""
    policy = check_policy(mdp, policy)
    if mdp.gamma >= 1:
        raise ParameterError("policy evaluation system is singular at gamma = 1")
    n_s, n_a = mdp.num_states, mdp.num_actions
    # Pi maps Q (|S||A|) to V (|S|): V(s') = sum_a' pi(a'|s') Q(s', a')
    pi_mat = np.zeros((n_s, n_s * n_a))
    for s in range(n_s):
        pi_mat[s, s * n_a:(s + 1) * n_a] = policy[s]
    system = np.eye(n_s * n_a) - mdp.gamma * mdp.P_flat @ pi_mat
    return np.linalg.solve(system, mdp.R_flat).reshape(n_s, n_a)


def exact_policy_v(mdp: TabularMDP, policy):
    """Solve the ``|S|`` system ``V = r_pi + gamma P_pi V``."""
    policy = check_policy(mdp, policy)
    if mdp.gamma >= 1:
        raise ParameterError("policy evaluation system is singular at gamma = 1")
    p_pi = np.einsum("sa,sat->st", policy, mdp.P)
    r_pi = np.sum(policy * mdp.R, axis=1)
    return np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * p_pi, r_pi)


def linear_q_weights(decomp: ExactDecomposition, mdp: TabularMDP, policy):
    """``w = theta_r + gamma M V^pi`` so that ``Q^pi = Phi w``."""
    if decomp.theta_r is None:
        raise ParameterError("decomposition carries no reward factor; use with_reward=True")
    return decomp.theta_r + mdp.gamma * decomp.M @ exact_policy_v(mdp, policy)


def greedy_policy(q):
    pol = np.zeros_like(q)
    pol[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return pol


def max_entropy_policy(q, tau):
    """Row-wise ``softmax(q / tau)``."""
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    z = (np.asarray(q, dtype=float) - np.max(q, axis=-1, keepdims=True)) / tau
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def state_action_visitation(mdp: TabularMDP, policy):
    """Normalized discounted visitation ``d(s, a)`` starting from ``rho``."""
    policy = check_policy(mdp, policy)
    p_pi = np.einsum("sa,sat->st", policy, mdp.P)
    d_s = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * p_pi.T, (1 - mdp.gamma) * mdp.rho)
    return d_s[:, None] * policy
