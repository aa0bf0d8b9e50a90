"""Tabular MDPs with known low-rank structure, for recovery tests."""
from __future__ import annotations

import numpy as np

from .decomposition import orthogonal_residual_directions
from .mdp import TabularMDP


def low_rank_mdp(rng, num_states, num_actions, rank, gamma=0.9, concentration=1.0):
    """``P = Phi M`` with ``Phi`` rows on the simplex and ``M`` rows distributions.

    The result has transition rank at most ``rank`` by construction.
    """
    phi = rng.dirichlet(np.ones(rank), size=num_states * num_actions)
    m = rng.dirichlet(np.full(num_states, concentration), size=rank)
    P = (phi @ m).reshape(num_states, num_actions, num_states)
    P /= P.sum(-1, keepdims=True)
    R = rng.uniform(-1, 1, size=(num_states, num_actions))
    return TabularMDP(P, R, gamma, rng.dirichlet(np.ones(num_states)))


def planted_residual(rng, sim: TabularMDP, weighting=None, orthogonal=True, margin=0.5):
    """Real MDP ``P = P_sim + u v^T`` with a rank-1 signed gap.

    ``v`` sums to zero so rows stay normalized; the scale keeps every entry at
    least ``(1 - margin)`` of its simulator value. With ``orthogonal`` the
    left factor ``u`` is made orthogonal (under ``weighting``) to the
    simulator's transition column span, which is what lets a residual model
    with frozen simulator density features recover the gap exactly.

    Returns ``(real, u, v)`` with the scale folded into ``u``.
    """
    n_sa = sim.num_states * sim.num_actions
    w = np.full(n_sa, 1.0 / n_sa) if weighting is None else np.asarray(weighting).reshape(-1)
    u = rng.normal(size=n_sa)
    if orthogonal:
        u = orthogonal_residual_directions(sim.P_flat, u[:, None], w)[:, 0]
    u /= np.max(np.abs(u))
    v = rng.normal(size=sim.num_states)
    v -= v.mean()
    gap = np.outer(u, v)
    # largest scale keeping P_sim + scale * gap >= (1 - margin) P_sim
    neg = gap < 0
    scale = np.min(margin * sim.P_flat[neg] / -gap[neg]) if np.any(neg) else 1.0
    u = u * scale
    P = (sim.P_flat + np.outer(u, v)).reshape(sim.P.shape)
    real = TabularMDP(P, sim.R.copy(), sim.gamma, sim.rho.copy())
    return real, u, v
