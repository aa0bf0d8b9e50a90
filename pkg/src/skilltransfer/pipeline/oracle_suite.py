"""Tabular oracle checks runnable from the command line.

Each check returns ``(passed, detail)``; :func:`run_suite` collects them in
order so the CLI can print a table.
"""
from __future__ import annotations

import time

import numpy as np

from .. import numkit as nk
from .. import oracle
from ..numkit.gradcheck import max_relative_error, numerical_grad
from ..planner import LinearQ, TabularPolicy, TargetQ, policy_evaluation, soft_update
from ..spectral import OuterProductPair, discovery_loss, feature_loss, tabular_batch
from ..spectral import tabular_matrices


def _random_mdps(seed=0, count=10):
    rng = np.random.default_rng(seed)
    return [oracle.TabularMDP.random(rng, int(rng.integers(2, 9)), int(rng.integers(1, 4)))
            for _ in range(count)], rng


def check_exact_recovery():
    start = time.perf_counter()
    mdps, _ = _random_mdps()
    worst = 0.0
    for mdp in mdps:
        dec = oracle.exact_decomposition(mdp)
        worst = max(worst, oracle.explicit_density_loss(dec.Phi, dec.M.T, mdp))
    elapsed = time.perf_counter() - start
    return worst <= 1e-10 and elapsed < 1.0, f"max loss {worst:.2e}, {elapsed:.3f} s"


def check_linear_q():
    mdps, rng = _random_mdps()
    worst = 0.0
    for mdp in mdps:
        dec = oracle.exact_decomposition(mdp, with_reward=True)
        for _ in range(10):
            pol = oracle.random_policy(rng, mdp)
            q = dec.Phi @ oracle.linear_q_weights(dec, mdp, pol)
            worst = max(worst, np.max(np.abs(q - oracle.exact_policy_q(mdp, pol).reshape(-1))))
    return worst <= 1e-8, f"max |Q error| {worst:.2e}"


def check_surrogate_gradient():
    mdp = oracle.load_fixture("enum_4x2")
    weighting = oracle.state_action_visitation(mdp, np.full((4, 2), 0.5))
    pair = OuterProductPair(4, 2, 3, np.random.default_rng(1), hidden=(6,))
    params = pair.parameters()
    loss = feature_loss(pair, *tabular_batch(mdp, weighting))
    nk.zero_grad(params)
    loss.backward()
    auto = [p.grad.copy() for p in params]

    def explicit():
        phi, mu = tabular_matrices(pair, 4, 2)
        return oracle.explicit_density_loss(phi, mu, mdp, weighting)

    numeric = numerical_grad(explicit, params, eps=1e-6)
    worst = max(max_relative_error(a, b) for a, b in zip(auto, numeric))
    scale = max(float(np.max(np.abs(a))) for a in auto)
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(auto, numeric))
    return worst < 1e-3, f"entrywise relative gap {worst:.2e}, scaled gap {gap / scale:.2e}"


def planted_discovery(penalty, s, steps=3000, lr=0.05, seed=0):
    """Learned residual skills on the planted 8x3 gap by exact enumeration.

    Returns ``(max total variation, max |gram|, sum |gram|)``.
    """
    sim_mdp = oracle.load_fixture("planted_sim_8x3")
    real = oracle.load_fixture("planted_real_8x3")
    n_s, n_a = sim_mdp.num_states, sim_mdp.num_actions
    dec = oracle.exact_decomposition(sim_mdp, 3)
    sim = OuterProductPair.from_matrices(dec.Phi, dec.M.T, n_s, n_a).freeze()
    w = oracle.uniform_weighting(real)
    obs, act, nxt, neg, sw, nw = tabular_batch(real, w)
    res = OuterProductPair(n_s, n_a, s, np.random.default_rng(seed))
    opt = nk.AdamState(lr=lr)
    for k in range(steps):
        opt.lr = lr * 0.5 * (1 + np.cos(np.pi * k / steps))
        loss, _ = discovery_loss(sim, res, obs, act, nxt, neg, penalty, sw, nw)
        nk.zero_grad(res.parameters())
        loss.backward()
        nk.adam_step(res.parameters(), opt)
    phi_s, mu_s = tabular_matrices(sim, n_s, n_a)
    phi_r, mu_r = tabular_matrices(res, n_s, n_a)
    model = phi_s @ mu_s.T + phi_r @ mu_r.T
    tv = 0.5 * np.max(np.sum(np.abs(model - real.P_flat), axis=1))
    g = np.abs(oracle.gram(phi_s, phi_r, w))
    return tv, g.max(), g.sum()


def check_residual_recovery():
    start = time.perf_counter()
    sim = oracle.load_fixture("planted_sim_8x3")
    real = oracle.load_fixture("planted_real_8x3")
    err = oracle.residual_decomposition(real, sim, 1).error
    tv, g_max, _ = planted_discovery(1.0, 1)
    elapsed = time.perf_counter() - start
    ok = err <= 1e-10 and tv <= 1e-2 and g_max <= 1e-2 and elapsed < 300
    return ok, f"SVD error {err:.1e}, TV {tv:.1e}, max |gram| {g_max:.1e}, {elapsed:.1f} s"


def check_penalty_efficacy():
    _, _, free = planted_discovery(0.0, 4, steps=1000)
    _, _, penalized = planted_discovery(1.0, 4, steps=1000)
    return penalized <= 0.1 * free, f"sum |gram| {penalized:.2e} (penalty 1) vs {free:.2e} (0)"


def tabular_td(mdp, policy, tol=1e-7, max_iter=5000):
    """Semi-gradient TD with one-hot features and exact expectations; ``Q`` as ``(S, A)``."""
    n_s, n_a = mdp.num_states, mdp.num_actions
    n = n_s * n_a
    feat = OuterProductPair.from_matrices(np.eye(n), np.zeros((n_s, n)), n_s, n_a).freeze()
    q = LinearQ(feat)
    target = TargetQ(q)
    obs, act, nxt, _, w, _ = tabular_batch(mdp, oracle.uniform_weighting(mdp))
    s, a = obs.argmax(1), act.argmax(1)
    batch = {"obs": obs, "act": act, "next_obs": nxt, "rew": mdp.R[s, a],
             "done": np.zeros(len(s))}
    pol = TabularPolicy(policy)
    for _ in range(max_iter):
        loss = policy_evaluation(q, target, pol, batch, mdp.gamma, sample_weight=w)
        nk.zero_grad(q.parameters())
        loss.backward()
        # uniform weights 1/n: this step is an exact regression onto the current target
        q.w1.data -= 0.5 * n * q.w1.grad
        moved = np.max(np.abs(q.w1.data - target.q.w1.data))
        soft_update(target, q, 1.0)
        if moved < tol:
            break
    return q.w1.data.reshape(n_s, n_a)


def check_td_soundness():
    mdp = oracle.load_fixture("random_5x3")
    policy = oracle.random_policy(np.random.default_rng(0), mdp)
    worst = 0.0
    for gamma in (0.0, 0.5, 0.9):
        mdp.gamma = gamma
        gap = np.max(np.abs(tabular_td(mdp, policy) - oracle.exact_policy_q(mdp, policy)))
        worst = max(worst, gap)
    return worst <= 1e-4, f"max |Q_TD - Q_pi| {worst:.1e}"


CHECKS = (
    ("exact spectral recovery", check_exact_recovery),
    ("linear-Q representation", check_linear_q),
    ("surrogate gradient equivalence", check_surrogate_gradient),
    ("planted residual recovery", check_residual_recovery),
    ("orthogonality penalty", check_penalty_efficacy),
    ("tabular TD soundness", check_td_soundness),
)


def run_suite():
    """``[(name, passed, detail)]`` for every oracle check."""
    return [(name, *fn()) for name, fn in CHECKS]
