import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ConstantQ, QuadraticQ, contexts, make_actor
from skilltransfer import numkit as nk
from skilltransfer import oracle
from skilltransfer.numkit.gradcheck import max_relative_error, numerical_grad
from skilltransfer.pipeline.oracle_suite import tabular_td
from skilltransfer.planner import (LinearQ, LinearQRegressor, TabularPolicy, TargetQ, ascend, max_entropy_policy,
                                   policy_evaluation, policy_improvement, policy_improvement_kl,
                                   soft_update)
from skilltransfer.spectral import FeaturePair, OuterProductPair, tabular_batch


# ----------------------------------------------------------------------
# policy evaluation


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.9])
def test_tabular_td_matches_exact_evaluation(gamma):
    mdp = oracle.load_fixture("random_5x3")
    mdp.gamma = gamma
    policy = oracle.random_policy(np.random.default_rng(0), mdp)
    np.testing.assert_allclose(tabular_td(mdp, policy), oracle.exact_policy_q(mdp, policy),
                               atol=1e-4)


def _linear_problem(seed=0, n=40):
    rng = np.random.default_rng(seed)
    feat = FeaturePair(3, 2, 5, rng, hidden=(8,)).freeze()
    batch = {"obs": rng.normal(size=(n, 3)), "act": rng.normal(size=(n, 2)),
             "next_obs": rng.normal(size=(n, 3)), "rew": rng.normal(size=n),
             "done": np.zeros(n)}
    return feat, batch


def test_gamma_zero_is_least_squares():
    feat, batch = _linear_problem()
    q = LinearQ(feat)
    target = TargetQ(q)
    pol = TabularPolicy(np.ones((3, 2)) / 2)  # never consulted beyond the zero-weighted target
    batch["next_obs"] = np.eye(3)[np.zeros(40, dtype=int)]
    opt = nk.AdamState(lr=0.05)
    for k in range(4000):
        opt.lr = 0.05 * 0.5 * (1 + math.cos(math.pi * k / 4000))
        loss = policy_evaluation(q, target, pol, batch, 0.0)
        nk.zero_grad(q.parameters())
        loss.backward()
        nk.adam_step(q.parameters(), opt)
    phi = feat.phi(batch["obs"], batch["act"], differentiable=False)
    want = np.linalg.solve(phi.T @ phi, phi.T @ batch["rew"])
    np.testing.assert_allclose(q.w1.data, want, atol=1e-5)


def test_zero_rewards_zero_weights_fixed_point():
    feat, batch = _linear_problem()
    batch["rew"] = np.zeros(40)
    res = FeaturePair(3, 2, 2, np.random.default_rng(3), hidden=(8,)).freeze()
    q = LinearQ(feat, res)
    actor = TabularPolicy(np.ones((3, 2)) / 2)
    batch["next_obs"] = np.eye(3)[np.arange(40) % 3]
    loss = policy_evaluation(q, TargetQ(q), actor, batch, 0.9)
    nk.zero_grad(q.parameters())
    loss.backward()
    assert float(loss.data) == 0.0
    assert all(not np.any(p.grad) for p in q.parameters())


def test_policy_evaluation_leaves_features_untouched():
    feat, batch = _linear_problem()
    before = [p.data.copy() for p in feat.parameters()]
    q = LinearQ(feat)
    pol = TabularPolicy(np.ones((3, 2)) / 2)
    batch["next_obs"] = np.eye(3)[np.arange(40) % 3]
    opt = nk.AdamState(lr=0.1)
    for _ in range(10):
        loss = policy_evaluation(q, TargetQ(q), pol, batch, 0.5)
        nk.zero_grad(q.parameters())
        loss.backward()
        nk.adam_step(q.parameters(), opt)
    assert all(np.array_equal(a, p.data) for a, p in zip(before, feat.parameters()))


def test_linear_q_without_residual_rejects_w2():
    feat, _ = _linear_problem()
    with pytest.raises(ValueError):
        LinearQ(feat, None, w2=np.zeros(2))


# ----------------------------------------------------------------------
# soft update


def _scalar_q(value):
    feat = OuterProductPair.from_matrices(np.eye(1), np.zeros((1, 1)), 1, 1)
    return LinearQ(feat, w1=np.array([value]))


def test_soft_update_rates():
    live, tgt = _scalar_q(4.0), TargetQ(_scalar_q(0.0))
    soft_update(tgt, live, 0.0)
    assert tgt.q.w1.data[0] == 0.0
    soft_update(tgt, live, 0.5)
    soft_update(tgt, live, 0.5)
    assert tgt.q.w1.data[0] == 3.0
    soft_update(tgt, live, 1.0)
    assert tgt.q.w1.data[0] == 4.0


def test_soft_update_rejects_bad_rate():
    with pytest.raises(ValueError):
        soft_update(TargetQ(_scalar_q(0.0)), _scalar_q(1.0), 1.5)


# ----------------------------------------------------------------------
# max-entropy policy


def test_softmax_constant_is_uniform():
    np.testing.assert_allclose(max_entropy_policy(np.full(5, 2.0), 0.3), np.full(5, 0.2))


def test_softmax_two_actions_closed_form():
    e = math.e
    np.testing.assert_allclose(max_entropy_policy([1.0, 0.0], 1.0), [e / (1 + e), 1 / (1 + e)])


def test_softmax_low_temperature_is_greedy():
    np.testing.assert_allclose(max_entropy_policy([0.3, 0.9, 0.1], 1e-6), [0, 1, 0], atol=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.floats(-1e3, 1e3),
       st.floats(0.01, 10))
def test_softmax_shift_invariance(q, c, tau):
    q = np.asarray(q)
    np.testing.assert_allclose(max_entropy_policy(q + c, tau), max_entropy_policy(q, tau),
                               atol=1e-10)


def test_softmax_maximizes_entropy_regularized_value():
    rng = np.random.default_rng(0)
    q, tau = rng.normal(size=4), 0.7
    best = max_entropy_policy(q, tau)

    def objective(p):
        return p @ q - tau * np.sum(p * np.log(p))

    for _ in range(200):
        p = rng.dirichlet(np.ones(4))
        assert objective(p) <= objective(best) + 1e-12


def test_softmax_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        max_entropy_policy([1.0], 0.0)


# ----------------------------------------------------------------------
# policy improvement


def test_constant_q_only_entropy_moves_the_actor():
    actor = make_actor()
    rng = np.random.default_rng(1)
    ctx, obs = contexts(rng, 8)
    noise = rng.standard_normal((8, 4))
    obj = policy_improvement(actor, ConstantQ(), obs, ctx, noise, 0.0)
    nk.zero_grad(actor.parameters())
    obj.backward()
    assert all(not np.any(p.grad) for p in actor.parameters())
    obj = policy_improvement(actor, ConstantQ(), obs, ctx, noise, 0.05)
    nk.zero_grad(actor.parameters())
    obj.backward()
    # the log-std bias gradient points toward wider exploration
    assert np.all(actor.log_std_head.biases[-1].grad > 0)
    assert np.max(np.abs(actor.gains.theta.grad)) < 1e-2 * np.max(
        np.abs(actor.log_std_head.biases[-1].grad))


def test_improvement_gradient_matches_finite_differences():
    actor = make_actor()
    rng = np.random.default_rng(2)
    ctx, obs = contexts(rng, 6, spread=0.1)
    noise = rng.standard_normal((6, 4))
    feat = FeaturePair(obs.shape[1], 4, 5, rng, hidden=(16,)).freeze()
    q = LinearQ(feat, w1=rng.normal(size=5))
    params = actor.parameters()

    def f():
        return float(nk.value(policy_improvement(actor, q, obs, ctx, noise, 0.05)))

    obj = policy_improvement(actor, q, obs, ctx, noise, 0.05)
    nk.zero_grad(params)
    obj.backward()
    auto = [p.grad.copy() for p in params]
    # the objective sums many rows, so a wider step keeps round-off below the floor
    numeric = numerical_grad(f, params, eps=1e-4)
    for a, b in zip(auto, numeric):
        assert max_relative_error(a, b) < 1e-3


@pytest.mark.slow
def test_bandit_gains_converge_to_optimum():
    rng = np.random.default_rng(0)
    ctx, obs = contexts(rng, 16, spread=0.1)
    teacher = make_actor()
    teacher.gains.theta.data += 0.3 * rng.normal(size=24)
    target = np.asarray(teacher.deterministic(ctx))
    actor = make_actor()
    q = QuadraticQ(target)
    steps, lr = 1500, 3e-2
    opt = nk.AdamState(lr=lr)
    for k in range(steps):
        opt.lr = lr * 0.5 * (1 + math.cos(math.pi * k / steps))
        obj = policy_improvement(actor, q, obs, ctx, rng.standard_normal((16, 4)), 0.0)
        ascend(obj, actor.gains.parameters(), opt)
    assert np.max(np.abs(actor.deterministic(ctx) - target)) <= 1e-2


# ----------------------------------------------------------------------
# KL-anchored improvement


def _anchored_problem(seed=0):
    rng = np.random.default_rng(seed)
    ctx, obs = contexts(rng, 16, spread=0.1)
    teacher = make_actor()
    teacher.gains.theta.data += 0.3 * rng.normal(size=24)
    return ctx, obs, QuadraticQ(np.asarray(teacher.deterministic(ctx)))


def test_kl_zero_at_anchor():
    ctx, obs, q = _anchored_problem()
    actor = make_actor()
    noise = np.random.default_rng(1).standard_normal((16, 4))
    obj, kl = policy_improvement_kl(actor, actor.copy(), q, obs, ctx, noise, 5.0)
    assert kl == 0.0
    plain = policy_improvement(actor, q, obs, ctx, noise, 0.0)
    assert float(obj.data) == float(plain.data)


def test_kl_weight_zero_is_q_term():
    ctx, obs, q = _anchored_problem()
    actor = make_actor()
    anchor = make_actor()
    anchor.gains.theta.data += 0.1
    noise = np.random.default_rng(1).standard_normal((16, 4))
    obj, kl = policy_improvement_kl(actor, anchor, q, obs, ctx, noise, 0.0)
    assert kl > 0
    assert float(obj.data) == float(policy_improvement(actor, q, obs, ctx, noise, 0.0).data)


def anchored_training(tau_pi, steps=200, lr=1e-3, seed=0):
    """Train an actor against a displaced bandit optimum; returns (actor, anchor, final KL)."""
    ctx, obs, q = _anchored_problem(seed)
    actor = make_actor()
    anchor = actor.copy()
    opt = nk.AdamState(lr=lr)
    rng = np.random.default_rng(seed + 1)
    for _ in range(steps):
        obj, _ = policy_improvement_kl(actor, anchor, q, obs, ctx,
                                       rng.standard_normal((16, 4)), tau_pi)
        ascend(obj, actor.parameters(), opt)
    kl = float(nk.value(nk.mean(actor.kl_to(anchor, obs, ctx))))
    return actor, anchor, kl


def test_huge_kl_weight_pins_gains():
    actor, anchor, _ = anchored_training(1e6)
    assert np.linalg.norm(actor.gains.values() - anchor.gains.values()) <= 1e-3


def test_final_kl_nonincreasing_in_weight():
    kls = [anchored_training(t)[2] for t in (0.0, 1.0, 10.0, 100.0)]
    assert all(a >= b for a, b in zip(kls, kls[1:]))


def test_negative_kl_weight_rejected():
    ctx, obs, q = _anchored_problem()
    actor = make_actor()
    with pytest.raises(ValueError):
        policy_improvement_kl(actor, actor.copy(), q, obs, ctx, np.zeros((16, 4)), -1.0)


# ----------------------------------------------------------------------
# estimator wrapper


def _tabular_fit_data(mdp):
    n_s, n_a = mdp.num_states, mdp.num_actions
    obs, act, nxt, _, w, _ = tabular_batch(mdp, oracle.uniform_weighting(mdp))
    rew = mdp.R[obs.argmax(1), act.argmax(1)]
    grid = np.hstack([np.repeat(np.eye(n_s), n_a, 0), np.tile(np.eye(n_a), (n_s, 1))])
    return np.hstack([obs, act]), rew, nxt, w, grid


def test_regressor_recovers_policy_q():
    mdp = oracle.load_fixture("random_5x3")
    mdp.gamma = 0.5
    policy = oracle.random_policy(np.random.default_rng(0), mdp)
    n = mdp.num_states * mdp.num_actions
    feat = OuterProductPair.from_matrices(np.eye(n), np.zeros((mdp.num_states, n)),
                                          mdp.num_states, mdp.num_actions).freeze()
    X, rew, nxt, w, grid = _tabular_fit_data(mdp)
    est = LinearQRegressor(feat, gamma=0.5, learning_rate=0.05, target_rate=1.0, batch_size=None,
                           max_steps=3000)
    est.fit(X, rew, nxt, TabularPolicy(policy), sample_weight=w)
    q = est.predict(grid).reshape(mdp.num_states, mdp.num_actions)
    assert np.max(np.abs(q - oracle.exact_policy_q(mdp, policy))) <= 5e-3
    assert est.loss_curve_[-1] < est.loss_curve_[0]


def test_regressor_params_and_validation():
    from sklearn.base import clone
    est = LinearQRegressor(gamma=0.7, max_steps=5)
    twin = clone(est)
    assert twin.get_params()["gamma"] == 0.7 and twin.features is None
    with pytest.raises(ValueError):
        est.fit(np.zeros((3, 4)), np.zeros(3), np.zeros((3, 2)), None)
