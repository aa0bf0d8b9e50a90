"""Linear-Q planning on learned skill sets.

``Q(s, a) = w1 . phi_sim(s, a) + w2 . phi_res(s, a)``. Feature networks are
never trained here; only the weights ``w`` move during policy evaluation, and
only the actor moves during policy improvement.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import numkit as nk


class LinearQ:
    """Linear Q-function over frozen simulator and (optional) residual skills.

    Parameters
    ----------
    sim : FeaturePair
        Simulator skills ``phi_sim`` (dimension ``d``).
    residual : FeaturePair, optional
        Residual skills ``phi_res`` (dimension ``s``); ``w2`` is absent without it.
    w1, w2 : array_like, optional
        Initial weights (zeros by default).
    """

    def __init__(self, sim, residual=None, w1=None, w2=None):
        self.sim = sim
        self.residual = residual
        self.w1 = nk.Parameter(np.zeros(sim.dim) if w1 is None else w1)
        if residual is None:
            if w2 is not None:
                raise ValueError("w2 given without residual features")
            self.w2 = None
        else:
            self.w2 = nk.Parameter(np.zeros(residual.dim) if w2 is None else w2)

    def parameters(self):
        return [self.w1] if self.w2 is None else [self.w1, self.w2]

    def features(self, obs, act):
        """Stacked ``[phi_sim, phi_res]`` as a constant array (or a tape node if ``act`` is one)."""
        parts = [self.sim.phi(obs, act, differentiable=False)]
        if self.residual is not None:
            parts.append(self.residual.phi(obs, act, differentiable=False))
        return nk.concat(parts, axis=-1) if len(parts) > 1 else parts[0]

    def weights(self, differentiable=True):
        ws = [p if differentiable else p.data for p in self.parameters()]
        return nk.concat(ws, axis=-1) if len(ws) > 1 else ws[0]

    def value(self, obs, act, differentiable=True):
        """``Q(obs, act)`` per row; gradients reach ``w`` and, if ``act`` is a tensor, the action."""
        phi = self.features(obs, act)
        w = self.weights(differentiable)
        return nk.sum(phi * w, axis=-1)

    def copy(self):
        w2 = None if self.w2 is None else self.w2.data.copy()
        return LinearQ(self.sim, self.residual, self.w1.data.copy(), w2)


class TargetQ:
    """Frozen copy of a :class:`LinearQ`, moved only by :func:`soft_update`."""

    def __init__(self, live: LinearQ):
        self.q = live.copy()
        for p in self.q.parameters():
            p.requires_grad = False

    def value(self, obs, act):
        return np.asarray(self.q.value(obs, act, differentiable=False))

    def arrays(self):
        return [p.data for p in self.q.parameters()]


def soft_update(target: TargetQ, live: LinearQ, rate):
    """``target <- (1 - rate) * target + rate * live``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("soft-update rate must lie in [0, 1]")
    for t, p in zip(target.q.parameters(), live.parameters()):
        if t.shape != p.shape:
            raise ValueError("target and live weights differ in shape")
        t.data = (1.0 - rate) * t.data + rate * p.data


class TabularPolicy:
    """Fixed stochastic policy over a finite action set, for oracle checks.

    ``obs`` rows are one-hot states; actions are one-hot codes.
    """

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def next_actions(self, obs):
        """All actions with their probabilities: ``(n, |A|, |A|)``, log-probs and weights."""
        n_a = self.probs.shape[1]
        p = np.asarray(obs, dtype=float) @ self.probs
        acts = np.broadcast_to(np.eye(n_a), p.shape[:1] + (n_a, n_a))
        with np.errstate(divide="ignore"):
            logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        return acts, logp, p


def _next_actions(actor, batch, rng):
    """``(actions (n, k, A), log_probs (n, k), weights (n, k))`` for the TD expectation."""
    if hasattr(actor, "next_actions"):
        return actor.next_actions(batch["next_obs"])
    obs, ctx = batch["next_obs"], batch["next_ctx"]
    noise = rng.standard_normal(obs.shape[:1] + (4,))
    act, logp = actor.sample(obs, ctx, noise, differentiable=False)
    act = np.asarray(act)
    return act[:, None, :], np.asarray(logp)[:, None], np.ones((act.shape[0], 1))


def td_target(target: TargetQ, actor, batch, gamma, tau=0.0, rng=None):
    """Soft-Bellman target ``r + gamma (1 - done) E_a'[Qbar(s', a') - tau log pi(a'|s')]``."""
    acts, logp, weight = _next_actions(actor, batch, rng)
    n, k = weight.shape
    obs = np.repeat(batch["next_obs"], k, axis=0)
    q_next = target.value(obs, acts.reshape(n * k, -1)).reshape(n, k)
    soft = np.sum(weight * (q_next - tau * logp), axis=1)
    rew = np.asarray(batch["rew"]).reshape(n)
    done = np.asarray(batch["done"]).reshape(n)
    return rew + gamma * (1.0 - done) * soft


def policy_evaluation(q: LinearQ, target: TargetQ, actor, batch, gamma, tau=0.0, rng=None,
                      sample_weight=None):
    """Mean squared TD error over the batch; only ``q``'s weights are on the tape.

    ``actor`` is either a :class:`~skilltransfer.mellinger.StochasticActor`
    (one reparameterized ``a'`` per row, drawn from ``rng``) or an object with
    ``next_actions`` giving an exact expectation over ``a'``.
    ``sample_weight`` reweights rows (normalized to sum one).
    """
    y = td_target(target, actor, batch, gamma, tau, rng)
    err = y - q.value(batch["obs"], batch["act"])
    sq = err * err
    if sample_weight is None:
        return nk.mean(sq)
    w = np.asarray(sample_weight, dtype=float)
    return nk.sum(sq * (w / w.sum()))


def max_entropy_policy(q, tau):
    """``softmax(q / tau)`` along the last axis; the maximizer of ``E_pi[q] + tau H(pi)``."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    z = np.asarray(q, dtype=float) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def policy_improvement(actor, q, obs, ctx, noise, tau):
    """Actor objective ``mean[Q(s, a~) - tau log pi(a~|s)]`` with ``a~`` reparameterized.

    ``q`` is any object with ``value(obs, act)`` accepting a tensor action;
    its own weights are read as constants. Maximize the returned node.
    """
    act, logp = actor.sample(obs, ctx, noise)
    return nk.mean(q.value(obs, act, differentiable=False) - tau * logp)


def policy_improvement_kl(actor, anchor, q, obs, ctx, noise, tau_pi):
    """Anchored objective ``mean Q(s, a~) - tau_pi mean KL(pi || pi_anchor)``.

    The KL is closed form over the pre-squash Gaussians; ``anchor`` is read
    as constants. Returns ``(objective node, mean KL as a float)``.
    """
    if tau_pi < 0:
        raise ValueError("KL weight must be nonnegative")
    act, _ = actor.sample(obs, ctx, noise)
    value = nk.mean(q.value(obs, act, differentiable=False))
    kl = nk.mean(actor.kl_to(anchor, obs, ctx))
    return value - tau_pi * kl, float(nk.value(kl))


def ascend(objective, params, opt: nk.AdamState):
    """One Adam step that increases ``objective``."""
    nk.zero_grad(params)
    (-objective).backward()
    nk.adam_step(params, opt)
    return float(nk.value(objective))


def _pair(features):
    """Feature pair from a pair or a fitted spectral estimator."""
    if hasattr(features, "pair_"):
        check_is_fitted(features, "pair_")
        return features.pair_
    return features


class LinearQRegressor(BaseEstimator, RegressorMixin):
    """Policy evaluation as a scikit-learn regressor over frozen skills.

    ``X`` stacks observation and action columns and ``y`` holds rewards;
    :meth:`fit` also needs the next observations and the policy whose ``Q``
    is wanted. :meth:`predict` returns ``Q(obs, act)``.

    Parameters
    ----------
    features : FeaturePair or SpectralFeatures
        Simulator skills (never trained here).
    residual : FeaturePair or ResidualSkillDiscovery, optional
    gamma, tau : float
        Discount and entropy temperature of the soft-Bellman target.
    learning_rate : float
        Adam step size on ``w``.
    target_rate : float
        Soft-update rate of the target weights per step.
    batch_size : int or None
        Rows per step; ``None`` uses every row each step.
    max_steps : int
    random_state : int
    """

    def __init__(self, features=None, residual=None, gamma=0.99, tau=0.0, learning_rate=3e-3,
                 target_rate=0.005, batch_size=256, max_steps=1000, random_state=0):
        self.features = features
        self.residual = residual
        self.gamma = gamma
        self.tau = tau
        self.learning_rate = learning_rate
        self.target_rate = target_rate
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.random_state = random_state

    def fit(self, X, y, next_obs, policy, done=None, next_ctx=None, sample_weight=None):
        if self.features is None:
            raise ValueError("simulator features are required")
        X = np.asarray(X, dtype=float)
        next_obs = np.asarray(next_obs, dtype=float)
        n, obs_dim = next_obs.shape
        if X.shape[0] != n or np.shape(y) != (n,):
            raise ValueError("X, y and next_obs must have matching rows")
        residual = None if self.residual is None else _pair(self.residual)
        self.obs_dim_ = obs_dim
        self.q_ = LinearQ(_pair(self.features), residual)
        self.target_ = TargetQ(self.q_)
        rng = np.random.default_rng(self.random_state)
        opt = nk.AdamState(lr=self.learning_rate)
        data = {"obs": X[:, :obs_dim], "act": X[:, obs_dim:], "rew": np.asarray(y, dtype=float),
                "next_obs": next_obs, "done": np.zeros(n) if done is None else np.asarray(done),
                "next_ctx": next_ctx}
        w = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
        self.loss_curve_ = []
        for _ in range(self.max_steps):
            if self.batch_size is None or self.batch_size >= n:
                batch, bw = data, w
            else:
                idx = rng.integers(0, n, size=self.batch_size)
                batch = {k: None if v is None else v[idx] for k, v in data.items()}
                bw = None if w is None else w[idx]
            loss = policy_evaluation(self.q_, self.target_, policy, batch, self.gamma, self.tau,
                                     rng, bw)
            nk.zero_grad(self.q_.parameters())
            loss.backward()
            nk.adam_step(self.q_.parameters(), opt)
            soft_update(self.target_, self.q_, self.target_rate)
            self.loss_curve_.append(float(nk.value(loss)))
        return self

    def predict(self, X):
        check_is_fitted(self, "q_")
        X = np.asarray(X, dtype=float)
        return np.asarray(self.q_.value(X[:, :self.obs_dim_], X[:, self.obs_dim_:],
                                        differentiable=False))
