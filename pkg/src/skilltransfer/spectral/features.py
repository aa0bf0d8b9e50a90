"""Feature pairs and the spectral surrogate, Gram and discovery losses."""
from __future__ import annotations

import numpy as np

from .. import numkit as nk


class FeaturePair:
    """``phi(obs, act) -> R^d`` and ``mu(next_obs) -> R^d``.

    Parameters
    ----------
    obs_dim, act_dim, dim : int
    rng : numpy.random.Generator
        Initialization stream.
    hidden : tuple of int
        Hidden widths of both networks (empty tuple gives linear maps).
    obs_scale, act_scale : array_like, optional
        Fixed input scaling applied before the networks.
    """

    def __init__(self, obs_dim, act_dim, dim, rng, hidden=(128, 128), obs_scale=None,
                 act_scale=None):
        self.obs_dim, self.act_dim, self.dim = int(obs_dim), int(act_dim), int(dim)
        self.hidden = tuple(hidden)
        self.phi_net = nk.Mlp([obs_dim + act_dim, *hidden, dim], rng)
        self.mu_net = nk.Mlp([obs_dim, *hidden, dim], rng)
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, float)
        self.act_scale = np.ones(act_dim) if act_scale is None else np.asarray(act_scale, float)
        self.frozen = False

    def _phi_input(self, obs, act):
        act = act * self.act_scale if nk.is_tensor(act) else np.asarray(act) * self.act_scale
        return nk.concat([np.asarray(obs) * self.obs_scale, act], axis=-1)

    def phi(self, obs, act, differentiable=True):
        """Skill features. A tensor ``act`` is always traced so gradients reach the action."""
        x = self._phi_input(obs, act)
        if nk.is_tensor(x) or (differentiable and not self.frozen):
            return self.phi_net(x)
        return self.phi_net.predict(x)

    def mu(self, next_obs, differentiable=True):
        x = np.asarray(next_obs) * self.obs_scale
        if differentiable and not self.frozen:
            return self.mu_net(x)
        return self.mu_net.predict(x)

    def parameters(self):
        return self.phi_net.parameters() + self.mu_net.parameters()

    def freeze(self):
        """Detach from every future tape; parameters then never receive gradients."""
        self.frozen = True
        self.phi_net.freeze()
        self.mu_net.freeze()
        return self

    def copy(self):
        clone = type(self).__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.phi_net = self.phi_net.copy()
        clone.mu_net = self.mu_net.copy()
        return clone


def _weighted_mean(x, weight):
    if weight is None:
        return nk.mean(x)
    w = np.asarray(weight, dtype=float)
    return nk.sum(x * (w / w.sum()))


def density_loss(phi, mu_pos, mu_neg, sample_weight=None, neg_weight=None):
    """Surrogate loss from precomputed features.

    ``-2 E[phi . mu(s')] + E_batch E_neg[(phi . mu(s~))^2]``. ``sample_weight``
    reweights batch rows (normalized to sum one); ``neg_weight`` multiplies
    each negative's squared term (importance weights, mean taken over negatives).
    """
    pos = nk.sum(phi * mu_pos, axis=-1)
    cross = nk.matmul(phi, nk.transpose(mu_neg))
    sq = cross * cross
    if neg_weight is not None:
        sq = sq * np.asarray(neg_weight, dtype=float)
    return -2.0 * _weighted_mean(pos, sample_weight) + _weighted_mean(nk.mean(sq, axis=-1),
                                                                      sample_weight)


def feature_loss(pair: FeaturePair, obs, act, next_obs, negatives, sample_weight=None,
                 neg_weight=None):
    """Sample estimator of the spectral density objective, constant dropped."""
    return density_loss(pair.phi(obs, act), pair.mu(next_obs), pair.mu(negatives),
                        sample_weight, neg_weight)


def gram_inner(phi_a, phi_b, sample_weight=None):
    """``(d_a, d_b)`` matrix of batch means of ``phi_a[:, i] * phi_b[:, j]``."""
    n = nk.value(phi_a).shape[0]
    if sample_weight is None:
        w = np.full((n, 1), 1.0 / n)
    else:
        w = np.asarray(sample_weight, dtype=float)[:, None]
        w = w / w.sum()
    return nk.matmul(nk.transpose(phi_a * w), phi_b)


def discovery_loss(sim: FeaturePair, res: FeaturePair, obs, act, next_obs, negatives, penalty,
                   sample_weight=None, neg_weight=None):
    """Residual-skill objective: stacked density loss plus ``penalty * sum |gram(phi_sim, phi)|``.

    Simulator features are evaluated off the tape, so only ``res`` receives
    gradients. Returns ``(loss, constraint_violation)`` where the violation
    is the plain number ``sum |gram|``.
    """
    if penalty < 0:
        raise ValueError("penalty weight must be nonnegative")
    phi_s = sim.phi(obs, act, differentiable=False)
    phi_r = res.phi(obs, act)
    stacked_phi = nk.concat([phi_s, phi_r], axis=-1)
    stacked_pos = nk.concat([sim.mu(next_obs, differentiable=False), res.mu(next_obs)], axis=-1)
    stacked_neg = nk.concat([sim.mu(negatives, differentiable=False), res.mu(negatives)], axis=-1)
    loss = density_loss(stacked_phi, stacked_pos, stacked_neg, sample_weight, neg_weight)
    g = gram_inner(phi_s, phi_r, sample_weight)
    violation = float(np.sum(np.abs(nk.value(g))))
    if penalty > 0:
        loss = loss + penalty * nk.sum(nk.absolute(g))
    return loss, violation


class OuterProductPair(FeaturePair):
    """Feature pair whose ``phi`` reads the Kronecker product ``obs (x) act``.

    With one-hot state and action codes the input is the joint one-hot of
    ``(s, a)``, so linear networks (``hidden=()``) are exactly tabular.
    """

    def __init__(self, obs_dim, act_dim, dim, rng, hidden=()):
        super().__init__(obs_dim, act_dim, dim, rng, hidden)
        self.phi_net = nk.Mlp([obs_dim * act_dim, *hidden, dim], rng)

    def _phi_input(self, obs, act):
        obs = np.asarray(obs, dtype=float)
        lead = obs.shape[:-1]
        if nk.is_tensor(act):
            outer = obs[..., :, None] * nk.reshape(act, lead + (1, self.act_dim))
            return nk.reshape(outer, lead + (-1,))
        act = np.asarray(act, dtype=float)
        return (obs[..., :, None] * act[..., None, :]).reshape(lead + (-1,))

    @classmethod
    def from_matrices(cls, phi, mu, num_states, num_actions):
        """Linear tabular pair with ``phi(s, a) = phi[s*|A| + a]`` and ``mu(s') = mu[s']``."""
        pair = cls(num_states, num_actions, phi.shape[1], np.random.default_rng(0))
        pair.phi_net.weights[0].data = np.array(phi, dtype=float)
        pair.phi_net.biases[0].data[...] = 0.0
        pair.mu_net.weights[0].data = np.array(mu, dtype=float)
        pair.mu_net.biases[0].data[...] = 0.0
        return pair


def tabular_batch(mdp, weighting):
    """Exact enumeration of an MDP as a weighted batch.

    Returns ``(obs, act, next_obs, negatives, sample_weight, neg_weight)``:
    one row per ``(s, a, s')`` weighted ``weighting(s, a) P(s'|s, a)``; every
    state is a negative with importance weight ``|S|`` so the mean over
    negatives equals the sum over next states.
    """
    n_s, n_a = mdp.num_states, mdp.num_actions
    eye_s, eye_a = np.eye(n_s), np.eye(n_a)
    s, a, s2 = np.meshgrid(np.arange(n_s), np.arange(n_a), np.arange(n_s), indexing="ij")
    s, a, s2 = s.ravel(), a.ravel(), s2.ravel()
    w = np.asarray(weighting, dtype=float)[s, a] * mdp.P[s, a, s2]
    keep = w > 0
    return (eye_s[s[keep]], eye_a[a[keep]], eye_s[s2[keep]], eye_s, w[keep],
            np.full(n_s, float(n_s)))


def tabular_matrices(pair: FeaturePair, num_states, num_actions):
    """``(Phi, Mu)`` with ``Phi`` ``(|S||A|, d)`` in ``s*|A| + a`` order and ``Mu`` ``(|S|, d)``."""
    s, a = np.meshgrid(np.arange(num_states), np.arange(num_actions), indexing="ij")
    obs = np.eye(num_states)[s.ravel()]
    act = np.eye(num_actions)[a.ravel()]
    return pair.phi(obs, act, differentiable=False), pair.mu(np.eye(num_states), differentiable=False)
