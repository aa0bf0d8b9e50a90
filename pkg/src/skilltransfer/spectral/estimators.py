"""Scikit-learn style wrappers around the spectral learners.

``X`` stacks observation and action columns, ``y`` holds next observations.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .. import numkit as nk
from .features import FeaturePair, discovery_loss, feature_loss, gram_inner


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X and y must be 2-D with matching rows")
    if X.shape[1] <= y.shape[1]:
        raise ValueError("X must hold observation columns followed by action columns")
    return X, y


class _SpectralBase(BaseEstimator, TransformerMixin):

    def _split(self, X):
        return X[:, :self.obs_dim_], X[:, self.obs_dim_:]

    def _batches(self, X, y, n_steps):
        n = X.shape[0]
        b = min(self.batch_size, n)
        k = min(self.n_negatives or b, n)
        for _ in range(n_steps):
            idx = self.rng_.integers(0, n, size=b)
            neg = self.rng_.integers(0, n, size=k)
            yield X[idx], y[idx], y[neg]

    def _step(self, loss):
        params = self._trainable()
        nk.zero_grad(params)
        loss.backward()
        nk.adam_step(params, self.opt_)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError("non-finite loss during representation learning")
        self.loss_curve_.append(value)
        return value

    def transform(self, X):
        """``phi(obs, act)`` for each row."""
        check_is_fitted(self, "pair_")
        obs, act = self._split(np.asarray(X, dtype=float))
        return self.pair_.phi(obs, act, differentiable=False)

    def transform_target(self, y):
        """``mu(next_obs)`` for each row."""
        check_is_fitted(self, "pair_")
        return self.pair_.mu(np.asarray(y, dtype=float), differentiable=False)


class SpectralFeatures(_SpectralBase):
    """Simulator skills: a feature pair fitted with the spectral surrogate loss.

    Parameters
    ----------
    n_components : int
        Feature dimension ``d``.
    hidden : tuple of int
    learning_rate : float
    batch_size : int
    n_negatives : int or None
        Negative next-observations per step (defaults to ``batch_size``).
    max_steps : int
        Gradient steps taken by :meth:`fit`.
    random_state : int
    """

    def __init__(self, n_components=64, hidden=(128, 128), learning_rate=1e-3, batch_size=256,
                 n_negatives=None, max_steps=1000, random_state=0):
        self.n_components = n_components
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_negatives = n_negatives
        self.max_steps = max_steps
        self.random_state = random_state

    def _init(self, X, y):
        self.obs_dim_ = y.shape[1]
        self.rng_ = np.random.default_rng(self.random_state)
        self.pair_ = FeaturePair(self.obs_dim_, X.shape[1] - self.obs_dim_, self.n_components,
                                 self.rng_, self.hidden)
        self.opt_ = nk.AdamState(lr=self.learning_rate)
        self.loss_curve_ = []

    def _trainable(self):
        return self.pair_.parameters()

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self._init(X, y)
        return self.partial_fit(X, y, self.max_steps)

    def partial_fit(self, X, y, n_steps=1):
        X, y = _check_xy(X, y)
        if not hasattr(self, "pair_"):
            self._init(X, y)
        for xb, yb, neg in self._batches(X, y, n_steps):
            obs, act = self._split(xb)
            self._step(feature_loss(self.pair_, obs, act, yb, neg))
        return self

    def score(self, X, y):
        """Negative surrogate loss with every row of ``y`` as a negative."""
        X, y = _check_xy(X, y)
        obs, act = self._split(X)
        pair = self.pair_
        return -float(nk.value(feature_loss(pair.copy().freeze(), obs, act, y, y)))


class ResidualSkillDiscovery(_SpectralBase):
    """Residual skills fitted against frozen simulator skills.

    Parameters
    ----------
    simulator : SpectralFeatures
        Fitted simulator estimator; its feature pair is copied and frozen.
    n_components : int
        Residual feature dimension ``s``.
    penalty : float
        Weight of the orthogonality penalty.
    """

    def __init__(self, simulator=None, n_components=16, penalty=1.0, hidden=(128, 128),
                 learning_rate=1e-3, batch_size=256, n_negatives=None, max_steps=1000,
                 random_state=0):
        self.simulator = simulator
        self.n_components = n_components
        self.penalty = penalty
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_negatives = n_negatives
        self.max_steps = max_steps
        self.random_state = random_state

    def _init(self, X, y):
        if self.simulator is None:
            raise ValueError("a fitted simulator estimator is required")
        check_is_fitted(self.simulator, "pair_")
        self.sim_pair_ = self.simulator.pair_.copy().freeze()
        self.obs_dim_ = y.shape[1]
        self.rng_ = np.random.default_rng(self.random_state)
        self.pair_ = FeaturePair(self.obs_dim_, X.shape[1] - self.obs_dim_, self.n_components,
                                 self.rng_, self.hidden)
        self.opt_ = nk.AdamState(lr=self.learning_rate)
        self.loss_curve_ = []
        self.violation_curve_ = []

    def _trainable(self):
        return self.pair_.parameters()

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self._init(X, y)
        return self.partial_fit(X, y, self.max_steps)

    def partial_fit(self, X, y, n_steps=1):
        X, y = _check_xy(X, y)
        if not hasattr(self, "pair_"):
            self._init(X, y)
        for xb, yb, neg in self._batches(X, y, n_steps):
            obs, act = self._split(xb)
            loss, violation = discovery_loss(self.sim_pair_, self.pair_, obs, act, yb, neg,
                                             self.penalty)
            self._step(loss)
            self.violation_curve_.append(violation)
        return self

    def constraint_violation(self, X):
        """``sum_ij |E[phi_sim_i phi_j]|`` over the rows of ``X``."""
        check_is_fitted(self, "pair_")
        obs, act = self._split(np.asarray(X, dtype=float))
        g = gram_inner(self.sim_pair_.phi(obs, act, False), self.pair_.phi(obs, act, False))
        return float(np.sum(np.abs(g)))
