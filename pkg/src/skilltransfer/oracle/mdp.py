"""Finite MDPs with explicit transition tensors."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np


class ParameterError(ValueError):
    """An MDP or policy violates its invariants."""


@dataclass
class TabularMDP:
    """``P[s, a, s']``, ``R[s, a]``, discount and initial distribution."""

    P: np.ndarray
    R: np.ndarray
    gamma: float
    rho: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        n_s, n_a, n_s2 = self.P.shape
        if n_s != n_s2 or self.R.shape != (n_s, n_a) or self.rho.shape != (n_s,):
            raise ParameterError("inconsistent MDP shapes")
        if np.any(self.P < -1e-12) or np.max(np.abs(self.P.sum(-1) - 1)) > 1e-12:
            raise ParameterError("transition rows must be probability vectors")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError("gamma must lie in [0, 1]")

    @property
    def num_states(self):
        return self.P.shape[0]

    @property
    def num_actions(self):
        return self.P.shape[1]

    @property
    def P_flat(self):
        """Transition matrix with rows indexed by ``s * |A| + a``."""
        return self.P.reshape(-1, self.num_states)

    @property
    def R_flat(self):
        return self.R.reshape(-1)

    @classmethod
    def random(cls, rng, num_states, num_actions, gamma=0.9, concentration=1.0):
        P = rng.dirichlet(np.full(num_states, concentration), size=(num_states, num_actions))
        R = rng.uniform(-1, 1, size=(num_states, num_actions))
        rho = rng.dirichlet(np.ones(num_states))
        return cls(P, R, gamma, rho)

    def to_dict(self):
        return {"num_states": self.num_states, "num_actions": self.num_actions,
                "P": self.P.tolist(), "R": self.R.tolist(), "gamma": self.gamma,
                "rho": self.rho.tolist()}

    @classmethod
    def from_dict(cls, data):
        mdp = cls(data["P"], data["R"], float(data["gamma"]), data["rho"])
        if (mdp.num_states, mdp.num_actions) != (data["num_states"], data["num_actions"]):
            raise ParameterError("declared sizes disagree with P")
        return mdp

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fixture_names():
    root = resources.files("skilltransfer.oracle") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name):
    """Load a shipped fixture by name (without ``.json``)."""
    root = resources.files("skilltransfer.oracle") / "fixtures"
    return TabularMDP.from_dict(json.loads((root / f"{name}.json").read_text()))


def check_policy(mdp: TabularMDP, policy):
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.num_states, mdp.num_actions):
        raise ParameterError("policy must be |S| x |A|")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(1) - 1)) > 1e-12:
        raise ParameterError("policy rows must be distributions")
    return policy


def random_policy(rng, mdp: TabularMDP):
    return rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states)


def uniform_weighting(mdp: TabularMDP):
    return np.full((mdp.num_states, mdp.num_actions), 1.0 / (mdp.num_states * mdp.num_actions))
