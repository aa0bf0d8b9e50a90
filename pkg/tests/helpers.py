"""Shared fixtures for actor and planner tests."""
import numpy as np

from skilltransfer import mellinger as mel
from skilltransfer import numkit as nk
from skilltransfer import quadsim as qs

CFG = mel.ControllerConfig.from_params(qs.PhysicalParams())


def make_actor(seed=0, **kwargs):
    return mel.StochasticActor(qs.OBS_WIDTH, CFG, np.random.default_rng(seed), **kwargs)


def contexts(rng, n, spread=0.01):
    """Controller contexts around hover at (0, 0, 1) and matching random observations."""
    ref = mel.Reference(np.array([0, 0, 1.0]))
    p = ref.position + spread * rng.normal(size=(n, 3))
    q = qs.euler_to_quat(*rng.normal(scale=spread, size=(3, n)))
    v, w = 2 * spread * rng.normal(size=(2, n, 3))
    ctx = mel.control_context(p, v, q, w, ref, mel.ControllerMemory.zeros(n))
    return ctx, rng.normal(size=(n, qs.OBS_WIDTH))


class QuadraticQ:
    """Bandit critic ``Q(s, a) = -sum((a - target)^2)``, peaked at ``target``."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def value(self, obs, act, differentiable=True):
        d = act - self.target
        return -nk.sum(d * d, axis=-1)


class ConstantQ:
    def value(self, obs, act, differentiable=True):
        return nk.sum(act * 0.0, axis=-1) + 3.0
