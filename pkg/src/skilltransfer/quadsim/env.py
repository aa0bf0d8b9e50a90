"""Batch of independent quadrotors with actuation delay and fault handling."""
from __future__ import annotations

from collections import deque

import numpy as np

from .dynamics import QuadState, integrate, reset
from .observation import measure
from .params import PhysicalParams

#: Episode horizon used by the training stages.
EPISODE_STEPS = 480


class QuadEnv:
    """``n_envs`` vehicles sharing one :class:`PhysicalParams`.

    Each row is stepped independently; a row whose state becomes non-finite
    or leaves ``fault_radius`` metres around the origin is frozen at its last
    valid state and reported through :attr:`faulted`.

    Parameters
    ----------
    params : PhysicalParams
        Vehicle actually simulated (apply a gap beforehand for the "real" MDP).
    rng : numpy.random.Generator
        Source of initial states and measurement noise.
    n_envs : int
    fault_radius : float
    """

    def __init__(self, params: PhysicalParams, rng, n_envs=1, fault_radius=20.0):
        self.params = params
        self.rng = rng
        self.n_envs = int(n_envs)
        self.fault_radius = float(fault_radius)
        self.state = None
        self.faulted = np.zeros(self.n_envs, dtype=bool)
        self._fifo = deque()

    def reset(self, mean_position=(0.0, 0.0, 1.0), state: QuadState | None = None):
        """Sample initial states (or take ``state``) and clear the delay line."""
        if state is None:
            state = reset(self.params, self.rng, mean_position, n=self.n_envs)
        self.state = state.copy()
        self.faulted[:] = False
        # Delay line starts empty-handed: idle motors until the first command arrives.
        self._fifo = deque(np.zeros((self.n_envs, 4)) for _ in range(self.params.delay_steps))
        return self.state

    def measure(self):
        return measure(self.state, self.params, self.rng)

    def step(self, action):
        """Apply ``action`` (after the configured delay). Returns the applied action."""
        action = np.asarray(action, dtype=float)
        self._fifo.append(action)
        applied = self._fifo.popleft()
        with np.errstate(all="ignore"):
            nxt = integrate(self.state, applied, self.params)
        ok = np.ones(self.n_envs, dtype=bool)
        for arr in nxt.fields():
            ok &= np.all(np.isfinite(arr), axis=-1)
        ok &= np.linalg.norm(np.where(np.isfinite(nxt.position), nxt.position, np.inf),
                             axis=-1) < self.fault_radius
        self.faulted |= ~ok
        keep = ~self.faulted
        merged = [np.where(keep[:, None], new, old)
                  for new, old in zip(nxt.fields(), self.state.fields())]
        self.state = QuadState(*merged)
        return applied
