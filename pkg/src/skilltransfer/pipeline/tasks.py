"""Evaluation and training tasks as time-indexed references."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mellinger import Reference
from ..quadsim import CONTROL_RATE, EPISODE_STEPS

HOVER_POINT = np.array([0.0, 0.0, 1.0])
#: Takeoff-hover-land phases (s): climb, hold at 1 m, descend, rest on the pad.
THL_PHASES = (2.0, 7.0, 2.0, 1.0)
GROUND_HEIGHT = 0.05


def _smoothstep(x):
    """Quintic ramp on [0, 1] with zero end velocity and acceleration; returns value, d/dx, d2/dx2."""
    x = np.clip(x, 0.0, 1.0)
    return (10 * x**3 - 15 * x**4 + 6 * x**5, 30 * x**2 - 60 * x**3 + 30 * x**4,
            60 * x - 180 * x**2 + 120 * x**3)


@dataclass(frozen=True)
class Task:
    """A reference generator with a fixed horizon and start distribution centre."""

    name: str
    steps: int
    start: tuple

    def reference(self, t):
        """Reference at time(s) ``t`` (seconds); fields gain a leading axis for array ``t``."""
        t = np.asarray(t, dtype=float)
        if self.name == "hover":
            p = np.broadcast_to(HOVER_POINT, t.shape + (3,)).copy()
            return Reference(p, np.zeros_like(p), np.zeros_like(p))
        if self.name == "figure8":
            p = np.stack([np.sin(t), 0.5 * np.sin(2 * t), np.ones_like(t)], axis=-1)
            v = np.stack([np.cos(t), np.cos(2 * t), np.zeros_like(t)], axis=-1)
            a = np.stack([-np.sin(t), -2 * np.sin(2 * t), np.zeros_like(t)], axis=-1)
            return Reference(p, v, a)
        return _takeoff_hover_land(t)

    def times(self):
        return np.arange(self.steps + 1) / CONTROL_RATE


def _takeoff_hover_land(t):
    up, hold, down, _ = THL_PHASES
    low, high = GROUND_HEIGHT, HOVER_POINT[2]
    span = high - low
    s_up, ds_up, dds_up = _smoothstep(t / up)
    s_dn, ds_dn, dds_dn = _smoothstep((t - up - hold) / down)
    z = low + span * (s_up - s_dn)
    vz = span * (ds_up / up - ds_dn / down)
    az = span * (dds_up / up**2 - dds_dn / down**2)
    zeros = np.zeros_like(z)
    return Reference(np.stack([zeros, zeros, z], -1), np.stack([zeros, zeros, vz], -1),
                     np.stack([zeros, zeros, az], -1))


def make_task(name) -> Task:
    if name == "hover":
        return Task("hover", EPISODE_STEPS, tuple(HOVER_POINT))
    if name == "figure8":
        # one full period of the slower component
        return Task("figure8", int(round(2 * np.pi * CONTROL_RATE)), (0.0, 0.0, 1.0))
    if name == "takeoff-hover-land":
        return Task(name, int(round(sum(THL_PHASES) * CONTROL_RATE)), (0.0, 0.0, GROUND_HEIGHT))
    raise KeyError(f"unknown task {name!r}")


def tracking_error(positions, targets):
    """Trajectory mean of ``||p - p_goal||`` (per leading batch row if present)."""
    d = np.linalg.norm(np.asarray(positions) - np.asarray(targets), axis=-1)
    return d.mean(axis=0)
