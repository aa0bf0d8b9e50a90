"""Trajectory log: one CSV row per control step, 9 significant digits."""
from __future__ import annotations

import csv

import numpy as np

TRAJECTORY_HEADER = ("t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,u1,u2,u3,u4,reward").split(",")


def write_trajectory(path, times, positions, quaternions, velocities, omegas, actions, rewards):
    """Write a single-vehicle trajectory; array arguments are ``(T, k)``."""
    cols = [np.asarray(times)[:, None], positions, quaternions, velocities, omegas, actions,
            np.asarray(rewards)[:, None]]
    table = np.concatenate([np.asarray(c, dtype=float) for c in cols], axis=1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for row in table:
            writer.writerow(f"{v:.9g}" for v in row)


def read_trajectory(path):
    """Return ``{column: array}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header in {path}")
        rows = np.array([[float(v) for v in r] for r in reader]).reshape(-1, len(header))
    return {name: rows[:, i] for i, name in enumerate(header)}
