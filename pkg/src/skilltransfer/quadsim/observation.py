"""Noisy measurement and the 42-wide observation vector.

Observation layout (frozen; offsets in :data:`OBS_LAYOUT`)::

    rel_pos(3) quat(4) rpy(3) vel(3) omega(3) u_last(4)
    int_p(3) diff_p(3) int_R(3) diff_R(3) int_w(3) diff_w(3) motor_cmd(4)
"""
from __future__ import annotations

import numpy as np

from .. import numkit as nk
from .dynamics import QuadState, motor_mix, quat_multiply, quat_to_euler
from .params import PhysicalParams

OBS_FIELDS = (("rel_pos", 3), ("quat", 4), ("rpy", 3), ("vel", 3), ("omega", 3),
              ("u_last", 4), ("int_p", 3), ("diff_p", 3), ("int_R", 3), ("diff_R", 3),
              ("int_w", 3), ("diff_w", 3), ("motor_cmd", 4))
OBS_LAYOUT = {}
_o = 0
for _name, _w in OBS_FIELDS:
    OBS_LAYOUT[_name] = slice(_o, _o + _w)
    _o += _w
OBS_WIDTH = _o
assert OBS_WIDTH == 42

# Fixed per-block scaling applied before the observation enters a network.
_SCALES = {"rel_pos": 1.0, "quat": 1.0, "rpy": 1.0, "vel": 1.0, "omega": 0.1, "u_last": 1.0,
           "int_p": 1.0, "diff_p": 1.0, "int_R": 1.0, "diff_R": 0.1, "int_w": 1.0,
           "diff_w": 0.01, "motor_cmd": 1.0}
OBS_SCALE = np.concatenate([np.full(w, _SCALES[n]) for n, w in OBS_FIELDS])


def _small_rotation_quat(rotvec):
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x)/x handled by a series near zero
    k = np.where(angle > 1e-12, np.sin(half) / np.where(angle > 1e-12, angle, 1.0), 0.5)
    return np.concatenate([np.cos(half), k * rotvec], axis=-1)


def measure(state: QuadState, params: PhysicalParams, rng) -> QuadState:
    """What the onboard estimator reports: the true state plus Gaussian noise.

    Channels: position, body-frame small-angle attitude, velocity, body rate.
    Motor forces are not measured and pass through. With all stds zero the
    input arrays are returned as-is and ``rng`` is not touched.
    """
    std = np.asarray(params.obs_noise_std)
    if not np.any(std):
        return state
    lead = np.shape(state.position)[:-1]
    eps = rng.standard_normal(lead + (12,)) * std
    q = quat_multiply(np.asarray(state.quaternion), _small_rotation_quat(eps[..., 3:6]))
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return QuadState(state.position + eps[..., 0:3], q, state.velocity + eps[..., 6:9],
                     state.angular_velocity + eps[..., 9:12], state.motor_forces)


def build_observation(measured: QuadState, goal, u_last, mem, params: PhysicalParams):
    """Assemble the observation from an already measured state.

    Tape-aware: tensor entries in ``measured``, ``u_last`` or ``mem`` yield a
    tensor observation.
    """
    roll, pitch, yaw = quat_to_euler(measured.quaternion)
    lead = tuple(nk.value(measured.position).shape[:-1])

    def full(x, w):
        if nk.is_tensor(x):
            return x
        return np.broadcast_to(np.asarray(x, dtype=float), lead + (w,))

    u_last = full(u_last, 4)
    parts = [
        measured.position - np.asarray(goal, dtype=float), full(measured.quaternion, 4),
        nk.stack([roll, pitch, yaw], axis=-1), full(measured.velocity, 3),
        full(measured.angular_velocity, 3), u_last,
        full(mem.integral["p"], 3), full(mem.difference["p"], 3),
        full(mem.integral["R"], 3), full(mem.difference["R"], 3),
        full(mem.integral["w"], 3), full(mem.difference["w"], 3),
        motor_mix(u_last, params.max_motor_force) / params.max_motor_force,
    ]
    return nk.concat([full(p, nk.value(p).shape[-1]) for p in parts], axis=-1)


def observe(state: QuadState, u_last, mem, params: PhysicalParams, rng, goal=(0.0, 0.0, 1.0)):
    """Measure ``state`` and build its observation (noise std from ``params``)."""
    return build_observation(measure(state, params, rng), goal, u_last, mem, params)
