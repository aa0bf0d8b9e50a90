"""Newton-Euler quadrotor model integrated with semi-implicit Euler.

All functions accept NumPy arrays or :mod:`numkit` tensors, so a rollout can
be differentiated end to end. Quaternions are scalar-first ``(w, x, y, z)``;
roll/pitch/yaw follow the Z-X-Y convention ``R = Rz(yaw) Rx(roll) Ry(pitch)``.

Motor layout (body frame, "X" configuration), matching the mixing rules::

    motor 1: (-x, -y)   motor 2: (+x, -y)   motor 3: (+x, +y)   motor 4: (-x, +y)

Motors 1 and 3 produce positive yaw reaction torque, motors 2 and 4 negative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numkit as nk
from .params import PhysicalParams


class SimulationFault(RuntimeError):
    """The integrated state left the finite/valid region."""


@dataclass
class QuadState:
    """Rigid-body state. Arrays may be tensors inside differentiable rollouts."""

    position: object
    quaternion: object
    velocity: object
    angular_velocity: object
    motor_forces: object

    def copy(self):
        return QuadState(*(np.array(nk.value(x)) for x in self.fields()))

    def fields(self):
        return (self.position, self.quaternion, self.velocity, self.angular_velocity,
                self.motor_forces)

    def is_finite(self):
        return all(np.all(np.isfinite(nk.value(x))) for x in self.fields())

    def detached(self):
        return QuadState(*(np.array(nk.value(x)) for x in self.fields()))

    @classmethod
    def hover(cls, params: PhysicalParams, position=(0.0, 0.0, 1.0)):
        f = params.mass * params.gravity / 4.0
        return cls(np.array(position, dtype=float), np.array([1.0, 0, 0, 0]), np.zeros(3),
                   np.zeros(3), np.full(4, f))


# ----------------------------------------------------------------------
# rotations


def quat_to_rotation(q):
    """Rotation matrix (..., 3, 3) of a unit quaternion (..., 4)."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        nk.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
        nk.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
        nk.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
    ]
    return nk.stack(rows, axis=-2)


def quat_multiply(a, b):
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return nk.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def euler_to_quat(roll, pitch, yaw):
    """Quaternion for ``Rz(yaw) Rx(roll) Ry(pitch)`` (NumPy only)."""
    roll, pitch, yaw = (np.asarray(a, dtype=float) for a in (roll, pitch, yaw))
    qz = np.stack([np.cos(yaw / 2), 0 * yaw, 0 * yaw, np.sin(yaw / 2)], axis=-1)
    qx = np.stack([np.cos(roll / 2), np.sin(roll / 2), 0 * roll, 0 * roll], axis=-1)
    qy = np.stack([np.cos(pitch / 2), 0 * pitch, np.sin(pitch / 2), 0 * pitch], axis=-1)
    return quat_multiply(quat_multiply(qz, qx), qy)


def rotation_to_euler(rot):
    """(roll, pitch, yaw) from a Z-X-Y rotation matrix."""
    roll = nk.arcsin(nk.clip(rot[..., 2, 1], -1.0, 1.0))
    pitch = nk.arctan2(-rot[..., 2, 0], rot[..., 2, 2])
    yaw = nk.arctan2(-rot[..., 0, 1], rot[..., 1, 1])
    return roll, pitch, yaw


def quat_to_euler(q):
    return rotation_to_euler(quat_to_rotation(q))


# ----------------------------------------------------------------------
# actuation


def motor_mix(action, max_force=None):
    """Power distribution from ``[F_z, F_r, F_p, F_y]`` to four propeller commands.

    Saturates to ``[0, max_force]`` when ``max_force`` is given.
    """
    fz, fr, fp, fy = action[..., 0], action[..., 1], action[..., 2], action[..., 3]
    forces = nk.stack([
        fz - fr / 2 + fp / 2 + fy,
        fz - fr / 2 - fp / 2 - fy,
        fz + fr / 2 - fp / 2 + fy,
        fz + fr / 2 + fp / 2 - fy,
    ], axis=-1)
    if max_force is not None:
        forces = nk.clip(forces, 0.0, max_force)
    return forces


def body_wrench(forces, params: PhysicalParams):
    """Collective thrust (N) and body torques (N m) from per-motor forces (N)."""
    f1, f2, f3, f4 = forces[..., 0], forces[..., 1], forces[..., 2], forces[..., 3]
    half_diag = params.arm_length / np.sqrt(2.0)
    thrust = f1 + f2 + f3 + f4
    torque = nk.stack([
        half_diag * (f3 + f4 - f1 - f2),
        half_diag * (f1 + f4 - f2 - f3),
        params.thrust_to_torque * (f1 + f3 - f2 - f4),
    ], axis=-1)
    return thrust, torque


def integrate(state: QuadState, action, params: PhysicalParams, dt=None) -> QuadState:
    """Advance one control period without checking the result.

    Order: first-order motor lag toward the commanded forces, wrench from
    the arm geometry, angular then linear velocity update, then position and
    attitude from the new velocities; the quaternion is renormalized.
    Leading batch axes are carried through.
    """
    dt = params.dt if dt is None else dt
    command = motor_mix(action, params.max_motor_force) * params.force_scale
    target = nk.clip(command * np.asarray(params.motor_efficiency), 0.0, params.max_force_newton)
    alpha = 1.0 - np.exp(-dt / params.motor_time_constant)
    forces = state.motor_forces + alpha * (target - state.motor_forces)

    thrust, torque = body_wrench(forces, params)
    inertia = np.asarray(params.inertia)
    w = state.angular_velocity
    gyro = nk.cross(w, w * inertia)
    w_new = w + dt * (torque - gyro) / inertia

    rot = quat_to_rotation(state.quaternion)
    thrust = nk.reshape(thrust, nk.value(thrust).shape + (1,))
    accel = rot[..., :, 2] * (thrust / params.mass) - np.array([0.0, 0.0, params.gravity])
    v_new = state.velocity + dt * accel
    p_new = state.position + dt * v_new

    q = state.quaternion
    zero = 0.0 * w_new[..., 0]
    dq = quat_multiply(q, nk.stack([zero, w_new[..., 0], w_new[..., 1], w_new[..., 2]], axis=-1))
    q_new = q + (0.5 * dt) * dq
    q_new = q_new / nk.norm(q_new, axis=-1, keepdims=True)

    return QuadState(p_new, q_new, v_new, w_new, forces)


def step(state: QuadState, action, params: PhysicalParams, dt=None) -> QuadState:
    """:func:`integrate`, raising :class:`SimulationFault` on a non-finite result."""
    out = integrate(state, action, params, dt)
    if not out.is_finite():
        raise SimulationFault("non-finite state after integration")
    return out


# ----------------------------------------------------------------------
# reward and initial distribution

#: Initial position covariance diagonal (m^2) and attitude std (deg).
INIT_POSITION_VAR = 0.02
INIT_ANGLE_STD_DEG = 5.0


def reward(state: QuadState, action, goal):
    """Per-step tracking reward with a constant +2 offset."""
    roll, pitch, _ = quat_to_euler(state.quaternion)
    return (2.0
            - 2.5 * nk.norm(state.position - goal)
            - 1.5 * nk.norm(nk.stack([roll, pitch], axis=-1))
            - 0.05 * nk.norm(state.velocity)
            - 0.05 * nk.norm(state.angular_velocity)
            - 0.1 * nk.norm(action))


def reset(params: PhysicalParams, rng, mean_position=(0.0, 0.0, 1.0), n=None) -> QuadState:
    """Sample an initial state: Gaussian position and Euler angles, at rest, motors idle.

    With ``n`` given, returns a batch of ``n`` independent draws.
    """
    del params  # the distribution does not depend on the vehicle
    shape = (3,) if n is None else (n, 3)
    p = np.asarray(mean_position, dtype=float) + rng.normal(size=shape) * np.sqrt(INIT_POSITION_VAR)
    angles = np.deg2rad(rng.normal(size=shape) * INIT_ANGLE_STD_DEG)
    q = euler_to_quat(angles[..., 0], angles[..., 1], angles[..., 2])
    lead = shape[:-1]
    return QuadState(p, q, np.zeros(lead + (3,)), np.zeros(lead + (3,)), np.zeros(lead + (4,)))
