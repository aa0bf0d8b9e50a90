"""Differentiable PID-extended Mellinger controller and the stochastic actor.

The controller output is the normalized action ``[F_z, F_r, F_p, F_y]``:
collective thrust is divided by ``4 * force_scale`` so that hover maps to
roughly one per motor, and the attitude branch is expressed directly in
normalized mixing units.

Gains are stored as unconstrained parameters ``theta`` and used as
``scale * softplus(theta)``, so every gain stays positive.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .quadsim.dynamics import quat_to_rotation
from .quadsim.params import ActionBounds, PhysicalParams

FAMILIES = ("pos", "vel", "att", "rate")
TERMS = ("p", "i", "d")
AXES = ("xy", "z")
GAIN_NAMES = tuple(f"{fam}_{term}_{ax}" for fam in FAMILIES for term in TERMS for ax in AXES)

#: Firmware-style defaults in this package's units. Position families are in
#: N/m (N/(m s) for velocity), attitude families in normalized mixing units.
DEFAULT_GAINS = {
    "pos_p_xy": 0.4, "pos_p_z": 1.25, "pos_i_xy": 0.05, "pos_i_z": 0.05,
    "pos_d_xy": 0.002, "pos_d_z": 0.002,
    "vel_p_xy": 0.2, "vel_p_z": 0.4, "vel_i_xy": 0.002, "vel_i_z": 0.002,
    "vel_d_xy": 0.0005, "vel_d_z": 0.0005,
    "att_p_xy": 2.0, "att_p_z": 0.8, "att_i_xy": 0.05, "att_i_z": 0.05,
    "att_d_xy": 0.001, "att_d_z": 0.001,
    "rate_p_xy": 0.12, "rate_p_z": 0.08, "rate_i_xy": 0.002, "rate_i_z": 0.002,
    "rate_d_xy": 0.0002, "rate_d_z": 0.0002,
}

#: Crazyflie firmware ``ctrlMel`` parameter each gain corresponds to, where one exists.
FIRMWARE_NAMES = {
    "pos_p_xy": "kp_xy", "pos_p_z": "kp_z", "pos_i_xy": "ki_xy", "pos_i_z": "ki_z",
    "vel_p_xy": "kd_xy", "vel_p_z": "kd_z",
    "att_p_xy": "kR_xy", "att_p_z": "kR_z", "att_i_xy": "ki_m_xy", "att_i_z": "ki_m_z",
    "rate_p_xy": "kw_xy", "rate_p_z": "kw_z", "rate_d_xy": "kd_omega_rp",
}

# Reparameterization scale per gain: softplus(0) * scale sits at the default's order.
GAIN_SCALES = np.array([max(DEFAULT_GAINS[n], 1e-3) for n in GAIN_NAMES])


class SingularThrust(ArithmeticError):
    """Desired force vector has zero norm; caller should reuse the previous action."""


def _inv_softplus(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


class MellingerGains:
    """The 24 nonnegative feedback gains, held as one trainable parameter vector."""

    def __init__(self, values=None):
        values = DEFAULT_GAINS if values is None else values
        if isinstance(values, dict):
            unknown = set(values) - set(GAIN_NAMES)
            if unknown:
                raise KeyError(f"unknown gain names {sorted(unknown)}")
            values = [values.get(n, DEFAULT_GAINS[n]) for n in GAIN_NAMES]
        values = np.asarray(values, dtype=float)
        if values.shape != (24,) or np.any(values <= 0):
            raise ValueError("expected 24 strictly positive gains")
        self.theta = nk.Parameter(_inv_softplus(values / GAIN_SCALES))

    def tensor(self):
        """Gains as a tape node (24,)."""
        return nk.softplus(self.theta) * GAIN_SCALES

    def values(self):
        return np.logaddexp(0.0, self.theta.data) * GAIN_SCALES

    def as_dict(self):
        return {n: float(v) for n, v in zip(GAIN_NAMES, self.values())}

    def parameters(self):
        return [self.theta]

    def copy(self):
        clone = MellingerGains.__new__(MellingerGains)
        clone.theta = nk.Parameter(self.theta.data.copy())
        return clone

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        missing = set(GAIN_NAMES) - set(data)
        if missing:
            raise KeyError(f"missing gains {sorted(missing)}")
        return cls({k: float(v) for k, v in data.items()})


def gain_matrix(g, family, term):
    """Diagonal of one gain matrix, ``(xy, xy, z)``, from the 24-vector."""
    i = GAIN_NAMES.index(f"{family}_{term}_xy")
    return nk.stack([g[i], g[i], g[i + 1]], axis=-1)


@dataclass
class Reference:
    """Trajectory sample: position, velocity, acceleration, yaw and body rates."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))


# Error families tracked by the PID extension, in memory order.
ERRORS = ("p", "v", "R", "w")


@dataclass
class ControllerMemory:
    """Integrals, previous errors and last differences per error family.

    Entries are ``(3,)`` for a single vehicle or ``(n, 3)`` for a batch.
    """

    integral: dict = field(default_factory=lambda: {k: np.zeros(3) for k in ERRORS})
    previous: dict = field(default_factory=lambda: {k: np.zeros(3) for k in ERRORS})
    difference: dict = field(default_factory=lambda: {k: np.zeros(3) for k in ERRORS})
    has_previous: bool = False
    last_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def zeros(cls, n=None):
        shape = (3,) if n is None else (n, 3)
        eye = np.eye(3) if n is None else np.tile(np.eye(3), (n, 1, 1))
        return cls({k: np.zeros(shape) for k in ERRORS}, {k: np.zeros(shape) for k in ERRORS},
                   {k: np.zeros(shape) for k in ERRORS}, False, eye)

    def reset(self):
        self.__init__()

    def absorb(self, memory, r_des):
        """Store the ``(integral, error, difference)`` triples returned by :func:`control_law`."""
        for key, (integral, err, diff) in memory.items():
            self.integral[key] = integral
            self.previous[key] = err
            self.difference[key] = diff
        self.has_previous = True
        self.last_rotation = np.array(nk.value(r_des))

    def copy(self):
        return ControllerMemory({k: np.array(nk.value(v)) for k, v in self.integral.items()},
                                {k: np.array(nk.value(v)) for k, v in self.previous.items()},
                                {k: np.array(nk.value(v)) for k, v in self.difference.items()},
                                self.has_previous, np.array(self.last_rotation))


@dataclass(frozen=True)
class ControllerConfig:
    mass: float = 0.027
    gravity: float = 9.81
    force_scale: float = 0.027 * 9.81 / 4.0
    dt: float = 1.0 / 240.0
    integral_limit: float = 2.0
    bounds: ActionBounds = ActionBounds()

    @classmethod
    def from_params(cls, params: PhysicalParams, integral_limit=2.0):
        """Controller constants taken from the nominal (simulator) vehicle."""
        hi = (params.max_motor_force, 1.0, 1.0, 1.0)
        return cls(params.mass, params.gravity, params.force_scale, params.dt, integral_limit,
                   ActionBounds(high=hi))


# ----------------------------------------------------------------------
# geometry


def vee(m):
    """so(3) -> R^3."""
    return nk.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def rotation_error(r_des, r):
    """Attitude error ``0.5 * (R_des^T R - R^T R_des)^vee``."""
    a = nk.matmul(nk.transpose(r_des), r)
    return 0.5 * vee(a - nk.transpose(a))


def _normalize(x):
    return x / nk.norm(x, axis=-1, keepdims=True)


def desired_rotation(f_des, yaw, r_current, r_previous=None, tol=1e-8):
    """Desired attitude whose body z axis points along ``f_des`` with heading ``yaw``.

    Between ``(x, y)`` and ``(-x, -y)`` the candidate closer to ``r_current``
    (Frobenius distance) is kept. When the heading is parallel to the thrust
    axis, ``r_previous`` (or ``r_current``) is held.
    Works on single inputs ``(3,)`` or batches ``(B, 3)``.
    """
    fv = nk.value(f_des)
    if np.any(np.linalg.norm(fv, axis=-1) == 0):
        raise SingularThrust("desired force has zero norm")
    z = _normalize(f_des)
    yaw = np.asarray(yaw, dtype=float)
    x_c = np.stack([np.cos(yaw), np.sin(yaw), np.zeros_like(yaw)], axis=-1)
    zc = nk.cross(z, x_c)
    zc_norm = np.linalg.norm(nk.value(zc), axis=-1)
    degenerate = zc_norm < tol
    safe = nk.where(degenerate[..., None], np.array([0.0, 1.0, 0.0]), zc)
    y = _normalize(safe)
    x = nk.cross(y, z)
    r1 = nk.stack([x, y, z], axis=-1)

    rc = nk.value(r_current)
    xv, yv = nk.value(x), nk.value(y)
    zv = nk.value(z)[..., None]
    cand1 = np.concatenate([xv[..., None], yv[..., None], zv], axis=-1)
    cand2 = np.concatenate([-xv[..., None], -yv[..., None], zv], axis=-1)
    d1 = np.sum((cand1 - rc) ** 2, axis=(-1, -2))
    d2 = np.sum((cand2 - rc) ** 2, axis=(-1, -2))
    sign = np.where(d2 < d1, -1.0, 1.0)
    flip = np.stack([sign, sign, np.ones_like(sign)], axis=-1)[..., None, :]
    r_des = r1 * flip
    if np.any(degenerate):
        hold = rc if r_previous is None else np.asarray(r_previous)
        r_des = nk.where(np.broadcast_to(degenerate[..., None, None], nk.value(r_des).shape),
                         hold, r_des)
    return r_des


# ----------------------------------------------------------------------
# control law

CONTEXT_WIDTH = 50
_CTX = {}
_offset = 0
for _name, _width in (("e_p", 3), ("e_v", 3), ("acc_ref", 3), ("yaw_ref", 1), ("rot", 9),
                      ("omega", 3), ("omega_ref", 3), ("int_p", 3), ("prev_p", 3),
                      ("int_v", 3), ("prev_v", 3), ("int_R", 3), ("prev_R", 3),
                      ("int_w", 3), ("prev_w", 3), ("has_prev", 1)):
    _CTX[_name] = slice(_offset, _offset + _width)
    _offset += _width
assert _offset == CONTEXT_WIDTH


def control_context(position, velocity, quaternion, omega, ref: Reference,
                    mem: ControllerMemory):
    """Flatten everything the control law needs into one vector (``CONTEXT_WIDTH``).

    State entries may be tape nodes; the result is then a tape node too.
    """
    rot = quat_to_rotation(quaternion)
    lead = tuple(nk.value(position).shape[:-1])

    def const(x, width):
        return np.broadcast_to(np.asarray(x, dtype=float), lead + (width,))

    parts = [
        position - const(ref.position, 3), velocity - const(ref.velocity, 3),
        const(ref.acceleration, 3), const(np.reshape(ref.yaw, np.shape(ref.yaw) + (1,)), 1),
        nk.reshape(rot, lead + (9,)), omega, const(ref.body_rates, 3),
        mem.integral["p"], mem.previous["p"], mem.integral["v"], mem.previous["v"],
        mem.integral["R"], mem.previous["R"], mem.integral["w"], mem.previous["w"],
        const(1.0 if mem.has_previous else 0.0, 1),
    ]
    return nk.concat([p if nk.is_tensor(p) else const(p, np.shape(p)[-1]) for p in parts],
                     axis=-1)


def _pid(g, family, err, integral, diff):
    return (gain_matrix(g, family, "p") * err + gain_matrix(g, family, "i") * integral
            + gain_matrix(g, family, "d") * diff)


def control_law(ctx, gains, cfg: ControllerConfig, previous_rotation=None):
    """Batched PID-Mellinger law on context rows ``(..., CONTEXT_WIDTH)``.

    ``gains`` is the 24-vector (array or tape node). Returns the raw
    (unclipped) normalized action, the updated memory pieces and the
    desired rotation.
    """
    if not nk.is_tensor(ctx):
        ctx = np.asarray(ctx, dtype=float)
    c = {k: ctx[..., s] for k, s in _CTX.items()}
    dt, lim = cfg.dt, cfg.integral_limit
    has_prev = c["has_prev"]
    rot = nk.reshape(c["rot"], tuple(ctx.shape[:-1]) + (3, 3))

    def update(err, key):
        integral = nk.clip(c[f"int_{key}"] + dt * err, -lim, lim)
        diff = has_prev * (err - c[f"prev_{key}"]) / dt
        return integral, diff

    e_p, e_v = c["e_p"], c["e_v"]
    int_p, d_p = update(e_p, "p")
    int_v, d_v = update(e_v, "v")
    g_vec = np.array([0.0, 0.0, cfg.mass * cfg.gravity])
    f_des = (-_pid(gains, "pos", e_p, int_p, d_p) - _pid(gains, "vel", e_v, int_v, d_v)
             + g_vec + cfg.mass * c["acc_ref"])
    z_b = rot[..., :, 2]
    u1 = nk.sum(f_des * z_b, axis=-1)

    r_des = desired_rotation(f_des, nk.value(c["yaw_ref"])[..., 0], rot, previous_rotation)
    e_r = rotation_error(r_des, rot)
    e_w = c["omega"] - c["omega_ref"]
    int_r, d_r = update(e_r, "R")
    int_w, d_w = update(e_w, "w")
    moments = -_pid(gains, "att", e_r, int_r, d_r) - _pid(gains, "rate", e_w, int_w, d_w)

    thrust = u1 / (4.0 * cfg.force_scale)
    action = nk.concat([nk.reshape(thrust, nk.value(thrust).shape + (1,)), moments], axis=-1)
    memory = {"p": (int_p, e_p, d_p), "v": (int_v, e_v, d_v), "R": (int_r, e_r, d_r),
              "w": (int_w, e_w, d_w)}
    return action, memory, r_des, f_des


def compute_control(position, velocity, quaternion, omega, ref: Reference, gains,
                    mem: ControllerMemory, cfg: ControllerConfig):
    """One controller evaluation on a single state; updates ``mem`` in place.

    ``gains`` may be a :class:`MellingerGains` (evaluated off the tape), a
    plain 24-array, or a tape node, in which case memory entries stay on the
    tape. Raises :class:`SingularThrust` when the desired force vanishes.
    """
    ctx = control_context(position, velocity, quaternion, omega, ref, mem)
    g = gains.values() if isinstance(gains, MellingerGains) else gains
    action, memory, r_des, _ = control_law(ctx, g, cfg, mem.last_rotation)
    mem.absorb(memory, r_des)
    return action


# ----------------------------------------------------------------------
# stochastic actor

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_SQUASH_EDGE = 1.0 - 1e-6


class StochasticActor:
    """Mellinger mean plus an MLP log-std head, squashed into the action box.

    The Gaussian lives on the pre-squash variable ``z``; the action is
    ``low + (high - low) * (tanh(z) + 1) / 2`` and the mean of ``z`` is the
    inverse squash of the (clipped) controller output.
    """

    def __init__(self, obs_dim, cfg: ControllerConfig, rng, hidden=(32,), init_log_std=-3.0,
                 gains=None, obs_scale=None):
        self.cfg = cfg
        self.gains = MellingerGains() if gains is None else gains
        self.log_std_head = nk.Mlp([obs_dim, *hidden, 4], rng)
        self.log_std_head.weights[-1].data *= 0.01
        self.log_std_head.biases[-1].data[...] = init_log_std
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale)

    def parameters(self):
        return self.gains.parameters() + self.log_std_head.parameters()

    def copy(self):
        clone = StochasticActor.__new__(StochasticActor)
        clone.cfg = self.cfg
        clone.gains = self.gains.copy()
        clone.log_std_head = self.log_std_head.copy()
        clone.obs_scale = self.obs_scale.copy()
        return clone

    def _bounds(self):
        low, high = self.cfg.bounds.arrays()
        return low, high, 0.5 * (high - low), 0.5 * (high + low)

    def log_std(self, obs, differentiable=True):
        x = obs * self.obs_scale if nk.is_tensor(obs) else np.asarray(obs) * self.obs_scale
        single = nk.value(x).ndim == 1
        if single:
            x = nk.reshape(x, (1, -1)) if nk.is_tensor(x) else x[None]
        out = self.log_std_head(x) if differentiable else self.log_std_head.predict(x)
        out = nk.clip(out, LOG_STD_MIN, LOG_STD_MAX)
        return out[0] if single else out

    def mean_action(self, ctx, differentiable=True):
        return self._control(ctx, differentiable)[0]

    def _control(self, ctx, differentiable, previous_rotation=None):
        g = self.gains.tensor() if differentiable else self.gains.values()
        return control_law(ctx, g, self.cfg, previous_rotation)

    def _to_z(self, action):
        _, _, half, mid = self._bounds()
        u = (action - mid) / half
        return nk.arctanh(nk.clip(u, -_SQUASH_EDGE, _SQUASH_EDGE))

    def pre_squash_mean(self, ctx, differentiable=True):
        return self._to_z(self.mean_action(ctx, differentiable))

    def squash(self, z):
        _, _, half, mid = self._bounds()
        return mid + half * nk.tanh(z)

    def act(self, obs, ctx, noise, differentiable=True, previous_rotation=None):
        """Reparameterized action, its log-density, and the controller memory update.

        Returns ``(action, log_prob, memory, r_des)`` where ``memory`` and
        ``r_des`` are as returned by :func:`control_law`.
        """
        _, _, half, _ = self._bounds()
        mean, memory, r_des, _ = self._control(ctx, differentiable, previous_rotation)
        mz = self._to_z(mean)
        log_std = self.log_std(obs, differentiable)
        noise = np.asarray(noise, dtype=float)
        z = mz + nk.exp(log_std) * noise
        t = nk.tanh(z)
        log_gauss = nk.sum(-0.5 * noise ** 2 - log_std - 0.5 * np.log(2 * np.pi), axis=-1)
        log_jac = nk.sum(nk.log(half * (1.0 - t * t) + 1e-12), axis=-1)
        return self.squash(z), log_gauss - log_jac, memory, r_des

    def sample(self, obs, ctx, noise, differentiable=True):
        """Reparameterized action and log-density for given standard-normal ``noise``."""
        action, logp, _, _ = self.act(obs, ctx, noise, differentiable)
        return action, logp

    def deterministic(self, ctx):
        """Squashed mean (equals the clipped controller output)."""
        return self.squash(self.pre_squash_mean(ctx, differentiable=False))

    def kl_to(self, other, obs, ctx):
        """Closed-form KL(self || other) per row over the pre-squash Gaussian."""
        m1 = self.pre_squash_mean(ctx)
        ls1 = self.log_std(obs)
        m2 = other.pre_squash_mean(ctx, differentiable=False)
        ls2 = other.log_std(obs, differentiable=False)
        var1 = nk.exp(2.0 * ls1)
        var2 = np.exp(2.0 * ls2)
        return nk.sum(ls2 - ls1 + (var1 + (m1 - m2) ** 2) / (2.0 * var2) - 0.5, axis=-1)


def sample_action(actor: StochasticActor, obs, state, ref: Reference, mem: ControllerMemory, rng):
    """Draw an action for ``state`` (NumPy, single or batched) and update ``mem``.

    Returns ``(action, log_prob)``. Raises :class:`SingularThrust` when the
    desired force vanishes.
    """
    ctx = control_context(state.position, state.velocity, state.quaternion,
                          state.angular_velocity, ref, mem)
    noise = rng.standard_normal(np.shape(ctx)[:-1] + (4,))
    action, logp, memory, r_des = actor.act(obs, ctx, noise, differentiable=False,
                                            previous_rotation=mem.last_rotation)
    mem.absorb(memory, r_des)
    return np.asarray(action), np.asarray(logp)
