from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

#: Control and simulation rate (Hz); both run at the same frequency.
CONTROL_RATE = 240.0
#: Measurement-noise channels: position (3), attitude small-angle (3), velocity (3), body rate (3).
NOISE_CHANNELS = 12


class ParameterError(ValueError):
    """Physical parameters violate their invariants."""


def _tuple(x, n):
    arr = np.broadcast_to(np.asarray(x, dtype=np.float64), (n,))
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class PhysicalParams:
    """Rigid-body and actuator parameters of a Crazyflie-class vehicle.

    ``force_scale`` converts a normalized motor command into newtons; the
    default makes a normalized command of 1.0 on all four motors hold the
    nominal 27 g vehicle in hover. ``max_motor_force`` is the normalized
    saturation level, chosen so that hover sits at 48% of full thrust.
    """

    mass: float = 0.027
    arm_length: float = 0.0397
    inertia: tuple = (1.4e-5, 1.4e-5, 2.17e-5)
    motor_efficiency: tuple = (1.0, 1.0, 1.0, 1.0)
    gravity: float = 9.81
    motor_time_constant: float = 0.03
    thrust_to_torque: float = 0.0251
    obs_noise_std: tuple = (0.0,) * NOISE_CHANNELS
    control_period: float = 1.0 / CONTROL_RATE
    force_scale: float = 0.027 * 9.81 / 4.0
    max_motor_force: float = 1.0 / 0.48
    delay_steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inertia", _tuple(self.inertia, 3))
        object.__setattr__(self, "motor_efficiency", _tuple(self.motor_efficiency, 4))
        object.__setattr__(self, "obs_noise_std", _tuple(self.obs_noise_std, NOISE_CHANNELS))
        if self.mass <= 0:
            raise ParameterError(f"mass must be positive, got {self.mass}")
        if self.arm_length <= 0 or self.control_period <= 0:
            raise ParameterError("arm length and control period must be positive")
        if min(self.inertia) <= 0:
            raise ParameterError("inertia must be positive")
        if any(not 0.0 < e <= 1.2 for e in self.motor_efficiency):
            raise ParameterError(f"motor efficiencies must lie in (0, 1.2], got {self.motor_efficiency}")
        if self.motor_time_constant <= 0 or self.force_scale <= 0 or self.max_motor_force <= 0:
            raise ParameterError("time constant, force scale and max force must be positive")
        if min(self.obs_noise_std) < 0:
            raise ParameterError("noise std must be nonnegative")
        if int(self.delay_steps) != self.delay_steps or self.delay_steps < 0:
            raise ParameterError("delay_steps must be a nonnegative integer")
        object.__setattr__(self, "delay_steps", int(self.delay_steps))

    @property
    def dt(self):
        return self.control_period

    @property
    def max_force_newton(self):
        return self.max_motor_force * self.force_scale

    @property
    def hover_command(self):
        """Normalized per-motor command that balances gravity for this mass."""
        return self.mass * self.gravity / (4.0 * self.force_scale)


@dataclass(frozen=True)
class GapSpec:
    """Synthetic reality gap: payload, weak motors, sensor noise, actuation delay.

    ``efficiency_multipliers`` is indexed from zero in the same order as the
    motor-mixing outputs.
    """

    added_mass: float = 0.0
    efficiency_multipliers: tuple = (1.0, 1.0, 1.0, 1.0)
    obs_noise_std: float = 0.0
    delay_steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "efficiency_multipliers", _tuple(self.efficiency_multipliers, 4))
        if self.obs_noise_std < 0:
            raise ParameterError("noise std must be nonnegative")
        if int(self.delay_steps) != self.delay_steps or self.delay_steps < 0:
            raise ParameterError("delay_steps must be a nonnegative integer")
        object.__setattr__(self, "delay_steps", int(self.delay_steps))

    @property
    def is_zero(self):
        return (self.added_mass == 0.0 and self.efficiency_multipliers == (1.0,) * 4
                and self.obs_noise_std == 0.0 and self.delay_steps == 0)


def apply_gap(params: PhysicalParams, gap: GapSpec) -> PhysicalParams:
    """Return the perturbed "real" parameters. Pure: equal inputs give equal outputs."""
    mass = params.mass + gap.added_mass
    if mass <= 0:
        raise ParameterError(f"gap leaves non-positive mass {mass}")
    if gap.is_zero:
        return params
    eff = tuple(e * m for e, m in zip(params.motor_efficiency, gap.efficiency_multipliers))
    return replace(params, mass=mass, motor_efficiency=eff,
                   obs_noise_std=(gap.obs_noise_std,) * NOISE_CHANNELS,
                   delay_steps=gap.delay_steps)


@dataclass(frozen=True)
class ActionBounds:
    """Clip bounds for the normalized action ``[F_z, F_r, F_p, F_y]``."""

    low: tuple = field(default=(0.0, -1.0, -1.0, -1.0))
    high: tuple = field(default=(1.0 / 0.48, 1.0, 1.0, 1.0))

    def arrays(self):
        return np.asarray(self.low), np.asarray(self.high)
