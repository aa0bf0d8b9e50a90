"""Quadrotor rigid-body simulator with reality-gap injection."""
from .dynamics import (INIT_ANGLE_STD_DEG, INIT_POSITION_VAR, QuadState, SimulationFault,
                       body_wrench, euler_to_quat, integrate, motor_mix, quat_multiply,
                       quat_to_euler, quat_to_rotation, reset, reward, rotation_to_euler, step)
from .env import EPISODE_STEPS, QuadEnv
from .io import TRAJECTORY_HEADER, read_trajectory, write_trajectory
from .observation import (OBS_FIELDS, OBS_LAYOUT, OBS_SCALE, OBS_WIDTH, build_observation,
                          measure, observe)
from .params import (CONTROL_RATE, NOISE_CHANNELS, ActionBounds, GapSpec, ParameterError,
                     PhysicalParams, apply_gap)

__all__ = [
    "ActionBounds", "CONTROL_RATE", "EPISODE_STEPS", "GapSpec", "INIT_ANGLE_STD_DEG",
    "INIT_POSITION_VAR", "NOISE_CHANNELS", "OBS_FIELDS", "OBS_LAYOUT", "OBS_SCALE", "OBS_WIDTH",
    "ParameterError", "PhysicalParams", "QuadEnv", "QuadState", "SimulationFault",
    "TRAJECTORY_HEADER", "apply_gap", "body_wrench", "build_observation", "euler_to_quat",
    "integrate", "measure", "motor_mix", "observe", "quat_multiply", "quat_to_euler",
    "quat_to_rotation", "read_trajectory", "reset", "reward", "rotation_to_euler", "step",
    "write_trajectory",
]
