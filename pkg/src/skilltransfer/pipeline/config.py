"""Experiment configuration: a flat INI file with one section per module.

Every key is a field of one of the section dataclasses below, whose default
also fixes its type. Unknown sections or keys are errors so typos cannot
silently fall back to defaults.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields

from ..quadsim import GapSpec, PhysicalParams, apply_gap

TASKS = ("hover", "takeoff-hover-land", "figure8")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass
class EnvConfig:
    added_mass: float = 0.0
    efficiency_multipliers: tuple = (1.0, 1.0, 1.0, 1.0)
    obs_noise_std: float = 0.0
    delay_steps: int = 0
    sim_task: str = "hover"
    real_task: str = "figure8"


@dataclass
class SpectralConfig:
    d: int = 64
    s: int = 16
    penalty: float = 1.0
    hidden: tuple = (128, 128)
    learning_rate: float = 1e-3
    batch_size: int = 256
    n_negatives: int = 256


@dataclass
class PlannerConfig:
    gamma: float = 0.99
    tau: float = 0.05
    tau_pi: float = 1.0
    tau_target: float = 0.005
    q_learning_rate: float = 3e-3
    actor_learning_rate: float = 1e-3
    init_log_std: float = -3.0


@dataclass
class TrainConfig:
    sim_transitions: int = 200_000
    n_envs: int = 16
    sim_feature_steps: int = 64
    sim_td_steps: int = 64
    sim_actor_steps: int = 16
    real_episodes: int = 20
    discovery_steps: int = 64
    td_steps: int = 64
    improvement_steps: int = 64
    buffer_capacity: int = 200_000
    skill_transfer_only: bool = False


@dataclass
class EvalConfig:
    task: str = "figure8"
    episodes: int = 10


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    # ------------------------------------------------------------------
    def gap(self):
        e = self.env
        return GapSpec(e.added_mass, e.efficiency_multipliers, e.obs_noise_std, e.delay_steps)

    def sim_params(self):
        return PhysicalParams()

    def real_params(self):
        return apply_gap(PhysicalParams(), self.gap())

    def validate(self):
        s, p, t, v = self.spectral, self.planner, self.train, self.eval
        positive = {"spectral.d": s.d, "spectral.s": s.s, "spectral.learning_rate": s.learning_rate,
                    "spectral.batch_size": s.batch_size, "spectral.n_negatives": s.n_negatives,
                    "planner.tau": p.tau, "planner.q_learning_rate": p.q_learning_rate,
                    "planner.actor_learning_rate": p.actor_learning_rate,
                    "train.n_envs": t.n_envs, "train.buffer_capacity": t.buffer_capacity,
                    "eval.episodes": v.episodes}
        for name, val in positive.items():
            if not val > 0:
                raise ConfigError(f"{name} must be positive, got {val}")
        nonneg = {"spectral.penalty": s.penalty, "planner.tau_pi": p.tau_pi,
                  "train.sim_transitions": t.sim_transitions, "train.real_episodes": t.real_episodes,
                  "train.sim_feature_steps": t.sim_feature_steps, "train.sim_td_steps": t.sim_td_steps,
                  "train.sim_actor_steps": t.sim_actor_steps,
                  "train.discovery_steps": t.discovery_steps, "train.td_steps": t.td_steps,
                  "train.improvement_steps": t.improvement_steps}
        for name, val in nonneg.items():
            if val < 0:
                raise ConfigError(f"{name} must be nonnegative, got {val}")
        if not 0.0 <= p.gamma < 1.0:
            raise ConfigError("planner.gamma must lie in [0, 1)")
        if not 0.0 <= p.tau_target <= 1.0:
            raise ConfigError("planner.tau_target must lie in [0, 1]")
        for name, task in (("env.sim_task", self.env.sim_task),
                           ("env.real_task", self.env.real_task), ("eval.task", v.task)):
            if task not in TASKS:
                raise ConfigError(f"{name}: unknown task {task!r}; choose from {TASKS}")
        try:
            self.gap()
            self.real_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    # ------------------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"seed": str(self.seed)}
        for section in SECTIONS:
            block = getattr(self, section)
            cp[section] = {f.name: _format(getattr(block, f.name)) for f in fields(block)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls()
        for name in cp.sections():
            if name == "experiment":
                for key, raw in cp[name].items():
                    if key != "seed":
                        raise ConfigError(f"unknown key experiment.{key}")
                    cfg.seed = _parse(raw, int, "experiment.seed")
                continue
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]")
            block = getattr(cfg, name)
            types = {f.name: type(f.default) for f in fields(block)}
            for key, raw in cp[name].items():
                if key not in types:
                    raise ConfigError(f"unknown key {name}.{key}")
                setattr(block, key, _parse(raw, types[key], f"{name}.{key}"))
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_ini(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_ini())

    def digest(self) -> str:
        """SHA-256 of the canonical INI text."""
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


SECTIONS = ("env", "spectral", "planner", "train", "eval")


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw, kind, name):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if kind is tuple:
            return tuple(_number(x) for x in raw.split(",") if x.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from exc


def _number(text):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)
