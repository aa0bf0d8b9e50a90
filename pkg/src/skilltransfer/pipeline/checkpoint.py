"""Agent container and its single-file binary checkpoint.

Layout (little-endian)::

    magic    b"STCK"
    version  uint32 (currently 1)
    hlen     uint32, then hlen bytes of UTF-8 JSON:
             {stage, config_hash, config, counters, arrays: [[name, shape], ...]}
    payload  the arrays in header order, each as raw float64

``config`` is the full INI text, so a checkpoint rebuilds its own networks.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .. import mellinger as mel
from .. import quadsim as qs
from ..planner import LinearQ, TargetQ
from ..spectral import FeaturePair
from .config import ExperimentConfig
from .streams import stream

MAGIC = b"STCK"
VERSION = 1
STAGES = ("simulator", "real")


class CheckpointError(ValueError):
    """Unreadable checkpoint or one from the wrong stage."""


@dataclass
class Agent:
    config: ExperimentConfig
    stage: str
    sim: FeaturePair
    actor: mel.StochasticActor
    q: LinearQ
    target: TargetQ
    residual: FeaturePair | None = None
    anchor: mel.StochasticActor | None = None
    counters: dict = field(default_factory=dict)

    # ------------------------------------------------------------------
    def named_arrays(self):
        out = {}
        for prefix, pair in (("sim", self.sim), ("res", self.residual)):
            if pair is None:
                continue
            for net in ("phi_net", "mu_net"):
                for i, p in enumerate(getattr(pair, net).parameters()):
                    out[f"{prefix}.{net}.{i}"] = p.data
        for prefix, actor in (("actor", self.actor), ("anchor", self.anchor)):
            if actor is None:
                continue
            out[f"{prefix}.theta"] = actor.gains.theta.data
            for i, p in enumerate(actor.log_std_head.parameters()):
                out[f"{prefix}.log_std.{i}"] = p.data
        for i, p in enumerate(self.q.parameters()):
            out[f"q.w.{i}"] = p.data
        for i, a in enumerate(self.target.arrays()):
            out[f"target.w.{i}"] = a
        return out

    def load_arrays(self, arrays):
        mine = self.named_arrays()
        if set(mine) != set(arrays):
            raise CheckpointError("checkpoint arrays do not match the configured agent")
        for name, dst in mine.items():
            src = arrays[name]
            if src.shape != dst.shape:
                raise CheckpointError(f"{name}: shape {src.shape} != {dst.shape}")
            dst[...] = src


def _feature_pair(cfg: ExperimentConfig, dim, rng):
    return FeaturePair(qs.OBS_WIDTH, 4, dim, rng, cfg.spectral.hidden, obs_scale=qs.OBS_SCALE)


def build_agent(cfg: ExperimentConfig, stage="simulator", with_residual=None):
    """Freshly initialized agent for ``stage`` (weights drawn from the ``init`` stream)."""
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage {stage!r}")
    rng = stream(cfg.seed, "init", STAGES.index(stage))
    ctrl = mel.ControllerConfig.from_params(cfg.sim_params())
    sim = _feature_pair(cfg, cfg.spectral.d, rng)
    actor = mel.StochasticActor(qs.OBS_WIDTH, ctrl, rng, init_log_std=cfg.planner.init_log_std,
                                obs_scale=qs.OBS_SCALE)
    if with_residual is None:
        with_residual = stage == "real" and not cfg.train.skill_transfer_only
    residual = _feature_pair(cfg, cfg.spectral.s, rng) if with_residual else None
    anchor = actor.copy() if stage == "real" else None
    if stage == "real":
        sim.freeze()
    q = LinearQ(sim, residual)
    return Agent(cfg, stage, sim, actor, q, TargetQ(q), residual, anchor, {})


def save_checkpoint(agent: Agent, path):
    arrays = agent.named_arrays()
    header = json.dumps({
        "stage": agent.stage, "config_hash": agent.config.digest(),
        "config": agent.config.to_ini(), "counters": agent.counters,
        "residual": agent.residual is not None,
        "arrays": [[k, list(v.shape)] for k, v in arrays.items()],
    }).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read_checkpoint(path):
    """``(header dict, {name: array})`` without building an agent."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint")
    version, hlen = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(blob[12:12 + hlen])
    off = 12 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        if off + 8 * count > len(blob):
            raise CheckpointError(f"{path} is truncated")
        arrays[name] = np.frombuffer(blob, "<f8", count, off).reshape(shape).astype(float)
        off += 8 * count
    if off != len(blob):
        raise CheckpointError(f"{path} has trailing bytes")
    return header, arrays


def load_checkpoint(path, expect_stage=None) -> Agent:
    header, arrays = read_checkpoint(path)
    if expect_stage is not None and header["stage"] != expect_stage:
        raise CheckpointError(
            f"{path} is a {header['stage']!r} checkpoint; expected {expect_stage!r}")
    cfg = ExperimentConfig.from_ini(header["config"])
    if cfg.digest() != header["config_hash"]:
        raise CheckpointError(f"{path}: config hash mismatch")
    agent = build_agent(cfg, header["stage"], with_residual=header["residual"])
    agent.load_arrays(arrays)
    agent.counters = dict(header["counters"])
    return agent
