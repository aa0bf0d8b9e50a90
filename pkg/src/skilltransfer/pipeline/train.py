"""Simulator stage, real-world stage and evaluation."""
from __future__ import annotations

import logging
import math

import numpy as np

from .. import numkit as nk
from .. import quadsim as qs
from ..mellinger import CONTEXT_WIDTH
from ..planner import (TargetQ, ascend, policy_evaluation, policy_improvement,
                       policy_improvement_kl, soft_update)
from ..spectral import InsufficientData, ReplayBuffer, discovery_loss, feature_loss
from .checkpoint import Agent, build_agent, load_checkpoint
from .config import ExperimentConfig
from .metrics import MetricsWriter
from .rollout import run_episodes
from .streams import stream
from .tasks import make_task

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """A loss became non-finite; the run is aborted."""


def _checked(value, what):
    value = float(value)
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite {what}")
    return value


def _descend(loss, params, opt, what):
    nk.zero_grad(params)
    loss.backward()
    nk.adam_step(params, opt)
    return _checked(nk.value(loss), what)


class _Trainer:
    """Optimizer state and buffer sampling shared by both stages."""

    def __init__(self, agent: Agent, buffer: ReplayBuffer, batch_rng, noise_rng):
        cfg = agent.config
        self.agent, self.buffer = agent, buffer
        self.batch_rng, self.noise_rng = batch_rng, noise_rng
        self.cfg = cfg
        self.opt_feat = nk.AdamState(lr=cfg.spectral.learning_rate)
        self.opt_q = nk.AdamState(lr=cfg.planner.q_learning_rate)
        self.opt_actor = nk.AdamState(lr=cfg.planner.actor_learning_rate)

    def batch(self):
        s = self.cfg.spectral
        return self.buffer.sample_batch(s.batch_size, self.batch_rng, s.n_negatives)

    def feature_step(self):
        b, neg = self.batch()
        pair = self.agent.sim
        return _descend(feature_loss(pair, b["obs"], b["act"], b["next_obs"], neg),
                        pair.parameters(), self.opt_feat, "feature loss")

    def discovery_step(self):
        b, neg = self.batch()
        a = self.agent
        loss, violation = discovery_loss(a.sim, a.residual, b["obs"], b["act"], b["next_obs"], neg,
                                         self.cfg.spectral.penalty)
        return _descend(loss, a.residual.parameters(), self.opt_feat, "discovery loss"), violation

    def td_step(self):
        b, _ = self.batch()
        p, a = self.cfg.planner, self.agent
        loss = policy_evaluation(a.q, a.target, a.actor, b, p.gamma, p.tau, self.noise_rng)
        value = _descend(loss, a.q.parameters(), self.opt_q, "TD loss")
        soft_update(a.target, a.q, p.tau_target)
        return value

    def improvement_step(self):
        b, _ = self.batch()
        a, p = self.agent, self.cfg.planner
        noise = self.noise_rng.standard_normal((b["obs"].shape[0], 4))
        if a.anchor is None:
            obj = policy_improvement(a.actor, a.q, b["obs"], b["ctx"], noise, p.tau)
            kl = float("nan")
        else:
            obj, kl = policy_improvement_kl(a.actor, a.anchor, a.q, b["obs"], b["ctx"], noise,
                                            p.tau_pi)
        _checked(ascend(obj, a.actor.parameters(), self.opt_actor), "actor objective")
        return kl


def _add(buffer, tr):
    buffer.add(tr["obs"], tr["act"], tr["rew"], tr["next_obs"], tr["done"], ctx=tr["ctx"],
               next_ctx=tr["next_ctx"])


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else float("nan")


def speder_train(cfg: ExperimentConfig, metrics_path=None) -> Agent:
    """Simulator stage: collect, fit skills, evaluate linear Q, improve the actor.

    Runs until ``train.sim_transitions`` transitions have been collected.
    Each collection round of ``train.n_envs`` parallel episodes is one
    metrics row.
    """
    agent = build_agent(cfg, "simulator")
    t = cfg.train
    env = qs.QuadEnv(cfg.sim_params(), stream(cfg.seed, "env", 0), n_envs=t.n_envs)
    task = make_task(cfg.env.sim_task)
    buffer = ReplayBuffer(t.buffer_capacity, qs.OBS_WIDTH, 4, ctx_dim=CONTEXT_WIDTH)
    trainer = _Trainer(agent, buffer, stream(cfg.seed, "batch", 0),
                       stream(cfg.seed, "actor_noise", 0))
    writer = MetricsWriter(metrics_path) if metrics_path else None
    collected, episode, faults = 0, 0, 0
    try:
        while collected < t.sim_transitions:
            try:
                ep = run_episodes(env, agent.actor, task, trainer.noise_rng, collect=True)
            except qs.SimulationFault as exc:
                faults += t.n_envs
                log.warning("episode %d discarded: %s", episode, exc)
                episode += 1
                continue
            faults += int(ep.faulted.sum())
            _add(buffer, ep.transitions)
            collected += t.n_envs * task.steps
            feat, td = [], []
            try:
                feat = [trainer.feature_step() for _ in range(t.sim_feature_steps)]
                td = [trainer.td_step() for _ in range(t.sim_td_steps)]
                for _ in range(t.sim_actor_steps):
                    trainer.improvement_step()
            except InsufficientData as exc:
                log.info("training deferred: %s", exc)
            if writer:
                writer.write(episode=episode, **{"return": float(ep.returns.mean())},
                             tracking_error=float(ep.tracking_error.mean()), td_loss=_mean(td),
                             disc_loss=_mean(feat))
            episode += 1
    finally:
        if writer:
            writer.close()
    agent.counters = {"transitions": collected, "episodes": episode, "faulted": faults}
    return agent


def init_transfer(cfg: ExperimentConfig, sim_agent: Agent) -> Agent:
    """Real-stage agent: frozen simulator skills, ``pi = pi_sim``, ``w1 = w_sim``, ``w2 = 0``."""
    if sim_agent.stage != "simulator":
        raise ValueError("transfer needs a simulator-stage checkpoint")
    agent = build_agent(cfg, "real")
    src = sim_agent.named_arrays()
    for dst_pair in (agent.sim,):
        for net in ("phi_net", "mu_net"):
            for i, p in enumerate(getattr(dst_pair, net).parameters()):
                p.data[...] = src[f"sim.{net}.{i}"]
    for actor in (agent.actor, agent.anchor):
        actor.gains.theta.data[...] = src["actor.theta"]
        for i, p in enumerate(actor.log_std_head.parameters()):
            p.data[...] = src[f"actor.log_std.{i}"]
    agent.q.w1.data[...] = sim_agent.q.w1.data
    agent.target = TargetQ(agent.q)
    return agent


def steady_transfer(cfg: ExperimentConfig, sim_agent: Agent, metrics_path=None) -> Agent:
    """Real stage on the gapped vehicle, one episode at a time.

    Per episode: roll out the current policy, take ``discovery_steps``
    residual-skill steps (skipped for the skill-transfer-only ablation),
    ``td_steps`` linear-Q steps and ``improvement_steps`` KL-anchored actor steps.
    """
    agent = init_transfer(cfg, sim_agent)
    t = cfg.train
    env = qs.QuadEnv(cfg.real_params(), stream(cfg.seed, "env", 1), n_envs=1)
    task = make_task(cfg.env.real_task)
    buffer = ReplayBuffer(t.buffer_capacity, qs.OBS_WIDTH, 4, ctx_dim=CONTEXT_WIDTH)
    trainer = _Trainer(agent, buffer, stream(cfg.seed, "batch", 1),
                       stream(cfg.seed, "actor_noise", 1))
    writer = MetricsWriter(metrics_path) if metrics_path else None
    faults = 0
    try:
        for episode in range(t.real_episodes):
            try:
                ep = run_episodes(env, agent.actor, task, trainer.noise_rng, collect=True)
            except qs.SimulationFault as exc:
                faults += 1
                log.warning("episode %d discarded: %s", episode, exc)
                continue
            faults += int(ep.faulted.sum())
            if ep.transitions["rew"].size:
                _add(buffer, ep.transitions)
            disc, viol, td, kls = [], [], [], []
            try:
                if agent.residual is not None:
                    for _ in range(t.discovery_steps):
                        loss, v = trainer.discovery_step()
                        disc.append(loss)
                        viol.append(v)
                td = [trainer.td_step() for _ in range(t.td_steps)]
                kls = [trainer.improvement_step() for _ in range(t.improvement_steps)]
            except InsufficientData as exc:
                log.info("training deferred: %s", exc)
            if writer:
                writer.write(episode=episode, **{"return": float(ep.returns.mean())},
                             tracking_error=float(ep.tracking_error.mean()), td_loss=_mean(td),
                             disc_loss=_mean(disc), constraint_violation=viol[-1] if viol else None,
                             kl=kls[-1] if kls else None)
    finally:
        if writer:
            writer.close()
    agent.counters = {"episodes": t.real_episodes, "faulted": faults,
                      "transitions": buffer.inserted}
    return agent


def evaluate(agent: Agent, task_name, episodes, seed, environment="real", metrics_path=None,
             trajectory_path=None):
    """Deterministic-mean rollouts of ``episodes`` vehicles in parallel.

    ``environment`` selects the configured gapped vehicle (``"real"``) or the
    nominal one (``"sim"``). Returns the :class:`~.rollout.Episodes`.
    """
    cfg = agent.config
    params = cfg.real_params() if environment == "real" else cfg.sim_params()
    task = make_task(task_name)
    env = qs.QuadEnv(params, stream(seed, "eval"), n_envs=episodes)
    ep = run_episodes(env, agent.actor, task, stochastic=False)
    if metrics_path:
        with MetricsWriter(metrics_path) as writer:
            for i in range(episodes):
                writer.write(episode=i, **{"return": float(ep.returns[i])},
                             tracking_error=float(ep.tracking_error[i]))
    if trajectory_path:
        ep.write_trajectory(trajectory_path)
    return ep


def load_for_transfer(path):
    return load_checkpoint(path, expect_stage="simulator")
