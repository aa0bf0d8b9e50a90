"""Batched closed-loop episodes with transition capture."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import mellinger as mel
from .. import quadsim as qs
from .tasks import Task


@dataclass
class Episodes:
    """Outcome of ``n`` parallel episodes.

    Arrays with a time axis are ``(T, n, ...)``; ``positions[k]`` and
    ``targets[k]`` are the state and reference after step ``k``.
    """

    returns: np.ndarray
    tracking_error: np.ndarray
    faulted: np.ndarray
    positions: np.ndarray
    targets: np.ndarray
    quaternions: np.ndarray
    velocities: np.ndarray
    omegas: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    transitions: dict | None = None

    def write_trajectory(self, path, row=0, rate=qs.CONTROL_RATE):
        times = np.arange(1, self.positions.shape[0] + 1) / rate
        qs.write_trajectory(path, times, self.positions[:, row], self.quaternions[:, row],
                            self.velocities[:, row], self.omegas[:, row], self.actions[:, row],
                            self.rewards[:, row])


def run_episodes(env: qs.QuadEnv, actor: mel.StochasticActor, task: Task, noise_rng=None,
                 stochastic=True, collect=False):
    """Roll ``env.n_envs`` vehicles through ``task``.

    With ``stochastic`` the actor samples (noise from ``noise_rng``); otherwise
    it applies its squashed mean. Rewards use the true post-step state
    against the reference at the next time. With ``collect`` the returned
    ``transitions`` hold fault-free rows only (a faulted vehicle's whole
    episode is discarded).
    """
    n = env.n_envs
    params = env.params
    dt = params.dt
    env.reset(mean_position=task.start)
    mem = mel.ControllerMemory.zeros(n)
    u_last = np.zeros((n, 4))
    steps = task.steps
    log = {k: [] for k in ("pos", "tgt", "quat", "vel", "omega", "act", "rew")}
    trans = {k: [] for k in ("obs", "ctx", "act", "rew")} if collect else None

    def sense(t):
        ref = task.reference(t)
        m = env.measure()
        ctx = mel.control_context(m.position, m.velocity, m.quaternion, m.angular_velocity, ref,
                                  mem)
        obs = qs.build_observation(m, ref.position, u_last, mem, params)
        return np.asarray(obs), np.asarray(ctx)

    obs, ctx = sense(0.0)
    for k in range(steps):
        noise = (noise_rng.standard_normal((n, 4)) if stochastic else np.zeros((n, 4)))
        try:
            action, _, memory, r_des = actor.act(obs, ctx, noise, differentiable=False,
                                                 previous_rotation=mem.last_rotation)
        except mel.SingularThrust as exc:
            raise qs.SimulationFault(f"controller singular at step {k}") from exc
        action = np.asarray(action)
        mem.absorb(memory, r_des)
        env.step(action)
        goal = task.reference((k + 1) * dt).position
        s = env.state
        rew = np.asarray(qs.reward(s, action, goal))
        if collect:
            trans["obs"].append(obs)
            trans["ctx"].append(ctx)
            trans["act"].append(action)
            trans["rew"].append(rew)
        for key, val in (("pos", s.position), ("quat", s.quaternion), ("vel", s.velocity),
                         ("omega", s.angular_velocity), ("act", action), ("rew", rew)):
            log[key].append(np.array(val))
        log["tgt"].append(np.broadcast_to(goal, (n, 3)).copy())
        u_last = action
        obs, ctx = sense((k + 1) * dt)
        if collect:
            trans.setdefault("next_obs", []).append(obs)
            trans.setdefault("next_ctx", []).append(ctx)

    arr = {k: np.stack(v) for k, v in log.items()}
    faulted = env.faulted.copy()
    out = Episodes(returns=arr["rew"].sum(axis=0),
                   tracking_error=np.linalg.norm(arr["pos"] - arr["tgt"], axis=-1).mean(axis=0),
                   faulted=faulted, positions=arr["pos"], targets=arr["tgt"],
                   quaternions=arr["quat"], velocities=arr["vel"], omegas=arr["omega"],
                   actions=arr["act"], rewards=arr["rew"])
    if collect:
        keep = ~faulted
        out.transitions = {}
        for key, seq in trans.items():
            a = np.stack(seq)[:, keep]  # (T, kept, w)
            out.transitions[key] = a.reshape((-1,) + a.shape[2:])
        m = out.transitions["rew"].shape[0]
        # time-limit truncation is not termination: every stored step bootstraps
        out.transitions["done"] = np.zeros(m)
    return out
