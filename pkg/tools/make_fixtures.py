"""Regenerate the shipped tabular-MDP fixtures and the frozen reference values.

Run from the repository root: ``python3 tools/make_fixtures.py``.
"""
import json
from pathlib import Path

import numpy as np

from skilltransfer import oracle

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "src" / "skilltransfer" / "oracle" / "fixtures"
FROZEN = ROOT / "tests" / "data" / "frozen_values.json"


def chain2():
    # action 0 stays, action 1 switches; staying pays 1
    P = np.zeros((2, 2, 2))
    for s in range(2):
        P[s, 0, s] = 1.0
        P[s, 1, 1 - s] = 1.0
    return oracle.TabularMDP(P, [[1.0, 0.0], [1.0, 0.0]], 0.9, [0.5, 0.5])


def deterministic():
    P = np.zeros((3, 2, 3))
    for s in range(3):
        P[s, 0, s] = 1.0
        P[s, 1, (s + 1) % 3] = 1.0
    return oracle.TabularMDP(P, [[0.0, 0.5], [0.2, 0.0], [1.0, -1.0]], 0.8, [1.0, 0.0, 0.0])


def policy_iteration(mdp):
    """Q* by exact policy iteration (linear solves, no value iteration)."""
    policy = np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)
    while True:
        q = oracle.exact_policy_q(mdp, policy)
        nxt = oracle.greedy_policy(q)
        if np.array_equal(nxt, policy):
            return q
        policy = nxt


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    fixtures = {
        "chain2": chain2(),
        "deterministic_3x2": deterministic(),
        "single_state": oracle.TabularMDP(np.ones((1, 1, 1)), [[1.0]], 0.9, [1.0]),
        "random_5x3": oracle.TabularMDP.random(np.random.default_rng(5), 5, 3, gamma=0.9),
        "enum_4x2": oracle.TabularMDP.random(np.random.default_rng(4), 4, 2, gamma=0.9),
    }
    sim = oracle.low_rank_mdp(np.random.default_rng(8), 8, 3, rank=3, gamma=0.9)
    real, _, _ = oracle.planted_residual(np.random.default_rng(9), sim)
    fixtures["planted_sim_8x3"] = sim
    fixtures["planted_real_8x3"] = real
    for name, mdp in fixtures.items():
        mdp.save(FIXTURES / f"{name}.json")

    # frozen values, each computed by a route independent of the one under test
    rnd = fixtures["random_5x3"]
    q_star = policy_iteration(rnd)
    uniform = np.full((5, 3), 1 / 3)
    frozen = {
        "random_5x3": {
            "q_star": q_star.tolist(),
            "q_uniform": oracle.exact_policy_q(rnd, uniform).tolist(),
        },
        "planted_8x3": {
            "residual_singular_values": oracle.jacobi_svd(
                oracle.residual_matrix(real, sim))[1][:3].tolist(),
        },
    }
    FROZEN.parent.mkdir(parents=True, exist_ok=True)
    FROZEN.write_text(json.dumps(frozen, indent=1))


if __name__ == "__main__":
    main()
