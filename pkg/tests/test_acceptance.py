"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v -s``) or directly as a
script (``python tests/test_acceptance.py``), which prints the twelve lines
and exits non-zero if any check fails. Criterion 11 trains four seeds end to
end and takes about ten minutes on one CPU core.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_actor  # noqa: E402
from test_mellinger import CFG, oracle_control, random_case, rollout_objective  # noqa: E402
from test_pipeline import tiny_config  # noqa: E402
from test_planner import anchored_training  # noqa: E402

from skilltransfer import mellinger as mel  # noqa: E402
from skilltransfer import numkit as nk  # noqa: E402
from skilltransfer import quadsim as qs  # noqa: E402
from skilltransfer.numkit.gradcheck import max_relative_error, numerical_grad  # noqa: E402
from skilltransfer.pipeline import (ExperimentConfig, evaluate, speder_train,  # noqa: E402
                                    steady_transfer)
from skilltransfer.pipeline import cli, oracle_suite  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
TRANSFER_CONFIG = ROOT / "configs" / "sim2sim.ini"
TRANSFER_SEEDS = (0, 1, 2, 3)
TRANSFER_LIMIT_S = 30 * 60


def _scaled_gap(grads, numeric):
    """``max |a - b| / max(|a|, |b|)`` over all arrays; unlike the entrywise check it has no floor."""
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(grads, numeric))
    scale = max(max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
                for a, b in zip(grads, numeric))
    return gap / scale


def _line(number, title, ok, detail):
    return f"criterion {number:>2} {title}: {'PASS' if ok else 'FAIL'} ({detail})"


# ----------------------------------------------------------------------
# the twelve checks, each returning (passed, detail)


def check_1():
    return oracle_suite.check_exact_recovery()


def check_2():
    return oracle_suite.check_linear_q()


def check_3():
    return oracle_suite.check_surrogate_gradient()


def check_4():
    return oracle_suite.check_residual_recovery()


def check_5():
    return oracle_suite.check_penalty_efficacy()


def check_6():
    return oracle_suite.check_td_soundness()


def check_7():
    actor, anchor, _ = anchored_training(1e6)
    pin = float(np.linalg.norm(actor.gains.values() - anchor.gains.values()))
    kls = [anchored_training(t)[2] for t in (0.0, 1.0, 10.0, 100.0)]
    monotone = all(a >= b for a, b in zip(kls, kls[1:]))
    kl_text = ", ".join(f"{k:.1e}" for k in kls)
    return pin <= 1e-3 and monotone, f"gain displacement {pin:.1e}; KL over weights 0..100: {kl_text}"


def check_8():
    rng = np.random.default_rng(7)
    mlp = nk.Mlp([4, 8, 8, 2], rng)
    x, y = rng.normal(size=(6, 4)), rng.normal(size=(6, 2))

    def loss():
        return nk.mean((mlp(x) - y) ** 2)

    nk.zero_grad(mlp.parameters())
    loss().backward()
    numeric = numerical_grad(lambda: loss().data, mlp.parameters(), eps=1e-5)
    mlp_err = max(max_relative_error(p.grad, g) for p, g in zip(mlp.parameters(), numeric))

    params = qs.PhysicalParams()
    actor = make_actor(3)
    s0 = qs.reset(params, np.random.default_rng(7))
    s0.motor_forces = np.full(4, params.mass * params.gravity / 4)
    noise = np.random.default_rng(8).standard_normal((10, 4))
    goal = np.array([0.1, -0.1, 1.0])
    theta = actor.gains.theta
    nk.zero_grad(actor.parameters())
    rollout_objective(actor, params, s0, noise, goal).backward()
    (num,) = numerical_grad(lambda: nk.value(rollout_objective(actor, params, s0, noise, goal)),
                            [theta], eps=1e-6)
    roll_err = max_relative_error(theta.grad, num)
    ok = mlp_err < 1e-3 and roll_err < 1e-3 and np.any(theta.grad != 0)
    mlp_gap = _scaled_gap([p.grad for p in mlp.parameters()], numeric)
    roll_gap = _scaled_gap([theta.grad], [num])
    return ok, (f"entrywise rel. error MLP {mlp_err:.1e}, 10-step rollout gains {roll_err:.1e}; "
                f"scaled gap {mlp_gap:.1e} and {roll_gap:.1e}")


def check_9():
    mem = mel.ControllerMemory()
    ref = mel.Reference(np.array([0, 0, 1.0]))
    ctx = mel.control_context(np.array([0, 0, 1.0]), np.zeros(3), np.array([1.0, 0, 0, 0]),
                              np.zeros(3), ref, mem)
    action, _, r_des, f_des = mel.control_law(ctx, mel.MellingerGains().values(), CFG)
    hover = (np.array_equal(f_des, [0, 0, CFG.mass * CFG.gravity])
             and np.array_equal(r_des, np.eye(3)) and not np.any(action[1:]))

    q = qs.euler_to_quat(0.0, 0.0, 0.7)
    ctx = mel.control_context(np.zeros(3), np.zeros(3), q, np.zeros(3),
                              mel.Reference(np.zeros(3), yaw=0.7), mel.ControllerMemory())
    action, _, _, _ = mel.control_law(ctx, mel.MellingerGains().values(), CFG)
    zero_att = bool(np.max(np.abs(action[1:])) <= 1e-15)

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        (p, v, q, w), ref, gains = random_case(rng)
        mem = mel.ControllerMemory()
        omem = {"has": False, **{f"{a}_{k}": [0.0] * 3 for a in ("int", "prev") for k in "pvRw"}}
        for _step in range(3):
            got = mel.compute_control(p, v, q, w, ref, gains, mem, CFG)
            want, omem = oracle_control(p, v, q, w, ref, gains.as_dict(), omem, CFG)
            worst = max(worst, float(np.max(np.abs(np.asarray(got) - want))))
            p = p + 0.01 * rng.normal(size=3)
            w = w + 0.1 * rng.normal(size=3)

    rot_err = 0.0
    for _ in range(200):
        f = rng.normal(size=3)
        r_cur = qs.quat_to_rotation(qs.euler_to_quat(*rng.uniform(-1, 1, size=3)))
        r = mel.desired_rotation(f, rng.uniform(-np.pi, np.pi), r_cur)
        rot_err = max(rot_err, np.linalg.norm(r.T @ r - np.eye(3)), abs(np.linalg.det(r) - 1),
                      np.max(np.abs(r[:, 2] - f / np.linalg.norm(f))))
    ok = hover and zero_att and worst <= 1e-9 and rot_err <= 1e-9
    return ok, (f"hover {'exact' if hover else 'inexact'}, zero attitude error "
                f"{'exact' if zero_att else 'inexact'}, oracle gap {worst:.1e}, "
                f"rotation defect {rot_err:.1e}")


def check_10():
    identity = np.array_equal(qs.motor_mix(np.array([1.0, 0, 0, 0])), [1, 1, 1, 1])
    roll = np.max(np.abs(qs.motor_mix(np.array([1.0, 0.2, 0, 0])) - [0.9, 0.9, 1.1, 1.1]))
    rng = np.random.default_rng(0)
    thrust = 0.0
    for _ in range(1000):
        u = np.concatenate([rng.uniform(0.5, 1.5, 1), rng.uniform(-0.3, 0.3, 3)])
        thrust = max(thrust, abs(np.sum(qs.motor_mix(u)) - 4 * u[0]))
    ok = identity and roll <= 1e-15 and thrust <= 1e-12
    return ok, f"identity {'exact' if identity else 'inexact'}, roll gap {roll:.1e}, " \
               f"thrust gap {thrust:.1e}"


def transfer_trial(cfg):
    """Zero-shot, STEADY and ablation on the gapped vehicle; ``{name: (error, return)}``."""
    def score(agent):
        ep = evaluate(agent, "figure8", 10, cfg.seed, environment="real")
        return float(ep.tracking_error.mean()), float(ep.returns.mean())

    sim = speder_train(cfg)
    out = {"zero-shot": score(sim), "steady": score(steady_transfer(cfg, sim))}
    cfg.train.skill_transfer_only = True
    out["ablation"] = score(steady_transfer(cfg, sim))
    cfg.train.skill_transfer_only = False
    return out


def check_11():
    start = time.perf_counter()
    wins, parts = 0, []
    for seed in TRANSFER_SEEDS:
        cfg = ExperimentConfig.load(TRANSFER_CONFIG)
        cfg.seed = seed
        r = transfer_trial(cfg)
        (e, g), others = r["steady"], [r["zero-shot"], r["ablation"]]
        won = all(e < oe and g > og for oe, og in others)
        wins += won
        parts.append(f"seed {seed} {'win' if won else 'loss'}: error steady/zero-shot/ablation "
                     f"{e:.4f}/{r['zero-shot'][0]:.4f}/{r['ablation'][0]:.4f} m")
    elapsed = time.perf_counter() - start
    ok = wins >= 3 and elapsed <= TRANSFER_LIMIT_S
    return ok, f"{wins}/4 seeds, {elapsed / 60:.1f} min; " + "; ".join(parts)


def check_12(root=None):
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        tiny_config(seed=5).save(root / "tiny.ini")
        outputs = []
        for run in ("a", "b"):
            out = root / run
            codes = [
                cli.main(["train-sim", "--config", str(root / "tiny.ini"), "--out", str(out)]),
                cli.main(["transfer", "--checkpoint", str(out / "sim.ckpt"), "--out", str(out)]),
                cli.main(["eval", "--checkpoint", str(out / "real.ckpt"), "--out", str(out)]),
            ]
            if any(codes):
                return False, f"run {run} exit codes {codes}"
            outputs.append({name: (out / name).read_bytes() for name in
                            ("metrics_sim.csv", "metrics_real.csv", "metrics_eval.csv")})
    same = [k for k in outputs[0] if outputs[0][k] == outputs[1][k]]
    return len(same) == 3, f"byte-identical: {', '.join(same) or 'none'}"


CRITERIA = (
    (1, "exact spectral recovery", check_1),
    (2, "linear-Q representation", check_2),
    (3, "surrogate gradient equivalence", check_3),
    (4, "residual recovery", check_4),
    (5, "orthogonality penalty efficacy", check_5),
    (6, "TD soundness", check_6),
    (7, "KL anchoring", check_7),
    (8, "gradient hygiene", check_8),
    (9, "Mellinger correctness", check_9),
    (10, "power distribution", check_10),
    (11, "sim-to-sim transfer", check_11),
    (12, "CLI determinism", check_12),
)


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(number, title, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
