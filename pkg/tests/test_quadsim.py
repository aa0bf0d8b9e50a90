import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skilltransfer import quadsim as qs


@pytest.fixture
def params():
    return qs.PhysicalParams()


def test_motor_mix_identity_case():
    np.testing.assert_array_equal(qs.motor_mix(np.array([1.0, 0, 0, 0])), [1, 1, 1, 1])


def test_motor_mix_roll_substitution():
    np.testing.assert_allclose(qs.motor_mix(np.array([1.0, 0.2, 0, 0])), [0.9, 0.9, 1.1, 1.1],
                               rtol=0, atol=1e-15)


@settings(max_examples=50)
@given(st.lists(st.floats(-0.3, 0.3), min_size=3, max_size=3), st.floats(0.5, 1.5))
def test_motor_mix_conserves_thrust(moments, fz):
    f = qs.motor_mix(np.array([fz, *moments]))
    assert np.sum(f) == pytest.approx(4 * fz, abs=1e-12)


def test_motor_mix_saturates():
    f = qs.motor_mix(np.array([3.0, 0, 0, 0]), max_force=2.0)
    np.testing.assert_array_equal(f, [2, 2, 2, 2])


def test_free_fall(params):
    s = qs.QuadState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3),
                     np.zeros(4))
    for k in range(1, 6):
        s = qs.step(s, np.zeros(4), params)
        assert s.velocity[2] == pytest.approx(-k * params.gravity * params.dt, rel=1e-12)


def test_hover_equilibrium(params):
    s = qs.QuadState.hover(params)
    start = s.copy()
    for _ in range(240):
        s = qs.step(s, np.array([params.hover_command, 0, 0, 0]), params)
    np.testing.assert_allclose(s.position, start.position, atol=1e-12)
    np.testing.assert_allclose(s.velocity, 0.0, atol=1e-12)


def _rollout(state, action, params, steps, dt):
    for _ in range(steps):
        state = qs.step(state, action, params, dt=dt)
    return state


def test_fine_step_integration_oracle(params):
    # near-hover manoeuvre: slight climb with small roll/pitch torque
    s0 = qs.QuadState.hover(params)
    s0.angular_velocity = np.array([0.1, -0.05, 0.02])
    action = np.array([1.02, 0.004, -0.003, 0.001])
    coarse = _rollout(s0.copy(), action, params, 100, params.dt)
    fine = _rollout(s0.copy(), action, params, 1000, params.dt / 10)
    assert np.linalg.norm(coarse.position - fine.position) < 1e-3


def test_quaternion_norm_preserved(params):
    rng = np.random.default_rng(0)
    s = qs.reset(params, rng)
    for _ in range(480):
        s = qs.step(s, np.array([1.0, *rng.normal(scale=0.05, size=3)]), params)
        assert abs(np.linalg.norm(s.quaternion) - 1.0) < 1e-9
        assert np.all(s.motor_forces >= 0) and np.all(s.motor_forces <= params.max_force_newton)


def test_non_finite_state_raises(params):
    s = qs.QuadState.hover(params)
    with pytest.raises(qs.SimulationFault):
        qs.step(s, np.array([np.nan, 0, 0, 0]), params)


def _state(position=(0, 0, 1.0), rpy=(0, 0, 0)):
    return qs.QuadState(np.array(position, dtype=float), qs.euler_to_quat(*rpy), np.zeros(3),
                        np.zeros(3), np.zeros(4))


def test_reward_at_goal():
    assert qs.reward(_state(), np.zeros(4), np.array([0, 0, 1.0])) == pytest.approx(2.0)


def test_reward_position_term():
    r = qs.reward(_state((0.4, 0, 1.0)), np.zeros(4), np.array([0, 0, 1.0]))
    assert r == pytest.approx(1.0)


def test_reward_tilt_term():
    r = qs.reward(_state(rpy=(0.2, 0.2, 0.0)), np.zeros(4), np.array([0, 0, 1.0]))
    assert r == pytest.approx(2 - 1.5 * np.sqrt(0.08), abs=1e-12)
    assert r == pytest.approx(1.5757, abs=1e-4)


def test_euler_round_trip():
    rng = np.random.default_rng(3)
    angles = rng.uniform(-1.2, 1.2, size=(50, 3))
    back = qs.quat_to_euler(qs.euler_to_quat(angles[:, 0], angles[:, 1], angles[:, 2]))
    np.testing.assert_allclose(np.stack(back, axis=-1), angles, atol=1e-12)


def test_reset_statistics(params):
    s = qs.reset(params, np.random.default_rng(0), n=100_000)
    se = np.sqrt(0.02 / 100_000)
    assert np.all(np.abs(s.position.mean(axis=0) - [0, 0, 1]) < 3 * se)
    rpy = np.degrees(np.stack(qs.quat_to_euler(s.quaternion), axis=-1))
    assert np.all(np.abs(rpy.std(axis=0) / 5.0 - 1.0) < 0.05)
    assert np.all(s.velocity == 0) and np.all(s.motor_forces == 0)


def test_reset_deterministic(params):
    a = qs.reset(params, np.random.default_rng(5))
    b = qs.reset(params, np.random.default_rng(5))
    for x, y in zip(a.fields(), b.fields()):
        np.testing.assert_array_equal(x, y)


def test_apply_gap_zero(params):
    assert qs.apply_gap(params, qs.GapSpec()) == params


def test_apply_gap_payload(params):
    assert qs.apply_gap(params, qs.GapSpec(added_mass=0.006)).mass == pytest.approx(0.033)


def test_apply_gap_single_motor(params):
    out = qs.apply_gap(params, qs.GapSpec(efficiency_multipliers=(1, 1, 0.85, 1)))
    assert out.motor_efficiency == (1.0, 1.0, 0.85, 1.0)
    assert out.inertia == params.inertia


def test_apply_gap_is_pure(params):
    gap = qs.GapSpec(0.006, (1, 1, 0.85, 1), 0.005, 2)
    assert qs.apply_gap(params, gap) == qs.apply_gap(params, gap)


def test_apply_gap_rejects_non_positive_mass(params):
    with pytest.raises(qs.ParameterError):
        qs.apply_gap(params, qs.GapSpec(added_mass=-0.027))


def test_params_validation():
    with pytest.raises(qs.ParameterError):
        qs.PhysicalParams(motor_efficiency=(1, 1, 1.3, 1))
    with pytest.raises(qs.ParameterError):
        qs.PhysicalParams(mass=0.0)


class _Mem:
    def __init__(self):
        self.integral = {k: np.zeros(3) for k in "pvRw"}
        self.difference = {k: np.zeros(3) for k in "pvRw"}


def test_observe_at_goal(params):
    obs = qs.observe(_state(), np.zeros(4), _Mem(), params, np.random.default_rng(0))
    assert obs.shape == (qs.OBS_WIDTH,)
    lay = qs.OBS_LAYOUT
    np.testing.assert_array_equal(obs[lay["rel_pos"]], 0)
    np.testing.assert_array_equal(obs[lay["quat"]], [1, 0, 0, 0])
    np.testing.assert_array_equal(obs[lay["rpy"]], 0)


def test_observe_noise_free_is_deterministic(params):
    s = qs.reset(params, np.random.default_rng(1))
    a = qs.observe(s, np.ones(4), _Mem(), params, np.random.default_rng(2))
    b = qs.observe(s, np.ones(4), _Mem(), params, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_observe_position_noise_std(params):
    noisy = qs.PhysicalParams(obs_noise_std=(0.01,) * 3 + (0.0,) * 9)
    n = 100_000
    s = qs.QuadState(np.tile([0, 0, 1.0], (n, 1)), np.tile([1.0, 0, 0, 0], (n, 1)),
                     np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 4)))
    obs = qs.observe(s, np.zeros(4), _Mem(), noisy, np.random.default_rng(0))
    std = obs[:, qs.OBS_LAYOUT["rel_pos"]].std(axis=0)
    assert np.all(np.abs(std / 0.01 - 1) < 0.05)


def test_zero_gap_real_and_sim_rollouts_identical(params):
    real = qs.apply_gap(params, qs.GapSpec())
    runs = []
    for p in (params, real):
        env = qs.QuadEnv(p, np.random.default_rng(9), n_envs=3)
        env.reset()
        rng = np.random.default_rng(4)
        for _ in range(50):
            env.step(np.column_stack([np.ones(3), rng.normal(scale=0.02, size=(3, 3))]))
        runs.append(np.concatenate([x.ravel() for x in env.state.fields()]))
    np.testing.assert_array_equal(runs[0], runs[1])


def test_env_delay_fifo(params):
    delayed = qs.apply_gap(params, qs.GapSpec(delay_steps=2))
    env = qs.QuadEnv(delayed, np.random.default_rng(0), n_envs=1)
    env.reset()
    applied = [env.step(np.full((1, 4), float(k + 1)))[0, 0] for k in range(4)]
    assert applied == [0.0, 0.0, 1.0, 2.0]


def test_env_flags_faults_and_freezes_row(params):
    env = qs.QuadEnv(params, np.random.default_rng(0), n_envs=2)
    env.reset()
    before = env.state.copy()
    env.step(np.array([[np.nan, 0, 0, 0], [1.0, 0, 0, 0]]))
    assert env.faulted.tolist() == [True, False]
    np.testing.assert_array_equal(env.state.position[0], before.position[0])


def test_trajectory_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = np.arange(5) / 240.0
    cols = [rng.normal(size=(5, k)) for k in (3, 4, 3, 3, 4)]
    r = rng.normal(size=5)
    path = tmp_path / "traj.csv"
    qs.write_trajectory(path, t, *cols, r)
    text = path.read_text().splitlines()
    assert text[0] == ",".join(qs.TRAJECTORY_HEADER)
    back = qs.read_trajectory(path)
    np.testing.assert_allclose(back["px"], cols[0][:, 0], rtol=1e-8)
    np.testing.assert_allclose(back["reward"], r, rtol=1e-8)
