from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from flightcontrol_sac.agent import (
    AgentConfig,
    DiagnosticsRecorder,
    ReplayBuffer,
    SacAgent,
    Transition,
    TransitionBatch,
    attitude_agent_config,
    altitude_agent_config,
    critic_loss,
    load_checkpoint,
    policy_objective,
    policy_sample,
    q_value,
    save_checkpoint,
    soft_update,
    temperature_loss,
    train_step
)
from flightcontrol_sac.base import (
    CheckpointError,
    ConfigurationError,
    NumericError,
    QNetwork,
    TrainStatus,
    UsageError
)
from flightcontrol_sac.network import adam_step


def constant_network(params, values) -> None:
    """输出层权重清零，输出恒等于偏置"""
    params.weights[-1][:] = 0.0
    params.biases[-1][:] = values


def oracle_agent() -> SacAgent:
    """各网络输出为常数的小智能体"""
    agent = SacAgent(AgentConfig(n=2, m=1, hidden=1, seed=0))
    constant_network(agent.policy, [0.1, -0.5])
    constant_network(agent.q1, [0.5])
    constant_network(agent.q2, [0.7])
    constant_network(agent.q1_target, [0.4])
    constant_network(agent.q2_target, [0.6])
    return agent


def oracle_batch() -> TransitionBatch:
    return TransitionBatch.from_transitions([
        Transition(np.array([0.1, 0.2]), np.array([0.3]), -0.2, np.array([0.0, 0.1])),
        Transition(np.array([-0.4, 0.5]), np.array([-0.6]), -0.5, np.array([0.3, -0.2])),
        Transition(np.array([1.0, -1.0]), np.array([0.9]), -1.0, np.array([0.2, 0.2]), done=True),
    ])


def hand_log_prob(mu: float, log_std: float, noise: np.ndarray) -> np.ndarray:
    """不做数值稳定处理的对数密度"""
    std = np.exp(log_std)
    u = mu + std * noise
    return stats.norm.logpdf(u, mu, std) - np.log(1 - np.tanh(u) ** 2)


def test_config_validation():
    with pytest.raises(ConfigurationError, match="discount"):
        AgentConfig(n=2, m=1, gamma=1.2)
    with pytest.raises(ConfigurationError):
        AgentConfig(n=2, m=1, tau=1.0)
    with pytest.raises(ConfigurationError):
        AgentConfig(n=2, m=1, batch_size=64, buffer_capacity=10)
    with pytest.raises(ConfigurationError):
        AgentConfig(n=2, m=1, initial_eta=0.0)


def test_presets():
    inner = attitude_agent_config()
    assert (inner.n, inner.m, inner.hidden) == (9, 3, 64)
    assert inner.target_entropy == -3.0
    assert inner.learning_rate(0) == pytest.approx(4e-4)
    assert inner.learning_rate(500_000) == pytest.approx(2e-4)
    assert inner.learning_rate(2_000_000) == 0.0

    outer = altitude_agent_config()
    assert (outer.n, outer.m, outer.hidden) == (2, 1, 32)
    assert outer.learning_rate(10 ** 6) == pytest.approx(3e-4)


def test_network_shapes(small_agent: SacAgent):
    assert small_agent.policy.input_width == 2
    assert small_agent.policy.output_width == 2
    assert small_agent.q1.input_width == 3
    assert small_agent.q1.output_width == 1
    for a, b in zip(small_agent.q1.arrays(), small_agent.q1_target.arrays()):
        np.testing.assert_array_equal(a, b)
        assert a is not b


def test_same_seed_same_networks():
    a = SacAgent(AgentConfig(n=3, m=2, hidden=4, seed=11))
    b = SacAgent(AgentConfig(n=3, m=2, hidden=4, seed=11))
    for name in ("policy", "q1", "q2"):
        for x, y in zip(a.networks()[name].arrays(), b.networks()[name].arrays()):
            np.testing.assert_array_equal(x, y)


def test_replay_buffer_fifo():
    buffer = ReplayBuffer(3, 1, 1)
    for i in range(5):
        buffer.add(Transition(np.array([i]), np.array([0.0]), float(i), np.array([i + 1])))

    assert len(buffer) == 3
    assert buffer.total == 5
    assert [buffer.get(i).r for i in range(3)] == [2.0, 3.0, 4.0]

    with pytest.raises(UsageError):
        buffer.get(3)


def test_replay_buffer_validation():
    buffer = ReplayBuffer(4, 2, 1)
    with pytest.raises(UsageError):
        buffer.sample(2, np.random.default_rng(0))
    with pytest.raises(UsageError):
        buffer.add(Transition(np.zeros(2), np.array([1.5]), 0.0, np.zeros(2)))
    with pytest.raises(UsageError):
        buffer.add(Transition(np.zeros(3), np.array([0.0]), 0.0, np.zeros(2)))
    with pytest.raises(NumericError):
        buffer.add(Transition(np.zeros(2), np.array([0.0]), np.nan, np.zeros(2)))


def test_replay_buffer_sample_within_stored():
    buffer = ReplayBuffer(10, 1, 1)
    for i in range(4):
        buffer.add(Transition(np.array([i]), np.array([0.0]), 0.0, np.array([0.0])))

    batch = buffer.sample(200, np.random.default_rng(1))
    assert len(batch) == 200
    assert set(batch.states[:, 0]) <= {0.0, 1.0, 2.0, 3.0}


def test_replay_buffer_uniform_after_wraparound():
    buffer = ReplayBuffer(100, 1, 1)
    for i in range(250):
        buffer.add(Transition(np.array([i]), np.array([0.0]), 0.0, np.array([0.0])))

    assert buffer.get(0).s[0] == 150.0

    batch = buffer.sample(100_000, np.random.default_rng(11))
    counts = np.bincount(batch.states[:, 0].astype(int) - 150, minlength=100)
    assert len(counts) == 100
    assert stats.chisquare(counts).pvalue > 0.01


def test_deterministic_action_is_tanh_mean():
    agent = oracle_agent()
    action = agent.act(np.array([0.3, -0.3]), deterministic=True)
    np.testing.assert_allclose(action, np.tanh([0.1]), rtol=0, atol=1e-15)


def test_log_prob_matches_direct_formula():
    agent = oracle_agent()
    noise = np.array([[0.3], [-0.2], [1.0]])
    states = np.zeros((3, 2))

    actions, log_prob = policy_sample(agent, states, noise)

    expected = hand_log_prob(0.1, -0.5, noise[:, 0])
    np.testing.assert_allclose(log_prob, expected, rtol=1e-12)
    assert np.all(np.abs(actions) < 1)


def test_log_prob_finite_when_saturated():
    agent = oracle_agent()
    constant_network(agent.policy, [30.0, 0.0])

    action, log_prob = policy_sample(agent, np.zeros(2), np.array([0.5]))

    assert np.isfinite(log_prob)
    assert abs(action[0]) < 1
    expected = -0.5 * 0.25 - 0.5 * np.log(2 * np.pi) - (np.log(4.0) - 2 * 30.5)
    assert log_prob == pytest.approx(expected, rel=1e-9)


def test_log_std_clamped():
    agent = oracle_agent()
    constant_network(agent.policy, [0.0, 50.0])
    _, log_prob = policy_sample(agent, np.zeros(2), np.array([0.0]))
    assert log_prob == pytest.approx(-2.0 - 0.5 * np.log(2 * np.pi), rel=1e-12)


def test_q_value_single_and_batch(small_agent: SacAgent):
    s = np.array([[0.1, 0.2], [0.3, -0.1]])
    a = np.array([[0.5], [-0.5]])
    batch = q_value(small_agent, QNetwork.Q1, s, a)
    single = q_value(small_agent, QNetwork.Q1, s[1], a[1])
    assert batch.shape == (2,)
    assert single == pytest.approx(batch[1], rel=1e-12)


def test_losses_match_hand_oracle():
    agent = oracle_agent()
    batch = oracle_batch()
    noise = np.array([[0.3], [-0.2], [1.0]])
    log_prob = hand_log_prob(0.1, -0.5, noise[:, 0])
    eta, gamma = 1.0, 0.99

    target = batch.rewards + gamma * (1 - batch.dones) * (min(0.4, 0.6) - eta * log_prob)
    expected_critic = 0.5 * (np.mean((0.5 - target) ** 2) + np.mean((0.7 - target) ** 2))
    expected_policy = np.mean(min(0.5, 0.7) - eta * log_prob)
    expected_temperature = np.mean(-eta * (log_prob - 1.0))

    critic = critic_loss(agent, batch, noise)
    policy = policy_objective(agent, batch, noise)
    temperature = temperature_loss(agent, batch, noise)

    np.testing.assert_allclose(critic.target, target, rtol=0, atol=1e-10)
    assert critic.loss == pytest.approx(expected_critic, abs=1e-10)
    assert policy.objective == pytest.approx(expected_policy, abs=1e-10)
    assert temperature.loss == pytest.approx(expected_temperature, abs=1e-10)
    assert temperature.gradient == temperature.loss


def test_terminal_transition_does_not_bootstrap():
    agent = oracle_agent()
    batch = oracle_batch()
    critic = critic_loss(agent, batch, np.zeros((3, 1)))
    assert critic.target[2] == batch.rewards[2]


def test_policy_gradient_matches_finite_differences():
    agent = SacAgent(AgentConfig(n=2, m=1, hidden=4, seed=5))
    rng = np.random.default_rng(6)
    batch = TransitionBatch.from_transitions([
        Transition(rng.normal(size=2), rng.uniform(-1, 1, 1), -0.1, rng.normal(size=2))
        for _ in range(5)
    ])
    noise = rng.normal(size=(5, 1))

    grads = policy_objective(agent, batch, noise).grads
    analytic = np.concatenate([g.ravel() for g in grads.arrays()])

    numeric = []
    h = 1e-6
    for array in agent.policy.arrays():
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + h
            upper = policy_objective(agent, batch, noise).objective
            array[index] = original - h
            lower = policy_objective(agent, batch, noise).objective
            array[index] = original
            numeric.append((upper - lower) / (2 * h))
    numeric = np.array(numeric)

    error = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
    assert error < 1e-5


def test_critic_gradient_matches_finite_differences():
    agent = SacAgent(AgentConfig(n=2, m=1, hidden=4, seed=8))
    rng = np.random.default_rng(9)
    batch = TransitionBatch.from_transitions([
        Transition(rng.normal(size=2), rng.uniform(-1, 1, 1), -0.3, rng.normal(size=2))
        for _ in range(4)
    ])
    noise = rng.normal(size=(4, 1))

    grads = critic_loss(agent, batch, noise).grads_q1
    analytic = np.concatenate([g.ravel() for g in grads.arrays()])

    numeric = []
    h = 1e-6
    for array in agent.q1.arrays():
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + h
            upper = critic_loss(agent, batch, noise).loss
            array[index] = original - h
            lower = critic_loss(agent, batch, noise).loss
            array[index] = original
            numeric.append((upper - lower) / (2 * h))
    numeric = np.array(numeric)

    error = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
    assert error < 1e-5


def test_soft_update_weights_old_target(small_agent: SacAgent):
    old_target = [a.copy() for a in small_agent.q1_target.arrays()]
    for a in small_agent.q1.arrays():
        a += 1.0
    online = [a.copy() for a in small_agent.q1.arrays()]

    soft_update(small_agent)

    for t, old, new in zip(small_agent.q1_target.arrays(), old_target, online):
        np.testing.assert_allclose(t, 0.995 * old + 0.005 * new, rtol=1e-12, atol=1e-15)


def test_target_gap_decays_geometrically(small_agent: SacAgent):
    for a in small_agent.q1.arrays():
        a += 1.0
    online = [a.copy() for a in small_agent.q1.arrays()]
    gap = [t - o for t, o in zip(small_agent.q1_target.arrays(), online)]

    for _ in range(50):
        soft_update(small_agent)

    # 在线网络不变时，每步差距缩小为τ倍
    for t, o, g in zip(small_agent.q1_target.arrays(), online, gap):
        np.testing.assert_allclose(t - o, 0.995 ** 50 * g, rtol=1e-9, atol=1e-12)


def test_temperature_loss_example(small_agent: SacAgent, filled_buffer: ReplayBuffer, monkeypatch):
    def fixed_sample(agent, states, noise=None):
        return SimpleNamespace(log_prob=np.full(len(states), -2.0))

    monkeypatch.setattr("flightcontrol_sac.agent._sample_policy", fixed_sample)
    small_agent.log_eta[:] = np.log(0.5)
    batch = filled_buffer.sample(4, np.random.default_rng(0))

    temperature = temperature_loss(small_agent, batch)
    assert small_agent.config.target_entropy == -1.0
    assert temperature.loss == pytest.approx(1.5)
    assert temperature.gradient == pytest.approx(1.5)

    # 熵高于目标时温度下降
    adam_step([small_agent.log_eta], [np.array([temperature.gradient])], small_agent.eta_adam, 1e-3)
    assert small_agent.eta < 0.5


def test_train_step_warming_up(small_agent: SacAgent):
    buffer = ReplayBuffer(64, 2, 1)
    buffer.add(Transition(np.zeros(2), np.zeros(1), 0.0, np.zeros(2)))
    before = [a.copy() for a in small_agent.policy.arrays()]

    diagnostics = train_step(small_agent, buffer)

    assert diagnostics.status == TrainStatus.WARMING_UP
    assert small_agent.step_count == 0
    for a, b in zip(before, small_agent.policy.arrays()):
        np.testing.assert_array_equal(a, b)


def test_train_step_updates(small_agent: SacAgent, filled_buffer: ReplayBuffer):
    target_before = [a.copy() for a in small_agent.q1_target.arrays()]

    diagnostics = train_step(small_agent, filled_buffer)

    assert diagnostics.status == TrainStatus.UPDATED
    assert diagnostics.step == 1
    assert np.isfinite(diagnostics.critic_loss)
    assert np.isfinite(diagnostics.entropy_estimate)
    assert small_agent.eta != 1.0
    assert any(not np.array_equal(a, b) for a, b in zip(target_before, small_agent.q1_target.arrays()))


def test_frozen_agent_cannot_train(small_agent: SacAgent, filled_buffer: ReplayBuffer):
    small_agent.freeze()
    with pytest.raises(UsageError):
        train_step(small_agent, filled_buffer)


def test_checkpoint_resume_is_exact(tmp_path, small_agent: SacAgent, filled_buffer: ReplayBuffer):
    for _ in range(3):
        train_step(small_agent, filled_buffer)

    path = tmp_path / "agent.npz"
    save_checkpoint(small_agent, path)
    resumed = load_checkpoint(path)

    assert resumed.step_count == small_agent.step_count
    assert resumed.eta == small_agent.eta
    for name, params in small_agent.networks().items():
        for a, b in zip(params.arrays(), resumed.networks()[name].arrays()):
            np.testing.assert_array_equal(a, b)

    train_step(small_agent, filled_buffer)
    train_step(resumed, filled_buffer)

    for a, b in zip(small_agent.policy.arrays(), resumed.policy.arrays()):
        np.testing.assert_array_equal(a, b)
    assert resumed.eta == small_agent.eta


def test_checkpoint_version_mismatch(tmp_path, small_agent: SacAgent):
    path = tmp_path / "agent.npz"
    save_checkpoint(small_agent, path)

    with np.load(path) as npz:
        data = {key: npz[key] for key in npz.files}
    data["format_version"] = np.array(2)
    with open(path, "wb") as f:
        np.savez(f, **data)

    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_frozen_flag_persisted(tmp_path, small_agent: SacAgent):
    small_agent.freeze()
    path = tmp_path / "agent.npz"
    save_checkpoint(small_agent, path)
    assert load_checkpoint(path).frozen


def test_diagnostics_recorder(tmp_path, small_agent: SacAgent, filled_buffer: ReplayBuffer):
    recorder = DiagnosticsRecorder()
    recorder.record(train_step(small_agent, filled_buffer), -3.0)
    recorder.record(train_step(small_agent, filled_buffer), -2.0)

    df = recorder.to_frame()
    assert list(df.columns) == [
        "step", "critic_loss", "policy_objective", "eta", "entropy_estimate", "episode_return"
    ]
    assert list(df["step"]) == [1, 2]

    recorder.save(tmp_path / "diagnostics.csv")
    assert (tmp_path / "diagnostics.csv").exists()
