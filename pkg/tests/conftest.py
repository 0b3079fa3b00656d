import numpy as np
import pytest

from flightcontrol_sac.agent import AgentConfig, ReplayBuffer, SacAgent, Transition
from flightcontrol_sac.setting import ExperimentConfig, apply_overrides
from flightcontrol_sac.simulator import AutothrottleConfig, PlantConfig, YawDamperConfig


@pytest.fixture
def small_config() -> AgentConfig:
    """小网络、小batch，便于快速训练"""
    return AgentConfig(n=2, m=1, hidden=8, batch_size=4, buffer_capacity=64, seed=7)


@pytest.fixture
def small_agent(small_config: AgentConfig) -> SacAgent:
    return SacAgent(small_config)


@pytest.fixture
def filled_buffer(small_config: AgentConfig) -> ReplayBuffer:
    """随机经验填满的经验池"""
    rng = np.random.default_rng(3)
    buffer = ReplayBuffer(small_config.buffer_capacity, small_config.n, small_config.m)
    for _ in range(32):
        s = rng.normal(size=small_config.n)
        a = rng.uniform(-1, 1, size=small_config.m)
        buffer.add(Transition(s, a, float(-abs(s[0])), rng.normal(size=small_config.n)))
    return buffer


@pytest.fixture
def bare_plant() -> PlantConfig:
    """关闭偏航阻尼器和自动油门的被控对象"""
    return PlantConfig(
        yaw_damper=YawDamperConfig(enabled=False),
        autothrottle=AutothrottleConfig(enabled=False),
    )


@pytest.fixture
def tiny_experiment(tmp_path) -> ExperimentConfig:
    """极小规模的完整实验配置"""
    config = apply_overrides(ExperimentConfig(), [
        "attitude_agent.hidden=8",
        "attitude_agent.batch_size=8",
        "attitude_agent.buffer_capacity=256",
        "altitude_agent.hidden=8",
        "altitude_agent.batch_size=8",
        "altitude_agent.buffer_capacity=256",
        "training.attitude_steps=60",
        "training.altitude_steps=60",
        "training.attitude_episode_length=0.3",
        "training.altitude_episode_length=0.3",
        "training.checkpoint_interval=50",
        "training.desk_steps=40",
        "reference.duration=0.5",
        "evaluation.attitude_tasks=2",
        "evaluation.attitude_episode_length=0.3",
        f"output_dir=\"{tmp_path.as_posix()}\"",
    ])
    return config
