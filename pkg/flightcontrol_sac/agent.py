"""
Soft Actor-Critic智能体：tanh高斯策略、双Q网络与目标网络、经验回放、熵温度自适应。

策略网络输出(μ, log σ)，动作 a = tanh(μ + σ·ξ)。
目标网络按 k̄ ← (1-τ)·k + τ·k̄ 平滑更新，τ为旧目标的权重。
"""

from copy import copy
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .base import (
    FORMAT_VERSION,
    LrSchedule,
    QNetwork,
    TrainStatus,
    CheckpointError,
    ConfigurationError,
    NumericError,
    UsageError
)
from .network import (
    AdamState,
    GradientTape,
    NetworkParams,
    adam_step,
    backward,
    forward,
    mlp_specs,
    pack_adam,
    pack_params,
    read_container,
    unpack_adam,
    unpack_params,
    xavier_init
)
from .utility import array_to_json, json_to_array, to_dict, write_csv


LOG_2: float = float(np.log(2.0))
LOG_2PI: float = float(np.log(2.0 * np.pi))

# tanh在float64下可能取到±1，采样动作收缩到开区间内
ACTION_BOUND: float = 1.0 - 1e-9

NETWORK_NAMES: List[str] = ["policy", "q1", "q2", "q1_target", "q2_target"]


@dataclass
class AgentConfig:
    """SAC超参数"""

    n: int
    m: int
    hidden: int = 64
    gamma: float = 0.99
    tau: float = 0.995
    lr_initial: float = 3e-4
    lr_final: float = 3e-4
    lr_schedule: LrSchedule = LrSchedule.CONSTANT
    lr_decay_steps: int = 1_000_000
    batch_size: int = 256
    buffer_capacity: int = 50_000
    entropy_target: Optional[float] = None
    initial_eta: float = 1.0
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        """检查参数范围"""
        if isinstance(self.lr_schedule, str):
            self.lr_schedule = LrSchedule(self.lr_schedule)

        if self.n <= 0 or self.m <= 0 or self.hidden <= 0:
            raise ConfigurationError("网络维度必须为正", "n/m/hidden")
        if not 0 < self.gamma < 1:
            raise ConfigurationError(f"discount必须在(0,1)内，当前{self.gamma}", "gamma")
        if not 0 < self.tau < 1:
            raise ConfigurationError(f"smoothing必须在(0,1)内，当前{self.tau}", "tau")
        if self.batch_size < 1:
            raise ConfigurationError("minibatch至少为1", "batch_size")
        if self.buffer_capacity < self.batch_size:
            raise ConfigurationError("buffer容量不能小于minibatch", "buffer_capacity")
        if self.initial_eta <= 0:
            raise ConfigurationError("初始温度必须为正", "initial_eta")
        if self.log_std_min >= self.log_std_max:
            raise ConfigurationError("log_std下限必须小于上限", "log_std_min")
        if self.lr_decay_steps <= 0:
            raise ConfigurationError("学习率衰减步数必须为正", "lr_decay_steps")

    @property
    def target_entropy(self) -> float:
        """熵目标，默认 -m"""
        if self.entropy_target is None:
            return -float(self.m)
        return self.entropy_target

    def learning_rate(self, step: int) -> float:
        """按训练步数计算学习率"""
        if self.lr_schedule == LrSchedule.CONSTANT:
            return self.lr_initial

        fraction: float = min(step / self.lr_decay_steps, 1.0)
        return self.lr_initial + fraction * (self.lr_final - self.lr_initial)


def attitude_agent_config(seed: int = 0) -> AgentConfig:
    """姿态内环智能体参数"""
    return AgentConfig(
        n=9,
        m=3,
        hidden=64,
        lr_initial=4e-4,
        lr_final=0.0,
        lr_schedule=LrSchedule.LINEAR,
        lr_decay_steps=1_000_000,
        seed=seed,
    )


def altitude_agent_config(seed: int = 0) -> AgentConfig:
    """高度外环智能体参数"""
    return AgentConfig(
        n=2,
        m=1,
        hidden=32,
        lr_initial=3e-4,
        lr_final=3e-4,
        lr_schedule=LrSchedule.CONSTANT,
        seed=seed,
    )


@dataclass
class Transition:
    """单条经验 (s, a, r, s')"""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool = False


@dataclass
class TransitionBatch:
    """按列存储的一批经验"""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    @classmethod
    def from_transitions(cls, transitions: List[Transition]) -> "TransitionBatch":
        """由经验列表组装"""
        return cls(
            states=np.array([t.s for t in transitions], dtype=np.float64),
            actions=np.array([t.a for t in transitions], dtype=np.float64),
            rewards=np.array([t.r for t in transitions], dtype=np.float64),
            next_states=np.array([t.s_next for t in transitions], dtype=np.float64),
            dones=np.array([t.done for t in transitions], dtype=bool),
        )


class ReplayBuffer:
    """定长先进先出经验池"""

    def __init__(self, capacity: int, n: int, m: int) -> None:
        """构造函数"""
        if capacity <= 0:
            raise ConfigurationError("经验池容量必须为正", "buffer_capacity")

        self.capacity: int = capacity
        self.n: int = n
        self.m: int = m

        self.states: np.ndarray = np.zeros((capacity, n))
        self.actions: np.ndarray = np.zeros((capacity, m))
        self.rewards: np.ndarray = np.zeros(capacity)
        self.next_states: np.ndarray = np.zeros((capacity, n))
        self.dones: np.ndarray = np.zeros(capacity, dtype=bool)

        self.index: int = 0         # 下一个写入位置
        self.size: int = 0
        self.total: int = 0         # 累计写入数量

    def __len__(self) -> int:
        return self.size

    def add(self, transition: Transition) -> None:
        """写入经验，满后覆盖最旧的一条"""
        s: np.ndarray = np.asarray(transition.s, dtype=np.float64)
        a: np.ndarray = np.asarray(transition.a, dtype=np.float64)
        s_next: np.ndarray = np.asarray(transition.s_next, dtype=np.float64)

        if s.shape != (self.n,) or s_next.shape != (self.n,) or a.shape != (self.m,):
            raise UsageError(f"经验维度不匹配：s{s.shape} a{a.shape} s'{s_next.shape}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))
                and np.all(np.isfinite(s_next)) and np.isfinite(transition.r)):
            raise NumericError("经验包含非有限值")
        if np.any(np.abs(a) > 1.0):
            raise UsageError(f"动作超出[-1,1]：{a}")

        i: int = self.index
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = transition.r
        self.next_states[i] = s_next
        self.dones[i] = transition.done

        self.index = (self.index + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total += 1

    def get(self, i: int) -> Transition:
        """按从旧到新的顺序取第i条经验"""
        if not 0 <= i < self.size:
            raise UsageError(f"索引{i}超出经验池范围{self.size}")

        j: int = (self.index - self.size + i) % self.capacity
        return Transition(
            s=self.states[j].copy(),
            a=self.actions[j].copy(),
            r=float(self.rewards[j]),
            s_next=self.next_states[j].copy(),
            done=bool(self.dones[j]),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """有放回均匀采样"""
        if self.size == 0:
            raise UsageError("经验池为空")

        # 未满时有效数据位于[0, size)，已满时为整个数组
        idx: np.ndarray = rng.integers(0, self.size, size=batch_size)
        return TransitionBatch(
            states=self.states[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_states=self.next_states[idx],
            dones=self.dones[idx],
        )


@dataclass
class PolicySample:
    """策略采样的中间结果"""

    action: np.ndarray
    log_prob: np.ndarray
    mu: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    noise: np.ndarray
    u: np.ndarray
    clip_mask: np.ndarray
    tape: GradientTape


@dataclass
class CriticLoss:
    """critic损失与梯度"""

    loss: float
    grads_q1: NetworkParams
    grads_q2: NetworkParams
    target: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


@dataclass
class PolicyObjective:
    """策略目标与上升方向梯度"""

    objective: float
    grads: NetworkParams
    log_prob: np.ndarray


@dataclass
class TemperatureLoss:
    """温度损失与对log η的梯度"""

    loss: float
    gradient: float
    log_prob: np.ndarray


@dataclass
class TrainDiagnostics:
    """单步训练诊断信息"""

    step: int
    status: TrainStatus
    eta: float
    critic_loss: float = np.nan
    policy_objective: float = np.nan
    temperature_loss: float = np.nan
    entropy_estimate: float = np.nan
    learning_rate: float = np.nan


class SacAgent:
    """SAC智能体"""

    parameters: list = [f.name for f in fields(AgentConfig)]
    variables: list = ["step_count", "eta", "frozen"]

    def __init__(self, config: AgentConfig) -> None:
        """构造函数"""
        self.config: AgentConfig = config
        self.rng: np.random.Generator = np.random.default_rng(config.seed)

        n, m, l = config.n, config.m, config.hidden
        seeds: np.ndarray = np.random.SeedSequence(config.seed).generate_state(3)

        self.policy: NetworkParams = xavier_init(mlp_specs(n, l, 2 * m), int(seeds[0]))
        self.q1: NetworkParams = xavier_init(mlp_specs(n + m, l, 1), int(seeds[1]))
        self.q2: NetworkParams = xavier_init(mlp_specs(n + m, l, 1), int(seeds[2]))
        self.q1_target: NetworkParams = self.q1.copy()
        self.q2_target: NetworkParams = self.q2.copy()

        self.log_eta: np.ndarray = np.array([np.log(config.initial_eta)])

        self.policy_adam: AdamState = AdamState.create(self.policy)
        self.q1_adam: AdamState = AdamState.create(self.q1)
        self.q2_adam: AdamState = AdamState.create(self.q2)
        self.eta_adam: AdamState = AdamState.create([self.log_eta])

        self.step_count: int = 0
        self.frozen: bool = False

        # 复制变量名列表
        self.variables = copy(self.variables)

    @property
    def eta(self) -> float:
        """熵温度"""
        return float(np.exp(self.log_eta[0]))

    def networks(self) -> Dict[str, NetworkParams]:
        """全部网络参数"""
        return {
            "policy": self.policy,
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def q_network(self, which: QNetwork) -> NetworkParams:
        """按名称取Q网络"""
        return {
            QNetwork.Q1: self.q1,
            QNetwork.Q2: self.q2,
            QNetwork.TARGET1: self.q1_target,
            QNetwork.TARGET2: self.q2_target,
        }[QNetwork(which)]

    def act(self, s: np.ndarray, deterministic: bool = False) -> np.ndarray:
        """给出单个状态下的动作"""
        noise: Optional[np.ndarray] = np.zeros(self.config.m) if deterministic else None
        a, _ = policy_sample(self, s, noise)
        return a

    def freeze(self) -> None:
        """冻结参数，之后不再训练"""
        self.frozen = True

    def get_parameters(self) -> dict:
        """查询智能体参数"""
        return {name: getattr(self.config, name) for name in self.parameters}

    def get_variables(self) -> dict:
        """查询智能体变量"""
        return {name: getattr(self, name) for name in self.variables}

    def get_data(self) -> dict:
        """查询智能体状态数据"""
        return {
            "class_name": self.__class__.__name__,
            "parameters": self.get_parameters(),
            "variables": self.get_variables(),
        }


def _sample_policy(
    agent: SacAgent,
    states: np.ndarray,
    noise: Optional[np.ndarray] = None
) -> PolicySample:
    """批量重参数化采样"""
    m: int = agent.config.m
    out, tape = forward(agent.policy, np.atleast_2d(states))

    if not np.all(np.isfinite(out)):
        raise NumericError("策略网络输出包含非有限值")

    batch: int = out.shape[0]
    mu: np.ndarray = out[:, :m]
    raw: np.ndarray = out[:, m:]
    log_std: np.ndarray = np.clip(raw, agent.config.log_std_min, agent.config.log_std_max)
    clip_mask: np.ndarray = (raw >= agent.config.log_std_min) & (raw <= agent.config.log_std_max)
    std: np.ndarray = np.exp(log_std)

    if noise is None:
        xi: np.ndarray = agent.rng.standard_normal((batch, m))
    else:
        xi = np.asarray(noise, dtype=np.float64).reshape(batch, m)

    u: np.ndarray = mu + std * xi
    action: np.ndarray = np.clip(np.tanh(u), -ACTION_BOUND, ACTION_BOUND)

    # log(1 - tanh²u) = 2(log2 - u - softplus(-2u))
    log_gauss: np.ndarray = -0.5 * xi ** 2 - log_std - 0.5 * LOG_2PI
    log_jacobian: np.ndarray = 2.0 * (LOG_2 - u - np.logaddexp(0.0, -2.0 * u))
    log_prob: np.ndarray = (log_gauss - log_jacobian).sum(axis=1)

    return PolicySample(action, log_prob, mu, log_std, std, xi, u, clip_mask, tape)


def policy_sample(
    agent: SacAgent,
    s: np.ndarray,
    noise: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, Union[float, np.ndarray]]:
    """策略采样，返回动作和对数概率密度"""
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise NumericError("状态包含非有限值")

    sample: PolicySample = _sample_policy(agent, s, noise)
    if s.ndim == 1:
        return sample.action[0], float(sample.log_prob[0])
    return sample.action, sample.log_prob


def q_value(
    agent: SacAgent,
    which: QNetwork,
    s: np.ndarray,
    a: np.ndarray
) -> Union[float, np.ndarray]:
    """Q网络取值"""
    params: NetworkParams = agent.q_network(which)
    x: np.ndarray = np.concatenate([np.asarray(s, dtype=np.float64), np.asarray(a, dtype=np.float64)], axis=-1)
    out, _ = forward(params, x)

    if out.ndim == 1:
        return float(out[0])
    return out[:, 0]


def _check_batch(batch: TransitionBatch) -> None:
    """检查非空"""
    if len(batch) == 0:
        raise UsageError("minibatch为空")


def critic_loss(
    agent: SacAgent,
    batch: TransitionBatch,
    noise: Optional[np.ndarray] = None
) -> CriticLoss:
    """双Q网络的soft Bellman损失"""
    _check_batch(batch)
    size: int = len(batch)
    eta: float = agent.eta

    # 目标值由当前策略重新采样下一步动作，梯度不经过目标
    nxt: PolicySample = _sample_policy(agent, batch.next_states, noise)
    x_next: np.ndarray = np.hstack([batch.next_states, nxt.action])
    qt1, _ = forward(agent.q1_target, x_next)
    qt2, _ = forward(agent.q2_target, x_next)
    soft_value: np.ndarray = np.minimum(qt1[:, 0], qt2[:, 0]) - eta * nxt.log_prob
    target: np.ndarray = batch.rewards + agent.config.gamma * (1.0 - batch.dones) * soft_value

    x: np.ndarray = np.hstack([batch.states, batch.actions])
    q1, tape1 = forward(agent.q1, x)
    q2, tape2 = forward(agent.q2, x)
    d1: np.ndarray = q1[:, 0] - target
    d2: np.ndarray = q2[:, 0] - target

    loss: float = float(0.5 * (np.mean(d1 ** 2) + np.mean(d2 ** 2)))
    if not np.isfinite(loss):
        raise NumericError(f"critic损失非有限：{loss}（step={agent.step_count}）")

    grads_q1, _ = backward(tape1, (d1 / size)[:, None])
    grads_q2, _ = backward(tape2, (d2 / size)[:, None])

    return CriticLoss(loss, grads_q1, grads_q2, target, q1[:, 0], q2[:, 0])


def policy_objective(
    agent: SacAgent,
    batch: TransitionBatch,
    noise: Optional[np.ndarray] = None
) -> PolicyObjective:
    """策略目标 mean(min Q - η·logπ)，返回上升方向梯度"""
    _check_batch(batch)
    size: int = len(batch)
    n: int = agent.config.n
    eta: float = agent.eta

    smp: PolicySample = _sample_policy(agent, batch.states, noise)
    x: np.ndarray = np.hstack([batch.states, smp.action])
    q1, tape1 = forward(agent.q1, x)
    q2, tape2 = forward(agent.q2, x)
    q1 = q1[:, 0]
    q2 = q2[:, 0]

    use_q1: np.ndarray = q1 <= q2
    q_min: np.ndarray = np.where(use_q1, q1, q2)
    objective: float = float(np.mean(q_min - eta * smp.log_prob))
    if not np.isfinite(objective):
        raise NumericError(f"策略目标非有限：{objective}（step={agent.step_count}）")

    # 逐样本只对取到最小值的Q网络求导
    _, dx1 = backward(tape1, (use_q1 / size)[:, None])
    _, dx2 = backward(tape2, (~use_q1 / size)[:, None])
    d_action: np.ndarray = (dx1 + dx2)[:, n:]

    d_log_prob: float = -eta / size
    tanh_u: np.ndarray = np.tanh(smp.u)
    d_u: np.ndarray = d_action * (1.0 - tanh_u ** 2) + d_log_prob * 2.0 * tanh_u

    d_mu: np.ndarray = d_u
    d_log_std: np.ndarray = (d_u * smp.std * smp.noise - d_log_prob) * smp.clip_mask

    grads, _ = backward(smp.tape, np.hstack([d_mu, d_log_std]))
    return PolicyObjective(objective, grads, smp.log_prob)


def temperature_loss(
    agent: SacAgent,
    batch: TransitionBatch,
    noise: Optional[np.ndarray] = None
) -> TemperatureLoss:
    """温度损失 mean(-η(logπ + H̄))，梯度对log η求取"""
    _check_batch(batch)
    eta: float = agent.eta

    smp: PolicySample = _sample_policy(agent, batch.states, noise)
    loss: float = float(np.mean(-eta * (smp.log_prob + agent.config.target_entropy)))

    # dL/dlogη = η·dL/dη = L
    return TemperatureLoss(loss, loss, smp.log_prob)


def soft_update(agent: SacAgent, tau: Optional[float] = None) -> None:
    """目标网络平滑更新 k̄ ← (1-τ)k + τk̄"""
    if tau is None:
        tau = agent.config.tau

    for target, online in ((agent.q1_target, agent.q1), (agent.q2_target, agent.q2)):
        for t, o in zip(target.arrays(), online.arrays()):
            t *= tau
            t += (1.0 - tau) * o


def train_step(
    agent: SacAgent,
    buffer: ReplayBuffer,
    rng: Optional[np.random.Generator] = None
) -> TrainDiagnostics:
    """一次完整更新：critic、策略、温度、目标网络"""
    if agent.frozen:
        raise UsageError("智能体已冻结，不能继续训练")

    config: AgentConfig = agent.config
    if len(buffer) < config.batch_size:
        return TrainDiagnostics(agent.step_count, TrainStatus.WARMING_UP, agent.eta)

    if rng is None:
        rng = agent.rng

    batch: TransitionBatch = buffer.sample(config.batch_size, rng)
    lr: float = config.learning_rate(agent.step_count)

    critic: CriticLoss = critic_loss(agent, batch)
    adam_step(agent.q1, critic.grads_q1, agent.q1_adam, lr)
    adam_step(agent.q2, critic.grads_q2, agent.q2_adam, lr)

    policy: PolicyObjective = policy_objective(agent, batch)
    for g in policy.grads.arrays():
        g *= -1.0
    adam_step(agent.policy, policy.grads, agent.policy_adam, lr)

    temperature: TemperatureLoss = temperature_loss(agent, batch)
    adam_step([agent.log_eta], [np.array([temperature.gradient])], agent.eta_adam, lr)

    soft_update(agent)
    agent.step_count += 1

    return TrainDiagnostics(
        step=agent.step_count,
        status=TrainStatus.UPDATED,
        eta=agent.eta,
        critic_loss=critic.loss,
        policy_objective=policy.objective,
        temperature_loss=temperature.loss,
        entropy_estimate=float(-np.mean(policy.log_prob)),
        learning_rate=lr,
    )


def save_checkpoint(agent: SacAgent, path: Union[str, Path]) -> None:
    """保存全部网络、优化器状态、温度、随机数状态"""
    store: Dict[str, np.ndarray] = {"format_version": np.array(FORMAT_VERSION, dtype="<i8")}

    for name, params in agent.networks().items():
        pack_params(name, params, store)

    pack_adam("policy", agent.policy_adam, store)
    pack_adam("q1", agent.q1_adam, store)
    pack_adam("q2", agent.q2_adam, store)
    pack_adam("log_eta", agent.eta_adam, store)

    store["log_eta"] = np.ascontiguousarray(agent.log_eta, dtype="<f8")
    store["step_count"] = np.array(agent.step_count, dtype="<i8")
    store["frozen"] = np.array(agent.frozen)
    store["rng_state"] = json_to_array(agent.rng.bit_generator.state)
    store["config"] = json_to_array(to_dict(agent.config))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **store)


def load_checkpoint(path: Union[str, Path]) -> SacAgent:
    """读取检查点恢复智能体"""
    data: Dict[str, np.ndarray] = read_container(path)

    try:
        config: AgentConfig = AgentConfig(**array_to_json(data["config"]))
        agent: SacAgent = SacAgent(config)

        for name in NETWORK_NAMES:
            loaded: NetworkParams = unpack_params(name, data)
            current: NetworkParams = getattr(agent, name)
            if loaded.specs != current.specs:
                raise CheckpointError(f"网络{name}结构与配置不一致")
            setattr(agent, name, loaded)

        agent.policy_adam = unpack_adam("policy", len(agent.policy.arrays()), data)
        agent.q1_adam = unpack_adam("q1", len(agent.q1.arrays()), data)
        agent.q2_adam = unpack_adam("q2", len(agent.q2.arrays()), data)
        agent.eta_adam = unpack_adam("log_eta", 1, data)

        agent.log_eta = np.array(data["log_eta"], dtype=np.float64)
        agent.step_count = int(data["step_count"])
        agent.frozen = bool(data["frozen"]) if "frozen" in data else False
        agent.rng.bit_generator.state = array_to_json(data["rng_state"])
    except KeyError as e:
        raise CheckpointError(f"检查点{path}缺少字段{e}") from e
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"检查点{path}内容无效：{e}") from e

    return agent


@dataclass
class DiagnosticsRecorder:
    """训练诊断记录，输出csv"""

    rows: List[dict] = field(default_factory=list)

    def record(self, diagnostics: TrainDiagnostics, episode_return: float = np.nan) -> None:
        """记录一行"""
        self.rows.append({
            "step": diagnostics.step,
            "critic_loss": diagnostics.critic_loss,
            "policy_objective": diagnostics.policy_objective,
            "eta": diagnostics.eta,
            "entropy_estimate": diagnostics.entropy_estimate,
            "episode_return": episode_return,
        })

    def to_frame(self) -> pd.DataFrame:
        """转换为DataFrame"""
        columns: List[str] = [
            "step", "critic_loss", "policy_objective", "eta", "entropy_estimate", "episode_return"
        ]
        return pd.DataFrame(self.rows, columns=columns)

    def save(self, path: Union[str, Path]) -> None:
        """输出csv"""
        write_csv(path, self.to_frame())
