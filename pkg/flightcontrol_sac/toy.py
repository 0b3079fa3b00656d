"""
一维双积分器跟踪任务，用于脱离飞行动力学单独检验SAC实现。
"""

from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from .agent import AgentConfig, ReplayBuffer, SacAgent, Transition, train_step
from .utility import smooth


@dataclass
class ToyConfig:
    dt: float = 0.05
    episode_steps: int = 100
    max_accel: float = 1.0
    initial_range: float = 1.0
    eval_episodes: int = 10
    train_steps: int = 50_000
    pass_score: float = 0.9


class ToyEnv:
    """状态为(位置误差, 速度)，动作为限幅加速度，奖励 -clip(|e|, 0, 1)"""

    def __init__(self, config: Optional[ToyConfig] = None) -> None:
        self.config: ToyConfig = config or ToyConfig()
        self.state: np.ndarray = np.zeros(2)
        self.count: int = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        r: float = self.config.initial_range
        self.state = np.array([rng.uniform(-r, r), 0.0])
        self.count = 0
        return self.state.copy()

    def step(self, action: np.ndarray) -> Tuple[np.ndarray, float, bool]:
        """半隐式欧拉积分"""
        accel: float = self.config.max_accel * float(np.clip(np.asarray(action).reshape(-1)[0], -1, 1))
        error, velocity = self.state

        velocity += accel * self.config.dt
        error += velocity * self.config.dt
        self.state = np.array([error, velocity])
        self.count += 1

        reward: float = -min(abs(error), 1.0)
        return self.state.copy(), reward, self.count >= self.config.episode_steps


def run_episodes(
    policy: Callable[[np.ndarray], np.ndarray],
    config: ToyConfig,
    seed: int,
    episodes: int
) -> float:
    """固定初值集合上的平均回报"""
    env: ToyEnv = ToyEnv(config)
    rng: np.random.Generator = np.random.default_rng(seed)

    returns: List[float] = []
    for _ in range(episodes):
        s: np.ndarray = env.reset(rng)
        total: float = 0.0
        done: bool = False
        while not done:
            s, r, done = env.step(policy(s))
            total += r
        returns.append(total)

    return float(np.mean(returns))


def oracle_return(config: ToyConfig, seed: int) -> Tuple[float, Tuple[float, float]]:
    """网格搜索饱和PD控制器，返回最优平均回报与增益"""
    best: float = -np.inf
    best_gains: Tuple[float, float] = (0.0, 0.0)

    for kp, kd in product(np.linspace(0.5, 20.0, 20), np.linspace(0.0, 10.0, 21)):
        def pd(s: np.ndarray, kp=kp, kd=kd) -> np.ndarray:
            return np.array([np.clip(-kp * s[0] - kd * s[1], -1.0, 1.0)])

        value: float = run_episodes(pd, config, seed, config.eval_episodes)
        if value > best:
            best = value
            best_gains = (float(kp), float(kd))

    return best, best_gains


def random_return(config: ToyConfig, seed: int) -> float:
    """均匀随机动作的平均回报"""
    rng: np.random.Generator = np.random.default_rng(seed + 1)
    return run_episodes(lambda s: rng.uniform(-1, 1, size=1), config, seed, config.eval_episodes)


@dataclass
class ToyResult:
    seed: int
    curve: pd.DataFrame
    final_return: float
    oracle_return: float
    random_return: float
    score: float
    passed: bool
    gains: Tuple[float, float] = field(default=(0.0, 0.0))


def toy_agent_config(seed: int) -> AgentConfig:
    return AgentConfig(n=2, m=1, hidden=32, lr_initial=3e-4, lr_final=3e-4, seed=seed)


def toy_benchmark(
    seed: int,
    config: Optional[ToyConfig] = None,
    agent_config: Optional[AgentConfig] = None,
    output: Callable[[str], None] = print
) -> ToyResult:
    """训练单个智能体并与解析控制器对比"""
    config = config or ToyConfig()
    agent_config = agent_config or toy_agent_config(seed)
    if agent_config.seed != seed:
        agent_config = replace(agent_config, seed=seed)

    agent: SacAgent = SacAgent(agent_config)
    buffer: ReplayBuffer = ReplayBuffer(agent_config.buffer_capacity, 2, 1)
    env: ToyEnv = ToyEnv(config)
    rng: np.random.Generator = np.random.default_rng(seed)

    # 评估集合与训练初值分开
    eval_seed: int = 10_000 + seed
    evaluate: Callable[[], float] = lambda: run_episodes(
        lambda s: agent.act(s, deterministic=True), config, eval_seed, config.eval_episodes
    )

    rows: List[dict] = []
    steps: int = 0
    episode: int = 0

    while steps < config.train_steps:
        s: np.ndarray = env.reset(rng)
        total: float = 0.0
        done: bool = False

        while not done and steps < config.train_steps:
            a: np.ndarray = agent.act(s)
            s_next, r, done = env.step(a)
            buffer.add(Transition(s, a, r, s_next))
            train_step(agent, buffer)

            s = s_next
            total += r
            steps += 1

        episode += 1
        rows.append({"episode": episode, "steps": steps, "return": total, "eta": agent.eta})

        if episode % 50 == 0:
            output(f"toy seed={seed} 回合{episode} 步数{steps} 回报{total:.2f} η={agent.eta:.4f}")

    curve: pd.DataFrame = pd.DataFrame(rows)
    curve["smoothed"] = smooth(curve["return"].to_numpy(), 20)

    final: float = evaluate()
    best, gains = oracle_return(config, eval_seed)
    baseline: float = random_return(config, eval_seed)

    span: float = best - baseline
    score: float = (final - baseline) / span if span > 0 else 0.0

    return ToyResult(
        seed=seed,
        curve=curve,
        final_return=final,
        oracle_return=best,
        random_return=baseline,
        score=score,
        passed=score >= config.pass_score,
        gains=gains,
    )
