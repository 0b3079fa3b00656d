"""
级联强化学习环境：内环姿态智能体输出舵面增量，外环高度智能体输出俯仰角参考增量。

观测量均来自上一时刻的反馈，奖励为加权误差的截断L1范数，取值[-1, 0]。
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .agent import SacAgent, Transition
from .base import RewardMode, SimulationAbort, UsageError
from .fault import ScenarioSpec, SensorReading, observe
from .reference import ReferenceFrame, ReferenceProgram, gen_reference
from .simulator import PlantConfig, Simulator
from .utility import rad_columns


ATTITUDE_COST: np.ndarray = 6 / np.pi * np.array([4.0, 1.0, 1.0])
ALTITUDE_COST: float = 1 / 240

ATTITUDE_OBS_SIZE: int = 9
ALTITUDE_OBS_SIZE: int = 2

ANGLE_COLUMNS: List[str] = [
    "p", "q", "r", "alpha", "beta", "phi", "theta", "psi", "de", "da", "dr",
    "beta_ref", "theta_ref", "phi_ref",
]

Policy = Callable[[np.ndarray], np.ndarray]


@dataclass
class EnvironmentConfig:
    """环境设置"""

    reward_mode: RewardMode = RewardMode.ABSOLUTE
    pitch_rate_limit_deg: float = 10.0      # 外环俯仰参考最大变化率
    theta_ref_limit_deg: float = 30.0
    track_sideslip: bool = True             # 关闭后侧滑角误差不计入奖励

    def __post_init__(self) -> None:
        self.reward_mode = RewardMode(self.reward_mode)


def attitude_reward(errors: np.ndarray, mode: RewardMode = RewardMode.ABSOLUTE) -> float:
    """姿态奖励，errors为[beta, theta, phi]误差（弧度）"""
    weighted: np.ndarray = ATTITUDE_COST * np.asarray(errors, dtype=float)

    if mode == RewardMode.LITERAL:
        return float(np.mean(np.clip(weighted, -1.0, 0.0)))
    return float(-np.mean(np.clip(np.abs(weighted), 0.0, 1.0)))


def altitude_reward(dh: float, mode: RewardMode = RewardMode.ABSOLUTE) -> float:
    """高度奖励，dh为高度误差（米）"""
    weighted: float = ALTITUDE_COST * dh

    if mode == RewardMode.LITERAL:
        return float(np.clip(weighted, -1.0, 0.0))
    return float(-np.clip(abs(weighted), 0.0, 1.0))


def attitude_action_map(action: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """动作[-1,1]映射为每步舵面增量，上下界为舵面限幅的1/100"""
    du_min: np.ndarray = np.asarray(lower) / 100
    du_max: np.ndarray = np.asarray(upper) / 100
    return du_min + (np.asarray(action) + 1.0) * (du_max - du_min) / 2


def altitude_action_map(action: float, dt: float, rate_limit_deg: float = 10.0) -> float:
    """动作[-1,1]映射为每步俯仰角参考增量"""
    return float(np.asarray(action).reshape(-1)[0]) * np.radians(rate_limit_deg) * dt


def attitude_observation(
    reading: SensorReading,
    refs: ReferenceFrame,
    u: np.ndarray
) -> np.ndarray:
    """姿态观测 [c⊙e, u, p, q, r]"""
    errors: np.ndarray = attitude_errors(reading, refs)
    return np.concatenate([ATTITUDE_COST * errors, u, [reading.p, reading.q, reading.r]])


def altitude_observation(reading: SensorReading, h_ref: float, theta_ref: float) -> np.ndarray:
    """高度观测 [c⊙e, θ^R]"""
    return np.array([ALTITUDE_COST * (h_ref - reading.h), theta_ref])


def attitude_errors(reading: SensorReading, refs: ReferenceFrame) -> np.ndarray:
    """[beta, theta, phi]误差"""
    return np.array([
        refs.beta - reading.beta,
        refs.theta - reading.theta,
        refs.phi - reading.phi,
    ])


def agent_policy(agent: SacAgent, deterministic: bool) -> Policy:
    """将智能体包装为策略函数"""
    def policy(s: np.ndarray) -> np.ndarray:
        return agent.act(s, deterministic)
    return policy


@dataclass
class StepResult:
    """单步结果"""

    attitude: Transition
    attitude_reward: float
    altitude: Optional[Transition] = None
    altitude_reward: float = np.nan
    done: bool = False
    aborted: bool = False


@dataclass
class EpisodeLog:
    """回合记录"""

    rows: List[Dict[str, float]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """内部弧度，输出时转换为角度"""
        return rad_columns(pd.DataFrame(self.rows), ANGLE_COLUMNS)


class FlightEnvironment:
    """飞行控制环境"""

    def __init__(
        self,
        plant: Optional[PlantConfig] = None,
        scenario: Optional[ScenarioSpec] = None,
        program: Optional[ReferenceProgram] = None,
        config: Optional[EnvironmentConfig] = None,
        record: bool = True
    ) -> None:
        """构造函数"""
        self.plant: PlantConfig = plant or PlantConfig()
        self.scenario: ScenarioSpec = scenario or ScenarioSpec()
        self.program: ReferenceProgram = program or ReferenceProgram()
        self.config: EnvironmentConfig = config or EnvironmentConfig()
        self.record_log: bool = record

        self.sim: Simulator = Simulator(self.plant, self.scenario.failure, self.scenario.gust)
        self.sensor_rng: np.random.Generator = np.random.default_rng(self.scenario.noise.seed)

        self.u: np.ndarray = np.zeros(3)
        self.theta_ref: float = 0.0
        self.reading: Optional[SensorReading] = None
        self.refs: ReferenceFrame = ReferenceFrame()
        self.duration: float = self.program.duration
        self.log: EpisodeLog = EpisodeLog()
        self.active: bool = False

    @property
    def t(self) -> float:
        return self.sim.t

    @property
    def dt(self) -> float:
        return self.sim.dt

    def reset(
        self,
        program: Optional[ReferenceProgram] = None,
        duration: Optional[float] = None
    ) -> np.ndarray:
        """开始新回合，返回姿态观测"""
        if program:
            self.program = program
        self.duration = duration if duration else self.program.duration

        self.sim.reset(self.scenario.altitude, self.scenario.speed)

        self.u = self.sim.surfaces
        self.theta_ref = self.sim.state.theta
        self.reading = self._read()
        self.refs = self._reference(self.t)
        self.log = EpisodeLog()
        self.active = True

        return attitude_observation(self.reading, self.refs, self.u)

    def altitude_observation(self) -> np.ndarray:
        """当前高度观测"""
        return altitude_observation(self.reading, self.refs.h, self.theta_ref)

    def attitude_observation(self, cascaded: bool = False) -> np.ndarray:
        """当前姿态观测，级联时俯仰参考来自外环"""
        return attitude_observation(self.reading, self._inner_refs(self.refs, cascaded), self.u)

    def attitude_step(self, inner: Policy) -> StepResult:
        """仅内环：俯仰参考来自参考信号程序"""
        self._check_active()

        s: np.ndarray = self.attitude_observation()
        a: np.ndarray = np.asarray(inner(s), dtype=float)

        aborted: bool = self._advance(a)
        if aborted:
            return self._abort_result(s, a)

        refs: ReferenceFrame = self._reference(self.t)
        reward: float = self._attitude_reward(refs)

        self.refs = refs
        s_next: np.ndarray = self.attitude_observation()
        done: bool = self._finished()

        self._record(refs, reward, np.nan)
        return StepResult(Transition(s, a, reward, s_next), reward, done=done)

    def cascade_step(self, outer: Policy, inner: Policy) -> StepResult:
        """级联一步：外环更新θ^R，内环更新舵面，仿真器推进一步"""
        self._check_active()

        s_alt: np.ndarray = self.altitude_observation()
        a_alt: np.ndarray = np.asarray(outer(s_alt), dtype=float)

        limit: float = np.radians(self.config.theta_ref_limit_deg)
        delta: float = altitude_action_map(a_alt, self.dt, self.config.pitch_rate_limit_deg)
        self.theta_ref = float(np.clip(self.theta_ref + delta, -limit, limit))

        s_att: np.ndarray = self.attitude_observation(cascaded=True)
        a_att: np.ndarray = np.asarray(inner(s_att), dtype=float)

        aborted: bool = self._advance(a_att)
        if aborted:
            result: StepResult = self._abort_result(s_att, a_att)
            result.altitude = Transition(s_alt, a_alt, -1.0, s_alt, done=True)
            result.altitude_reward = -1.0
            return result

        refs: ReferenceFrame = self._reference(self.t)
        inner_refs: ReferenceFrame = self._inner_refs(refs, cascaded=True)
        r_att: float = self._attitude_reward(inner_refs)
        r_alt: float = altitude_reward(refs.h - self.reading.h, self.config.reward_mode)

        self.refs = refs
        s_alt_next: np.ndarray = self.altitude_observation()
        s_att_next: np.ndarray = self.attitude_observation(cascaded=True)
        done: bool = self._finished()

        self._record(inner_refs, r_att, r_alt)
        return StepResult(
            attitude=Transition(s_att, a_att, r_att, s_att_next),
            attitude_reward=r_att,
            altitude=Transition(s_alt, a_alt, r_alt, s_alt_next),
            altitude_reward=r_alt,
            done=done,
        )

    def _advance(self, action: np.ndarray) -> bool:
        """积分舵面增量并推进仿真器，返回是否中止"""
        lower: np.ndarray = self.sim.lower
        upper: np.ndarray = self.sim.upper
        self.u = np.clip(self.u + attitude_action_map(action, lower, upper), lower, upper)

        try:
            self.sim.step(self.u)
        except SimulationAbort:
            self.active = False
            return True

        self.reading = self._read()
        return False

    def _abort_result(self, s: np.ndarray, a: np.ndarray) -> StepResult:
        """中止时的终止经验，奖励取最差值"""
        return StepResult(Transition(s, a, -1.0, s, done=True), -1.0, done=True, aborted=True)

    def _read(self) -> SensorReading:
        """传感器读数"""
        state = self.sim.state
        truth: SensorReading = SensorReading(
            p=state.p,
            q=state.q,
            r=state.r,
            theta=state.theta,
            phi=state.phi,
            beta=state.beta,
            h=state.h,
        )
        return observe(truth, self.scenario.noise, self.sensor_rng)

    def _attitude_reward(self, refs: ReferenceFrame) -> float:
        errors: np.ndarray = attitude_errors(self.reading, refs)
        if not self.config.track_sideslip:
            errors[0] = 0.0
        return attitude_reward(errors, self.config.reward_mode)

    def _reference(self, t: float) -> ReferenceFrame:
        return gen_reference(self.program, t, self.scenario.altitude)

    def _inner_refs(self, refs: ReferenceFrame, cascaded: bool) -> ReferenceFrame:
        """内环参考，侧滑角参考恒为零"""
        theta: float = self.theta_ref if cascaded else refs.theta
        return ReferenceFrame(beta=0.0, theta=theta, phi=refs.phi, h=refs.h)

    def _finished(self) -> bool:
        finished: bool = self.t >= self.duration - 1e-9
        if finished:
            self.active = False
        return finished

    def _check_active(self) -> None:
        if not self.active:
            raise UsageError("回合已结束，需要重新reset")

    def _record(self, refs: ReferenceFrame, r_att: float, r_alt: float) -> None:
        """记录一行"""
        if not self.record_log:
            return

        row: Dict[str, float] = self.sim.record()
        row.update({
            "beta_ref": refs.beta,
            "theta_ref": refs.theta,
            "phi_ref": refs.phi,
            "h_ref": refs.h,
            "attitude_reward": r_att,
            "altitude_reward": r_alt,
        })
        self.log.rows.append(row)

    def episode_frame(self) -> pd.DataFrame:
        """回合记录（角度制）"""
        return self.log.to_frame()
