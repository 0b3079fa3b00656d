"""
参考信号生成：随机阶跃姿态、爬升转弯高度剖面、正弦与三角波。
"""

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .base import ReferenceKind, ConfigurationError, UsageError


@dataclass
class ReferenceFrame:
    """单个时刻的参考值（弧度、米）"""

    beta: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    h: float = 0.0


@dataclass
class ReferenceProgram:
    """参考信号程序"""

    kind: ReferenceKind = ReferenceKind.ALTITUDE_PROFILE
    duration: float = 90.0
    seed: int = 0

    # 随机阶跃
    pitch_min_deg: float = -15.0
    pitch_max_deg: float = 25.0
    roll_min_deg: float = -70.0
    roll_max_deg: float = 70.0
    step_min_duration: float = 2.5
    step_max_duration: float = 10.0

    # 爬升转弯剖面
    initial_hold: float = 20.0
    climb_duration: float = 25.0
    middle_hold: float = 10.0
    climb_rate: float = 2.0
    turn_roll_deg: float = 40.0

    # 周期信号，高度偏置为空时取初始高度
    altitude_period: float = 80.0
    altitude_amplitude: float = 80.0
    roll_period: float = 50.0
    roll_amplitude_deg: float = 50.0
    altitude_offset: Optional[float] = None

    def __post_init__(self) -> None:
        """检查参数"""
        self.kind = ReferenceKind(self.kind)

        if self.duration <= 0:
            raise ConfigurationError("参考信号时长必须为正", "reference.duration")
        if self.altitude_period <= 0 or self.roll_period <= 0:
            raise ConfigurationError("周期必须为正", "reference.altitude_period/roll_period")
        if self.altitude_amplitude < 0 or self.roll_amplitude_deg < 0:
            raise ConfigurationError("幅值不能为负", "reference.altitude_amplitude/roll_amplitude_deg")
        if not 0 < self.step_min_duration <= self.step_max_duration:
            raise ConfigurationError("阶跃持续时间范围无效", "reference.step_min_duration")
        if self.pitch_min_deg > self.pitch_max_deg or self.roll_min_deg > self.roll_max_deg:
            raise ConfigurationError("阶跃幅值范围无效", "reference.pitch_min_deg/roll_min_deg")

    def with_seed(self, seed: int) -> "ReferenceProgram":
        """换一个随机种子"""
        return replace(self, seed=seed)


def low_frequency(kind: ReferenceKind, duration: float = 90.0) -> ReferenceProgram:
    """低频周期信号"""
    return ReferenceProgram(
        kind=kind,
        duration=duration,
        altitude_period=80.0,
        altitude_amplitude=80.0,
        roll_period=50.0,
        roll_amplitude_deg=50.0,
    )


def high_frequency(kind: ReferenceKind, duration: float = 90.0) -> ReferenceProgram:
    """高频周期信号"""
    return ReferenceProgram(
        kind=kind,
        duration=duration,
        altitude_period=40.0,
        altitude_amplitude=40.0,
        roll_period=25.0,
        roll_amplitude_deg=25.0,
    )


@lru_cache(maxsize=64)
def step_schedule(
    seed: int,
    channel: int,
    duration: float,
    level_range: Tuple[float, float],
    step_range: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray]:
    """随机阶跃序列，返回各段起始时刻和幅值"""
    rng: np.random.Generator = np.random.default_rng([seed, channel])

    starts: list = []
    levels: list = []
    t: float = 0.0
    while t < duration:
        starts.append(t)
        levels.append(rng.uniform(*level_range))
        t += rng.uniform(*step_range)

    return np.array(starts), np.array(levels)


def _step_value(starts: np.ndarray, levels: np.ndarray, t: float) -> float:
    index: int = int(np.searchsorted(starts, t, side="right")) - 1
    return float(levels[max(index, 0)])


def _periodic(kind: ReferenceKind, amplitude: float, period: float, t: float) -> float:
    """正弦或三角波，t=0处为零并向上"""
    phase: float = 2 * np.pi * t / period
    if kind == ReferenceKind.SINUSOIDAL:
        return amplitude * np.sin(phase)
    return 2 * amplitude / np.pi * np.arcsin(np.sin(phase))


def altitude_profile(program: ReferenceProgram, t: float, initial_altitude: float) -> Tuple[float, float]:
    """爬升-平飞-爬升剖面，返回(h, phi)"""
    first: float = program.initial_hold
    second: float = first + program.climb_duration + program.middle_hold
    climb: float = program.climb_rate * program.climb_duration
    roll: float = np.radians(program.turn_roll_deg)

    h: float = initial_altitude
    phi: float = 0.0

    if t >= first:
        h += program.climb_rate * min(t - first, program.climb_duration)
        if t < first + program.climb_duration:
            phi = roll

    if t >= second:
        h = initial_altitude + climb + program.climb_rate * min(t - second, program.climb_duration)
        if t < second + program.climb_duration:
            phi = -roll

    return h, phi


def gen_reference(
    program: ReferenceProgram,
    t: float,
    initial_altitude: float = 2000.0
) -> ReferenceFrame:
    """生成t时刻的参考值，侧滑角参考恒为零"""
    if t < 0:
        raise UsageError(f"时间不能为负：{t}")

    kind: ReferenceKind = program.kind

    if kind == ReferenceKind.ATTITUDE_STEPS:
        step_range: Tuple[float, float] = (program.step_min_duration, program.step_max_duration)
        pitch_starts, pitch_levels = step_schedule(
            program.seed, 0, program.duration, (program.pitch_min_deg, program.pitch_max_deg), step_range
        )
        roll_starts, roll_levels = step_schedule(
            program.seed, 1, program.duration, (program.roll_min_deg, program.roll_max_deg), step_range
        )
        return ReferenceFrame(
            theta=np.radians(_step_value(pitch_starts, pitch_levels, t)),
            phi=np.radians(_step_value(roll_starts, roll_levels, t)),
            h=initial_altitude,
        )

    if kind == ReferenceKind.ALTITUDE_PROFILE:
        h, phi = altitude_profile(program, t, initial_altitude)
        return ReferenceFrame(phi=phi, h=h)

    offset: float = initial_altitude if program.altitude_offset is None else program.altitude_offset
    return ReferenceFrame(
        phi=np.radians(_periodic(kind, program.roll_amplitude_deg, program.roll_period, t)),
        h=offset + _periodic(kind, program.altitude_amplitude, program.altitude_period, t),
    )
