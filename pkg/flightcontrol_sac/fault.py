"""
故障、传感器噪声与离散垂直阵风。

所有函数均为 (spec, t, 输入) 的纯函数，随机数发生器由调用方持有。
"""

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Dict, List, Tuple

import numpy as np

from .base import FailureType, ConfigurationError, UnknownScenarioError, UsageError

if TYPE_CHECKING:
    from .simulator import AeroModel, ControlInput


FT_TO_M: float = 0.3048

SENSOR_CHANNELS: List[str] = ["p", "q", "r", "theta", "phi", "beta", "h"]


@dataclass
class FailureSpec:
    """故障类型、发生时刻与参数"""

    kind: FailureType = FailureType.NONE
    onset_time: float = 0.0
    rudder_jam_deg: float = -15.0
    aileron_factor: float = 0.3
    elevator_limit_deg: float = 2.5
    htail_factor: float = 0.3
    clmax_factor: float = 0.7
    cd0_increase: float = 0.06
    cg_shift: float = -0.25         # m，负值为重心后移

    def __post_init__(self) -> None:
        """检查参数范围"""
        try:
            self.kind = FailureType(self.kind)
        except ValueError:
            raise ConfigurationError(f"未知故障类型{self.kind}", "failure.kind")

        if self.onset_time < 0:
            raise ConfigurationError("故障发生时刻不能为负", "failure.onset_time")
        for name in ("aileron_factor", "htail_factor", "clmax_factor"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError("系数必须在[0,1]内", f"failure.{name}")
        if self.elevator_limit_deg <= 0:
            raise ConfigurationError("升降舵限幅必须为正", "failure.elevator_limit_deg")
        if self.cd0_increase < 0:
            raise ConfigurationError("阻力增量不能为负", "failure.cd0_increase")

    def active(self, t: float) -> bool:
        """t时刻故障是否生效"""
        return self.kind != FailureType.NONE and t >= self.onset_time


def apply_failure(
    spec: FailureSpec,
    t: float,
    surfaces: "ControlInput",
    model: "AeroModel"
) -> Tuple["ControlInput", "AeroModel"]:
    """按故障修改舵面位置和气动模型，故障发生前原样返回"""
    if t < 0:
        raise UsageError(f"时间不能为负：{t}")

    if not spec.active(t):
        return surfaces, model

    kind: FailureType = spec.kind

    if kind == FailureType.RUDDER_JAM:
        surfaces = replace(surfaces, rudder=np.radians(spec.rudder_jam_deg))
    elif kind == FailureType.AILERON_EFF:
        surfaces = replace(surfaces, aileron=surfaces.aileron * spec.aileron_factor)
    elif kind == FailureType.ELEVATOR_RANGE:
        limit: float = np.radians(spec.elevator_limit_deg)
        surfaces = replace(surfaces, elevator=float(np.clip(surfaces.elevator, -limit, limit)))
    elif kind == FailureType.HTAIL_LOSS:
        k: float = spec.htail_factor
        model = replace(
            model,
            CL_de=model.CL_de * k,
            CD_de=model.CD_de * k,
            Cm_de=model.Cm_de * k,
            Cm_q=model.Cm_q * k,
        )
    elif kind == FailureType.ICING:
        model = replace(
            model,
            CL_max=model.CL_max * spec.clmax_factor,
            CD_0=model.CD_0 + spec.cd0_increase,
        )
    elif kind == FailureType.CG_SHIFT:
        model = replace(model, dx_cg=spec.cg_shift)
    else:
        raise ConfigurationError(f"未知故障类型{kind}", "failure.kind")

    return surfaces, model


@dataclass
class NoiseSpec:
    """传感器偏置与噪声标准差（弧度、弧度每秒、米）"""

    enabled: bool = False
    seed: int = 0
    rate_ssd: float = 6.3e-4
    rate_bias: float = 3.0e-5
    attitude_ssd: float = 3.2e-5
    attitude_bias: float = 4.0e-3
    beta_ssd: float = 2.7e-4
    beta_bias: float = 1.8e-3
    altitude_ssd: float = 6.7e-2
    altitude_bias: float = 8.0e-3

    def __post_init__(self) -> None:
        """检查标准差"""
        for name in ("rate_ssd", "attitude_ssd", "beta_ssd", "altitude_ssd"):
            if getattr(self, name) < 0:
                raise ConfigurationError("噪声标准差不能为负", f"noise.{name}")

    def biases(self) -> np.ndarray:
        """按SENSOR_CHANNELS顺序排列的偏置"""
        b: List[float] = [self.rate_bias] * 3 + [self.attitude_bias] * 2
        return np.array(b + [self.beta_bias, self.altitude_bias])

    def ssds(self) -> np.ndarray:
        """按SENSOR_CHANNELS顺序排列的标准差"""
        s: List[float] = [self.rate_ssd] * 3 + [self.attitude_ssd] * 2
        return np.array(s + [self.beta_ssd, self.altitude_ssd])


@dataclass
class SensorReading:
    """外部可观测量"""

    p: float
    q: float
    r: float
    theta: float
    phi: float
    beta: float
    h: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in SENSOR_CHANNELS])

    @classmethod
    def from_array(cls, values: np.ndarray) -> "SensorReading":
        return cls(*(float(v) for v in values))


def noise_samples(spec: NoiseSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """生成n组噪声，形状(n, 7)"""
    return spec.biases() + spec.ssds() * rng.standard_normal((n, len(SENSOR_CHANNELS)))


def observe(truth: SensorReading, spec: NoiseSpec, rng: np.random.Generator) -> SensorReading:
    """叠加偏置和高斯噪声，舵面反馈不加噪声"""
    if not spec.enabled:
        return replace(truth)

    values: np.ndarray = truth.to_array() + noise_samples(spec, rng, 1)[0]
    return SensorReading.from_array(values)


@dataclass
class GustSpec:
    """离散垂直阵风，作用为迎角阶跃"""

    enabled: bool = False
    speed: float = 15 * FT_TO_M
    start_times: List[float] = field(default_factory=lambda: [20.0, 75.0])
    duration: float = 3.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigurationError("阵风持续时间必须为正", "gust.duration")


def gust_alpha_offset(spec: GustSpec, t: float, airspeed: float) -> float:
    """阵风窗口内返回 arctan(w/V)，否则为0"""
    if airspeed <= 0:
        raise UsageError(f"空速必须为正：{airspeed}")

    if not spec.enabled:
        return 0.0

    for start in spec.start_times:
        if start <= t < start + spec.duration:
            return float(np.arctan(spec.speed / airspeed))
    return 0.0


@dataclass
class ScenarioSpec:
    """评估/训练场景"""

    name: str = "nominal"
    failure: FailureSpec = field(default_factory=FailureSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    gust: GustSpec = field(default_factory=GustSpec)
    altitude: float = 2000.0
    speed: float = 90.0

    def __post_init__(self) -> None:
        if self.speed <= 0 or self.altitude <= 0:
            raise ConfigurationError(
                f"初始飞行状态无效：h={self.altitude}, V={self.speed}", "scenario.altitude/speed"
            )


def _failure_scenario(name: str, kind: FailureType, onset: float) -> Callable[[], ScenarioSpec]:
    """生成单一故障场景的工厂函数"""
    def build() -> ScenarioSpec:
        return ScenarioSpec(name=name, failure=FailureSpec(kind=kind, onset_time=onset))
    return build


def _noise_gust_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        name="noise_gust",
        noise=NoiseSpec(enabled=True),
        gust=GustSpec(enabled=True),
    )


SCENARIO_PRESETS: Dict[str, Callable[[], ScenarioSpec]] = {
    "nominal": ScenarioSpec,
    "rudder_jam": _failure_scenario("rudder_jam", FailureType.RUDDER_JAM, 10.0),
    "aileron_eff": _failure_scenario("aileron_eff", FailureType.AILERON_EFF, 30.0),
    "elevator_range": _failure_scenario("elevator_range", FailureType.ELEVATOR_RANGE, 10.0),
    "htail_loss": _failure_scenario("htail_loss", FailureType.HTAIL_LOSS, 10.0),
    "icing": _failure_scenario("icing", FailureType.ICING, 20.0),
    "cg_shift": _failure_scenario("cg_shift", FailureType.CG_SHIFT, 20.0),
    "noise_gust": _noise_gust_scenario,
}

FAILURE_PRESETS: List[str] = [
    "rudder_jam", "aileron_eff", "elevator_range", "htail_loss", "icing", "cg_shift"
]


def get_scenario(name: str) -> ScenarioSpec:
    """按名称取预设场景"""
    if name not in SCENARIO_PRESETS:
        raise UnknownScenarioError(
            f"未知场景{name}，可选：{', '.join(SCENARIO_PRESETS)}"
        )
    return SCENARIO_PRESETS[name]()
