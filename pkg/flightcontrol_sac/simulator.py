"""
六自由度固定翼飞机仿真。

机体轴系刚体方程（含Ixz惯性积），气动系数线性叠加，ISA大气密度，
RK4定步长积分。舵机为一阶低通加饱和，偏航阻尼器经洗出滤波作用于方向舵，
速度由独立PID自动油门保持。

状态向量：[p, q, r, u, v, w, phi, theta, psi, h, x_e, y_e]
舵面顺序：[elevator, aileron, rudder]，正方向舵产生机头右偏力矩。
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import fsolve

from .base import GRAVITY, SIM_DT, ConfigurationError, SimulationAbort, UsageError
from .fault import FailureSpec, GustSpec, apply_failure, gust_alpha_offset


class StateIndex(IntEnum):
    P = 0
    Q = 1
    R = 2
    U = 3
    V = 4
    W = 5
    PHI = 6
    THETA = 7
    PSI = 8
    H = 9
    XE = 10
    YE = 11


STATE_SIZE: int = len(StateIndex)


@dataclass
class AeroModel:
    """气动导数、几何与质量特性"""

    # 几何与质量
    mass: float = 4500.0
    S: float = 24.6
    b: float = 13.3
    cbar: float = 2.0
    Ixx: float = 11187.0
    Iyy: float = 31397.0
    Izz: float = 41972.0
    Ixz: float = 1726.0
    dx_cg: float = 0.0              # 重心相对气动参考点的位置，m，向前为正；Cm中的项为 -dx_cg/cbar·CL

    # 升力
    CL_0: float = 0.12
    CL_alpha: float = 5.7
    CL_q: float = 3.8
    CL_de: float = 0.43
    CL_max: float = 1.4

    # 阻力
    CD_0: float = 0.023
    k_induced: float = 0.052
    CD_de: float = 0.05

    # 侧力
    CY_beta: float = -0.6
    CY_dr: float = -0.2

    # 滚转
    Cl_beta: float = -0.08
    Cl_p: float = -0.5
    Cl_r: float = 0.15
    Cl_da: float = 0.15
    Cl_dr: float = -0.01

    # 俯仰
    Cm_0: float = 0.02
    Cm_alpha: float = -1.0
    Cm_q: float = -17.0
    Cm_de: float = -1.5

    # 偏航
    Cn_beta: float = 0.12
    Cn_p: float = -0.03
    Cn_r: float = -0.18
    Cn_dr: float = 0.09
    Cn_da: float = -0.005

    def __post_init__(self) -> None:
        """检查物理参数"""
        for name in ("mass", "S", "b", "cbar", "Ixx", "Iyy", "Izz"):
            if getattr(self, name) <= 0:
                raise ConfigurationError("必须为正", f"plant.aero.{name}")

        if self.Ixx * self.Izz - self.Ixz ** 2 <= 0:
            raise ConfigurationError("惯性张量不正定", "plant.aero.Ixz")
        if self.CL_max <= self.CL_0:
            raise ConfigurationError("CL_max必须大于CL_0", "plant.aero.CL_max")


@dataclass
class ActuatorConfig:
    """舵机限幅（度）与时间常数（秒）"""

    elevator_min_deg: float = -20.05
    elevator_max_deg: float = 14.90
    aileron_max_deg: float = 20.0
    rudder_max_deg: float = 22.0
    time_constant: float = 1 / 30

    def __post_init__(self) -> None:
        if not self.elevator_min_deg < 0 < self.elevator_max_deg:
            raise ConfigurationError("升降舵限幅必须包含0", "plant.actuator.elevator_min_deg")
        if self.aileron_max_deg <= 0 or self.rudder_max_deg <= 0:
            raise ConfigurationError("舵面限幅必须为正", "plant.actuator")
        if self.time_constant <= 0:
            raise ConfigurationError("时间常数必须为正", "plant.actuator.time_constant")

    @property
    def lower(self) -> np.ndarray:
        """舵面下限（弧度）"""
        return np.radians([self.elevator_min_deg, -self.aileron_max_deg, -self.rudder_max_deg])

    @property
    def upper(self) -> np.ndarray:
        """舵面上限（弧度）"""
        return np.radians([self.elevator_max_deg, self.aileron_max_deg, self.rudder_max_deg])


@dataclass
class YawDamperConfig:
    enabled: bool = True
    gain: float = 0.3
    washout_time: float = 1.0


@dataclass
class AutothrottleConfig:
    enabled: bool = True
    kp: float = 1500.0
    ki: float = 150.0
    kd: float = 0.0
    thrust_max: float = 22000.0

    def __post_init__(self) -> None:
        if self.thrust_max <= 0:
            raise ConfigurationError("最大推力必须为正", "plant.autothrottle.thrust_max")


@dataclass
class PlantConfig:
    """被控对象全部配置"""

    aero: AeroModel = field(default_factory=AeroModel)
    actuator: ActuatorConfig = field(default_factory=ActuatorConfig)
    yaw_damper: YawDamperConfig = field(default_factory=YawDamperConfig)
    autothrottle: AutothrottleConfig = field(default_factory=AutothrottleConfig)
    dt: float = SIM_DT

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigurationError("积分步长必须为正", "plant.dt")


@dataclass
class ControlInput:
    """舵面偏角（弧度）与推力（牛）"""

    elevator: float = 0.0
    aileron: float = 0.0
    rudder: float = 0.0
    thrust: float = 0.0

    @property
    def surfaces(self) -> np.ndarray:
        return np.array([self.elevator, self.aileron, self.rudder])

    @classmethod
    def from_surfaces(cls, surfaces: np.ndarray, thrust: float = 0.0) -> "ControlInput":
        return cls(float(surfaces[0]), float(surfaces[1]), float(surfaces[2]), float(thrust))


@dataclass
class ActuatorState:
    """舵机滤波后位置与指令"""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    command: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class AircraftState:
    """刚体状态"""

    x: np.ndarray

    @property
    def p(self) -> float:
        return float(self.x[StateIndex.P])

    @property
    def q(self) -> float:
        return float(self.x[StateIndex.Q])

    @property
    def r(self) -> float:
        return float(self.x[StateIndex.R])

    @property
    def phi(self) -> float:
        return float(self.x[StateIndex.PHI])

    @property
    def theta(self) -> float:
        return float(self.x[StateIndex.THETA])

    @property
    def psi(self) -> float:
        return float(self.x[StateIndex.PSI])

    @property
    def h(self) -> float:
        return float(self.x[StateIndex.H])

    @property
    def airspeed(self) -> float:
        return float(np.linalg.norm(self.x[StateIndex.U:StateIndex.W + 1]))

    @property
    def alpha(self) -> float:
        return float(np.arctan2(self.x[StateIndex.W], self.x[StateIndex.U]))

    @property
    def beta(self) -> float:
        v: float = self.airspeed
        if v <= 0:
            return 0.0
        return float(np.arcsin(np.clip(self.x[StateIndex.V] / v, -1.0, 1.0)))

    def copy(self) -> "AircraftState":
        return AircraftState(self.x.copy())


@dataclass
class TrimPoint:
    """定直平飞配平点"""

    altitude: float
    speed: float
    alpha: float
    elevator: float
    thrust: float
    residual: float = 0.0

    def state(self) -> AircraftState:
        """配平状态向量"""
        x: np.ndarray = np.zeros(STATE_SIZE)
        x[StateIndex.U] = self.speed * np.cos(self.alpha)
        x[StateIndex.W] = self.speed * np.sin(self.alpha)
        x[StateIndex.THETA] = self.alpha
        x[StateIndex.H] = self.altitude
        return AircraftState(x)


@dataclass
class ThrottleState:
    """自动油门PID状态"""

    integral: float = 0.0
    previous_error: float = 0.0
    feedforward: float = 0.0


def isa_density(h: float) -> float:
    """国际标准大气密度"""
    if h <= 11000.0:
        temperature: float = 288.15 - 0.0065 * h
        return 1.225 * (temperature / 288.15) ** 4.2559

    rho_11: float = 1.225 * (216.65 / 288.15) ** 4.2559
    return rho_11 * np.exp(-(h - 11000.0) / 6341.6)


def aero_coefficients(
    x: np.ndarray,
    surfaces: np.ndarray,
    model: AeroModel,
    gust_alpha_offset: float = 0.0
) -> Dict[str, float]:
    """计算当前状态的六个气动系数"""
    p, q, r = x[StateIndex.P], x[StateIndex.Q], x[StateIndex.R]
    u, v, w = x[StateIndex.U], x[StateIndex.V], x[StateIndex.W]
    de, da, dr = surfaces

    airspeed: float = np.sqrt(u * u + v * v + w * w)
    alpha: float = np.arctan2(w, u) + gust_alpha_offset
    beta: float = np.arcsin(np.clip(v / airspeed, -1.0, 1.0))

    p_hat: float = p * model.b / (2 * airspeed)
    q_hat: float = q * model.cbar / (2 * airspeed)
    r_hat: float = r * model.b / (2 * airspeed)

    CL: float = model.CL_0 + model.CL_alpha * alpha + model.CL_q * q_hat + model.CL_de * de
    CL = float(np.clip(CL, -model.CL_max, model.CL_max))

    CD: float = model.CD_0 + model.k_induced * CL ** 2 + model.CD_de * de ** 2
    CY: float = model.CY_beta * beta + model.CY_dr * dr
    Cl: float = (
        model.Cl_beta * beta + model.Cl_p * p_hat + model.Cl_r * r_hat
        + model.Cl_da * da + model.Cl_dr * dr
    )
    # 向前为正：后移的重心 dx_cg<0 使 -dx_cg/cbar·CL 为正，即抬头力矩
    Cm: float = (
        model.Cm_0 + model.Cm_alpha * alpha + model.Cm_q * q_hat + model.Cm_de * de
        - model.dx_cg / model.cbar * CL
    )
    Cn: float = (
        model.Cn_beta * beta + model.Cn_p * p_hat + model.Cn_r * r_hat
        + model.Cn_dr * dr + model.Cn_da * da
    )

    return {"CL": CL, "CD": CD, "CY": CY, "Cl": Cl, "Cm": Cm, "Cn": Cn, "alpha": alpha}


def derivatives(
    x: np.ndarray,
    surfaces: np.ndarray,
    thrust: float,
    model: AeroModel,
    gust_alpha_offset: float = 0.0
) -> np.ndarray:
    """刚体运动方程"""
    theta: float = x[StateIndex.THETA]
    if not np.all(np.isfinite(x)) or abs(theta) >= np.pi / 2:
        raise SimulationAbort(f"状态越界：theta={theta}")

    p, q, r = x[StateIndex.P], x[StateIndex.Q], x[StateIndex.R]
    u, v, w = x[StateIndex.U], x[StateIndex.V], x[StateIndex.W]
    phi, psi = x[StateIndex.PHI], x[StateIndex.PSI]

    airspeed: float = np.sqrt(u * u + v * v + w * w)
    if airspeed <= 0:
        raise SimulationAbort("空速为零")

    c: Dict[str, float] = aero_coefficients(x, surfaces, model, gust_alpha_offset)
    qbar_s: float = 0.5 * isa_density(x[StateIndex.H]) * airspeed ** 2 * model.S

    # 气流轴到机体轴
    sa, ca = np.sin(c["alpha"]), np.cos(c["alpha"])
    fx: float = qbar_s * (c["CL"] * sa - c["CD"] * ca) + thrust
    fy: float = qbar_s * c["CY"]
    fz: float = qbar_s * (-c["CL"] * ca - c["CD"] * sa)

    roll: float = qbar_s * model.b * c["Cl"]
    pitch: float = qbar_s * model.cbar * c["Cm"]
    yaw: float = qbar_s * model.b * c["Cn"]

    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(theta), np.cos(theta)
    spsi, cpsi = np.sin(psi), np.cos(psi)

    m: float = model.mass
    du: float = r * v - q * w + fx / m - GRAVITY * sth
    dv: float = p * w - r * u + fy / m + GRAVITY * sphi * cth
    dw: float = q * u - p * v + fz / m + GRAVITY * cphi * cth

    Ixx, Iyy, Izz, Ixz = model.Ixx, model.Iyy, model.Izz, model.Ixz
    gamma: float = Ixx * Izz - Ixz ** 2
    c1: float = ((Iyy - Izz) * Izz - Ixz ** 2) / gamma
    c2: float = (Ixx - Iyy + Izz) * Ixz / gamma
    c3: float = Izz / gamma
    c4: float = Ixz / gamma
    c5: float = (Izz - Ixx) / Iyy
    c6: float = Ixz / Iyy
    c7: float = 1 / Iyy
    c8: float = (Ixx * (Ixx - Iyy) + Ixz ** 2) / gamma
    c9: float = Ixx / gamma

    dp: float = (c1 * r + c2 * p) * q + c3 * roll + c4 * yaw
    dq: float = c5 * p * r - c6 * (p * p - r * r) + c7 * pitch
    dr: float = (c8 * p - c2 * r) * q + c4 * roll + c9 * yaw

    dphi: float = p + np.tan(theta) * (q * sphi + r * cphi)
    dtheta: float = q * cphi - r * sphi
    dpsi: float = (q * sphi + r * cphi) / cth

    dh: float = u * sth - v * sphi * cth - w * cphi * cth
    dxe: float = (
        u * cth * cpsi
        + v * (sphi * sth * cpsi - cphi * spsi)
        + w * (cphi * sth * cpsi + sphi * spsi)
    )
    dye: float = (
        u * cth * spsi
        + v * (sphi * sth * spsi + cphi * cpsi)
        + w * (cphi * sth * spsi - sphi * cpsi)
    )

    return np.array([dp, dq, dr, du, dv, dw, dphi, dtheta, dpsi, dh, dxe, dye])


def rk4_step(
    x: np.ndarray,
    surfaces: np.ndarray,
    thrust: float,
    model: AeroModel,
    dt: float,
    gust_alpha_offset: float = 0.0
) -> np.ndarray:
    """输入保持不变的四阶龙格库塔积分"""
    k1: np.ndarray = derivatives(x, surfaces, thrust, model, gust_alpha_offset)
    k2: np.ndarray = derivatives(x + 0.5 * dt * k1, surfaces, thrust, model, gust_alpha_offset)
    k3: np.ndarray = derivatives(x + 0.5 * dt * k2, surfaces, thrust, model, gust_alpha_offset)
    k4: np.ndarray = derivatives(x + dt * k3, surfaces, thrust, model, gust_alpha_offset)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def level_flight_drag(model: AeroModel, altitude: float, speed: float) -> float:
    """平飞阻力，作为自动油门前馈"""
    qbar_s: float = 0.5 * isa_density(altitude) * speed ** 2 * model.S
    CL: float = min(model.mass * GRAVITY / qbar_s, model.CL_max)
    return qbar_s * (model.CD_0 + model.k_induced * CL ** 2)


def autothrottle_update(
    state: ThrottleState,
    airspeed: float,
    setpoint: float,
    dt: float,
    config: AutothrottleConfig
) -> float:
    """速度保持PID，输出限幅时冻结积分"""
    if airspeed <= 0:
        raise UsageError(f"空速必须为正：{airspeed}")

    error: float = setpoint - airspeed
    derivative: float = (error - state.previous_error) / dt
    state.previous_error = error

    base: float = state.feedforward + config.kp * error + config.kd * derivative
    candidate: float = base + config.ki * (state.integral + error * dt)

    saturated_high: bool = candidate > config.thrust_max and error > 0
    saturated_low: bool = candidate < 0 and error < 0
    if not (saturated_high or saturated_low):
        state.integral += error * dt

    thrust: float = base + config.ki * state.integral
    return float(np.clip(thrust, 0.0, config.thrust_max))


def trim(model: AeroModel, altitude: float, speed: float) -> TrimPoint:
    """求解定直平飞配平点 (alpha, elevator, thrust)"""
    if speed <= 0 or altitude <= 0:
        raise ConfigurationError(f"配平条件无效：h={altitude}, V={speed}", "scenario")

    def residual(z: np.ndarray) -> np.ndarray:
        alpha, elevator, thrust = z
        point: TrimPoint = TrimPoint(altitude, speed, alpha, elevator, thrust)
        xdot: np.ndarray = derivatives(point.state().x, np.array([elevator, 0.0, 0.0]), thrust, model)
        return np.array([xdot[StateIndex.U], xdot[StateIndex.W], xdot[StateIndex.Q]])

    guess: np.ndarray = np.array([0.05, 0.0, level_flight_drag(model, altitude, speed)])
    solution, info, ier, msg = fsolve(residual, guess, full_output=True, xtol=1e-10)
    worst: float = float(np.max(np.abs(info["fvec"])))
    if worst > 1e-6:
        raise ConfigurationError(f"配平求解失败：{msg}（残差{worst:.2e}）", "scenario")

    alpha, elevator, thrust = (float(v) for v in solution)
    return TrimPoint(
        altitude=altitude,
        speed=speed,
        alpha=alpha,
        elevator=elevator,
        thrust=thrust,
        residual=worst,
    )


class Simulator:
    """100Hz飞机仿真器"""

    def __init__(
        self,
        config: Optional[PlantConfig] = None,
        failure: Optional[FailureSpec] = None,
        gust: Optional[GustSpec] = None
    ) -> None:
        """构造函数"""
        self.config: PlantConfig = config or PlantConfig()
        self.failure: FailureSpec = failure or FailureSpec()
        self.gust: GustSpec = gust or GustSpec()

        self.dt: float = self.config.dt
        self.lower: np.ndarray = self.config.actuator.lower
        self.upper: np.ndarray = self.config.actuator.upper
        self.filter_gain: float = 1.0 - np.exp(-self.dt / self.config.actuator.time_constant)
        self.washout_gain: float = 1.0 - np.exp(-self.dt / self.config.yaw_damper.washout_time)

        self.state: Optional[AircraftState] = None
        self.actuator: ActuatorState = ActuatorState()
        self.throttle: ThrottleState = ThrottleState()
        self.thrust: float = 0.0
        self.speed_setpoint: float = 0.0
        self.yaw_rate_lowpass: float = 0.0
        self.effective: ControlInput = ControlInput()
        self.model: AeroModel = self.config.aero

        self.step_index: int = 0
        self.aborted: bool = False

    @property
    def t(self) -> float:
        """仿真时间"""
        return self.step_index * self.dt

    @property
    def surfaces(self) -> np.ndarray:
        """当前舵面实际位置"""
        return self.actuator.position.copy()

    def reset(self, altitude: float, speed: float) -> AircraftState:
        """非配平初始化：水平姿态、零角速度、零舵面"""
        if speed <= 0 or altitude <= 0 or not np.isfinite(speed) or not np.isfinite(altitude):
            raise ConfigurationError(f"初始飞行状态无效：h={altitude}, V={speed}", "scenario")

        x: np.ndarray = np.zeros(STATE_SIZE)
        x[StateIndex.U] = speed
        x[StateIndex.H] = altitude

        feedforward: float = level_flight_drag(self.config.aero, altitude, speed)
        feedforward = min(feedforward, self.config.autothrottle.thrust_max)
        self._start(AircraftState(x), np.zeros(3), speed, feedforward)
        return self.state.copy()

    def reset_trimmed(self, point: TrimPoint) -> AircraftState:
        """从配平点开始"""
        self._start(point.state(), np.array([point.elevator, 0.0, 0.0]), point.speed, point.thrust)
        return self.state.copy()

    def set_state(
        self,
        state: Union[AircraftState, np.ndarray],
        surfaces: Optional[np.ndarray] = None,
        thrust: Optional[float] = None
    ) -> None:
        """直接设置状态，主要用于测试"""
        x: np.ndarray = state.x if isinstance(state, AircraftState) else np.asarray(state, dtype=float)
        if surfaces is None:
            surfaces = self.actuator.position
        if thrust is None:
            thrust = self.thrust

        speed: float = float(np.linalg.norm(x[StateIndex.U:StateIndex.W + 1]))
        self._start(AircraftState(x.copy()), np.asarray(surfaces, dtype=float), speed, thrust)

    def _start(self, state: AircraftState, surfaces: np.ndarray, speed: float, thrust: float) -> None:
        """公共初始化"""
        self.state = state
        position: np.ndarray = np.clip(surfaces, self.lower, self.upper)
        self.actuator = ActuatorState(position=position.copy(), command=position.copy())
        self.throttle = ThrottleState(feedforward=thrust)
        self.thrust = thrust
        self.speed_setpoint = speed
        self.yaw_rate_lowpass = state.r
        self.effective = ControlInput.from_surfaces(position, thrust)
        self.model = self.config.aero
        self.step_index = 0
        self.aborted = False

    def step(self, command: Union[ControlInput, np.ndarray]) -> AircraftState:
        """推进一个控制周期"""
        if self.state is None:
            raise UsageError("仿真器尚未初始化")
        if self.aborted:
            raise UsageError("仿真已中止，需要重新reset")

        if isinstance(command, ControlInput):
            surfaces_cmd: np.ndarray = command.surfaces
        else:
            surfaces_cmd = np.asarray(command, dtype=float).copy()

        t: float = self.t
        x: np.ndarray = self.state.x

        # 偏航阻尼器：洗出滤波后的偏航角速度
        if self.config.yaw_damper.enabled:
            r: float = x[StateIndex.R]
            self.yaw_rate_lowpass += (r - self.yaw_rate_lowpass) * self.washout_gain
            surfaces_cmd[2] -= self.config.yaw_damper.gain * (r - self.yaw_rate_lowpass)

        # 舵机一阶低通（零阶保持精确离散）加饱和
        command_clipped: np.ndarray = np.clip(surfaces_cmd, self.lower, self.upper)
        position: np.ndarray = self.actuator.position
        position += (command_clipped - position) * self.filter_gain
        np.clip(position, self.lower, self.upper, out=position)
        self.actuator.command = command_clipped

        # 故障：卡死与限幅作用于舵面实际位置
        actual: ControlInput = ControlInput.from_surfaces(position)
        effective, model = apply_failure(self.failure, t, actual, self.config.aero)
        position[0] = effective.elevator
        position[2] = effective.rudder

        state: AircraftState = self.state
        if self.config.autothrottle.enabled:
            self.thrust = autothrottle_update(
                self.throttle,
                state.airspeed,
                self.speed_setpoint,
                self.dt,
                self.config.autothrottle
            )

        gust: float = gust_alpha_offset(self.gust, t, state.airspeed)
        self.effective = ControlInput(effective.elevator, effective.aileron, effective.rudder, self.thrust)
        self.model = model

        try:
            x_new: np.ndarray = rk4_step(x, self.effective.surfaces, self.thrust, model, self.dt, gust)
            self._check(x_new)
        except SimulationAbort:
            self.aborted = True
            raise

        self.state = AircraftState(x_new)
        self.step_index += 1
        return self.state.copy()

    def _check(self, x: np.ndarray) -> None:
        """积分后检查包线"""
        if not np.all(np.isfinite(x)):
            raise SimulationAbort("状态包含非有限值")

        state: AircraftState = AircraftState(x)
        if abs(state.theta) >= np.pi / 2:
            raise SimulationAbort(f"俯仰角越界：{np.degrees(state.theta):.1f}°")
        if state.h <= 0:
            raise SimulationAbort("高度降至地面")
        if state.airspeed <= 0:
            raise SimulationAbort("空速为零")
        if abs(state.alpha) >= np.pi / 2 or abs(state.beta) >= np.pi / 2:
            raise SimulationAbort(
                f"气流角越界：alpha={np.degrees(state.alpha):.1f}°, beta={np.degrees(state.beta):.1f}°"
            )

    def record(self) -> Dict[str, float]:
        """当前时刻的轨迹记录（弧度）"""
        s: AircraftState = self.state
        return {
            "t": self.t,
            "p": s.p,
            "q": s.q,
            "r": s.r,
            "V": s.airspeed,
            "alpha": s.alpha,
            "beta": s.beta,
            "phi": s.phi,
            "theta": s.theta,
            "psi": s.psi,
            "h": s.h,
            "de": self.effective.elevator,
            "da": self.effective.aileron,
            "dr": self.effective.rudder,
            "thrust": self.thrust,
        }


def energy(state: AircraftState, model: AeroModel) -> float:
    """动能加势能"""
    return model.mass * (0.5 * state.airspeed ** 2 + GRAVITY * state.h)


def simulate(
    sim: Simulator,
    commands: np.ndarray
) -> Tuple[np.ndarray, bool]:
    """按指令序列仿真，返回状态轨迹和是否中止"""
    states: list = [sim.state.x.copy()]
    for command in commands:
        try:
            states.append(sim.step(command).x)
        except SimulationAbort:
            return np.array(states), True
    return np.array(states), False
