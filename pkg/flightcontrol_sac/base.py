from enum import Enum
from typing import Optional


APP_NAME = "FlightControlSac"

FORMAT_VERSION = 1

# 控制频率100Hz
SIM_DT = 0.01

GRAVITY = 9.80665


class StageType(Enum):
    ATTITUDE = "attitude"
    ALTITUDE = "altitude"


class LayerKind(Enum):
    HIDDEN = "hidden"
    OUTPUT = "output"


class FailureType(Enum):
    NONE = "none"
    RUDDER_JAM = "rudder_jam"
    AILERON_EFF = "aileron_eff"
    ELEVATOR_RANGE = "elevator_range"
    HTAIL_LOSS = "htail_loss"
    ICING = "icing"
    CG_SHIFT = "cg_shift"


class ReferenceKind(Enum):
    ATTITUDE_STEPS = "attitude_steps"
    ALTITUDE_PROFILE = "altitude_profile"
    SINUSOIDAL = "sinusoidal"
    TRIANGULAR = "triangular"


class RewardMode(Enum):
    ABSOLUTE = "absolute"
    LITERAL = "literal"


class QNetwork(Enum):
    Q1 = "1"
    Q2 = "2"
    TARGET1 = "target1"
    TARGET2 = "target2"


class LrSchedule(Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


class TrainStatus(Enum):
    WARMING_UP = "warming_up"
    UPDATED = "updated"


class FlightControlError(Exception):
    """异常基类"""


class ConfigurationError(FlightControlError):
    """配置错误"""

    def __init__(self, msg: str, key: str = "", line: Optional[int] = None) -> None:
        """构造函数"""
        self.msg: str = msg
        self.key: str = key
        self.line: Optional[int] = line

        text: str = msg
        if key:
            text = f"{key}: {text}"
        if line is not None:
            text = f"{text} (line {line})"
        super().__init__(text)


class NumericError(FlightControlError):
    """数值错误"""


class UsageError(FlightControlError):
    """调用错误"""


class SimulationAbort(FlightControlError):
    """仿真中止信号"""


class CheckpointError(FlightControlError):
    """检查点错误"""


class PreconditionError(FlightControlError):
    """前置条件错误"""


class UnknownScenarioError(FlightControlError):
    """未知场景"""
