"""
实验配置：json文件映射到嵌套dataclass。

未列出的字段取默认值，未知字段报错，错误信息包含字段路径和所在行号。
"""

import json
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from .agent import AgentConfig, altitude_agent_config, attitude_agent_config
from .base import ConfigurationError
from .environment import EnvironmentConfig
from .fault import ScenarioSpec
from .reference import ReferenceProgram
from .simulator import PlantConfig
from .utility import merge_dict, save_json, to_dict


@dataclass
class TrainRun:
    """训练流程设置"""

    attitude_steps: int = 1_000_000
    altitude_steps: int = 1_000_000
    attitude_episode_length: float = 20.0
    altitude_episode_length: float = 120.0
    desk_steps: int = 200_000
    checkpoint_interval: int = 100_000
    log_interval: int = 10
    workers: int = 1
    climb_rate_range: float = 3.0
    turn_roll_range_deg: float = 40.0

    def __post_init__(self) -> None:
        for name in ("attitude_steps", "altitude_steps", "desk_steps", "checkpoint_interval",
                     "log_interval", "workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError("必须为正整数", f"training.{name}")
        if self.attitude_episode_length <= 0 or self.altitude_episode_length <= 0:
            raise ConfigurationError("回合长度必须为正", "training.episode_length")


@dataclass
class EvaluationConfig:
    """评估设置"""

    threshold: float = 0.05
    beta_range_deg: float = 10.0
    attitude_tasks: int = 5
    attitude_episode_length: float = 20.0
    attitude_threshold: float = 0.10
    sweep_runs: int = 27
    handover_delay: float = 50.0       # 故障发生后切换到适应性控制器的延迟，秒

    def __post_init__(self) -> None:
        if self.threshold <= 0 or self.attitude_threshold <= 0:
            raise ConfigurationError("成功阈值必须为正", "evaluation.threshold")
        if self.beta_range_deg <= 0:
            raise ConfigurationError("侧滑角归一化范围必须为正", "evaluation.beta_range_deg")
        if self.attitude_tasks < 1 or self.sweep_runs < 1:
            raise ConfigurationError("次数至少为1", "evaluation.attitude_tasks/sweep_runs")
        if self.handover_delay < 0:
            raise ConfigurationError("切换延迟不能为负", "evaluation.handover_delay")


@dataclass
class ExperimentConfig:
    """完整实验配置"""

    plant: PlantConfig = field(default_factory=PlantConfig)
    attitude_agent: AgentConfig = field(default_factory=attitude_agent_config)
    altitude_agent: AgentConfig = field(default_factory=altitude_agent_config)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    reference: ReferenceProgram = field(default_factory=ReferenceProgram)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    training: TrainRun = field(default_factory=TrainRun)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    output_dir: str = "results"
    seed: int = 0


Locator = Callable[[str], Optional[int]]


def line_locator(text: str) -> Locator:
    """按字段路径查找所在行号"""
    lines: List[str] = text.splitlines()

    def locate(path: str) -> Optional[int]:
        start: int = 0
        found: Optional[int] = None
        for part in path.split("."):
            token: str = f'"{part}"'
            for i in range(start, len(lines)):
                if token in lines[i]:
                    found = i + 1
                    start = i
                    break
            else:
                return found
        return found

    return locate


def _coerce(tp: Any, value: Any, path: str, locate: Locator) -> Any:
    """按类型标注转换单个值"""
    def fail(expected: str) -> ConfigurationError:
        return ConfigurationError(f"应为{expected}，实际为{value!r}", path, locate(path))

    origin = typing.get_origin(tp)

    if origin is Union:
        args: list = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path, locate)

    if origin in (list, List):
        if not isinstance(value, list):
            raise fail("列表")
        (item,) = typing.get_args(tp) or (Any,)
        return [_coerce(item, v, f"{path}[{i}]", locate) for i, v in enumerate(value)]

    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            choices: str = ", ".join(str(e.value) for e in tp)
            raise ConfigurationError(f"无效取值{value!r}，可选：{choices}", path, locate(path))

    if tp is bool:
        if not isinstance(value, bool):
            raise fail("布尔值")
        return value

    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise fail("整数")
        return value

    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise fail("数值")
        return float(value)

    if tp is str:
        if not isinstance(value, str):
            raise fail("字符串")
        return value

    return value


def build_dataclass(cls: type, data: Any, default: Any, path: str, locate: Locator) -> Any:
    """在默认实例基础上应用字典中的字段"""
    if not isinstance(data, dict):
        raise ConfigurationError("应为对象", path or "<root>", locate(path))

    names: List[str] = [f.name for f in fields(cls)]
    for key in data:
        if key not in names:
            key_path: str = f"{path}.{key}" if path else key
            raise ConfigurationError("未知配置项", key_path, locate(key_path))

    hints: Dict[str, Any] = typing.get_type_hints(cls)
    kwargs: Dict[str, Any] = {}

    for f in fields(cls):
        current: Any = getattr(default, f.name)
        if f.name not in data:
            kwargs[f.name] = current
            continue

        value: Any = data[f.name]
        tp: Any = hints[f.name]
        sub_path: str = f"{path}.{f.name}" if path else f.name

        if is_dataclass(tp):
            kwargs[f.name] = build_dataclass(tp, value, current, sub_path, locate)
        else:
            kwargs[f.name] = _coerce(tp, value, sub_path, locate)

    try:
        return cls(**kwargs)
    except ConfigurationError as e:
        key_path = f"{path}.{e.key.split('.')[-1]}" if path and e.key else (e.key or path)
        raise ConfigurationError(e.msg, key_path, locate(key_path)) from e


def config_from_dict(data: Dict[str, Any], text: str = "") -> ExperimentConfig:
    """由字典构建配置"""
    return build_dataclass(ExperimentConfig, data, ExperimentConfig(), "", line_locator(text))


def parse_config(text: str) -> ExperimentConfig:
    """解析json文本"""
    if not text.strip():
        return ExperimentConfig()

    try:
        data: Any = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"json解析失败：{e.msg}（第{e.colno}列）", "json", e.lineno) from e

    return config_from_dict(data, text)


def load_config(path: Union[str, Path], overrides: Optional[List[str]] = None) -> ExperimentConfig:
    """读取配置文件并应用命令行覆盖项"""
    path = Path(path)
    try:
        text: str = path.read_text(encoding="UTF-8")
    except OSError as e:
        raise ConfigurationError(f"无法读取配置文件{path}：{e}", "config") from e

    if not overrides:
        return parse_config(text)

    config: ExperimentConfig = parse_config(text)
    return apply_overrides(config, overrides)


def apply_overrides(config: ExperimentConfig, overrides: List[str]) -> ExperimentConfig:
    """应用 key.path=value 形式的覆盖项"""
    data: Dict[str, Any] = to_dict(config)

    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"覆盖项格式应为key.path=value：{item}", "--set")

        key, raw = item.split("=", 1)
        try:
            value: Any = json.loads(raw)
        except json.JSONDecodeError:
            value = raw

        nested: Any = value
        for part in reversed(key.strip().split(".")):
            nested = {part: nested}
        data = merge_dict(data, nested)

    return config_from_dict(data)


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    """列出全部生效值"""
    return to_dict(config)


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    """写出配置快照"""
    save_json(path, config_to_dict(config))
