import json
from dataclasses import fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats


def save_json(path: Union[str, Path], data: Any) -> None:
    """保存json文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, mode="w+", encoding="UTF-8") as f:
        json.dump(data, f, indent=4, ensure_ascii=False)


def to_dict(obj: Any) -> Any:
    """将dataclass/枚举/numpy对象转换为可json序列化的结构"""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def json_to_array(data: Any) -> np.ndarray:
    """json内容编码为uint8数组，用于npz容器"""
    text: str = json.dumps(data, sort_keys=True)
    return np.frombuffer(text.encode("UTF-8"), dtype=np.uint8).copy()


def array_to_json(array: np.ndarray) -> Any:
    """uint8数组解码为json内容"""
    return json.loads(bytes(np.asarray(array, dtype=np.uint8)).decode("UTF-8"))


def smooth(values: Sequence[float], window: int = 20) -> np.ndarray:
    """滑动平均，窗口不足时使用已有数据"""
    series: pd.Series = pd.Series(values, dtype=float)
    return series.rolling(window, min_periods=1).mean().to_numpy()


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> Tuple[float, float]:
    """成功率的Wilson置信区间"""
    if total <= 0:
        return 0.0, 1.0

    z: float = float(stats.norm.ppf(0.5 + confidence / 2))
    p: float = successes / total

    denominator: float = 1 + z ** 2 / total
    center: float = (p + z ** 2 / (2 * total)) / denominator
    half: float = z * np.sqrt(p * (1 - p) / total + z ** 2 / (4 * total ** 2)) / denominator

    return max(0.0, center - half), min(1.0, center + half)


def rad_columns(df: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    """将指定列从弧度转换为角度"""
    df = df.copy()
    for name in columns:
        if name in df.columns:
            df[name] = np.degrees(df[name])
    return df


def write_csv(path: Union[str, Path], df: pd.DataFrame) -> None:
    """输出csv文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)


def merge_dict(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并字典"""
    result: Dict[str, Any] = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge_dict(result[key], value)
        else:
            result[key] = value
    return result
