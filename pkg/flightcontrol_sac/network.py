"""
固定拓扑前馈网络：仿射层、层归一化、ReLU，反向传播与Adam优化器。

隐藏层计算 ReLU(gain * layernorm(x @ W + b) + offset)，输出层只做仿射变换。
所有数组使用float64，权重矩阵形状为(input_width, output_width)。
"""

from dataclasses import dataclass, field
from pathlib import Path
from zipfile import BadZipFile
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .base import (
    FORMAT_VERSION,
    LayerKind,
    ConfigurationError,
    NumericError,
    UsageError,
    CheckpointError
)


LAYERNORM_EPS: float = 1e-5

ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPS: float = 1e-8

KIND_CODES: Dict[LayerKind, int] = {
    LayerKind.HIDDEN: 0,
    LayerKind.OUTPUT: 1,
}


@dataclass(frozen=True)
class LayerSpec:
    """单层结构"""

    input_width: int
    output_width: int
    kind: LayerKind = LayerKind.HIDDEN

    def __post_init__(self) -> None:
        """检查层宽度"""
        if self.input_width <= 0 or self.output_width <= 0:
            raise ConfigurationError(
                f"层宽度必须为正：{self.input_width}x{self.output_width}", "layer"
            )


def mlp_specs(n_in: int, hidden: int, n_out: int, depth: int = 2) -> List[LayerSpec]:
    """生成depth个隐藏层加线性输出层的结构"""
    specs: List[LayerSpec] = []
    width: int = n_in
    for _ in range(depth):
        specs.append(LayerSpec(width, hidden, LayerKind.HIDDEN))
        width = hidden
    specs.append(LayerSpec(width, n_out, LayerKind.OUTPUT))
    return specs


def check_specs(specs: Sequence[LayerSpec]) -> None:
    """检查相邻层宽度是否匹配"""
    if not specs:
        raise ConfigurationError("网络至少需要一层", "layers")

    for prev, curr in zip(specs[:-1], specs[1:]):
        if prev.output_width != curr.input_width:
            raise ConfigurationError(
                f"相邻层宽度不匹配：{prev.output_width} -> {curr.input_width}", "layers"
            )


@dataclass
class NetworkParams:
    """网络全部参数"""

    specs: List[LayerSpec]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    gains: List[np.ndarray]         # 输出层为空数组
    offsets: List[np.ndarray]       # 输出层为空数组

    @property
    def input_width(self) -> int:
        """输入维度"""
        return self.specs[0].input_width

    @property
    def output_width(self) -> int:
        """输出维度"""
        return self.specs[-1].output_width

    def arrays(self) -> List[np.ndarray]:
        """按固定顺序返回所有参数数组"""
        return [*self.weights, *self.biases, *self.gains, *self.offsets]

    def copy(self) -> "NetworkParams":
        """深拷贝"""
        return NetworkParams(
            specs=list(self.specs),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            gains=[g.copy() for g in self.gains],
            offsets=[o.copy() for o in self.offsets],
        )

    def zeros_like(self) -> "NetworkParams":
        """同形状全零参数，用作梯度容器"""
        return NetworkParams(
            specs=list(self.specs),
            weights=[np.zeros_like(w) for w in self.weights],
            biases=[np.zeros_like(b) for b in self.biases],
            gains=[np.zeros_like(g) for g in self.gains],
            offsets=[np.zeros_like(o) for o in self.offsets],
        )

    def assign(self, other: "NetworkParams") -> None:
        """原地复制另一组参数的数值"""
        if self.specs != other.specs:
            raise UsageError("网络结构不一致，无法复制参数")

        for dst, src in zip(self.arrays(), other.arrays()):
            np.copyto(dst, src)

    def is_finite(self) -> bool:
        """检查是否全部有限"""
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class GradientTape:
    """前向计算记录，用于反向传播"""

    params: NetworkParams
    single: bool = False
    inputs: List[np.ndarray] = field(default_factory=list)
    normalized: List[Optional[np.ndarray]] = field(default_factory=list)
    inv_stds: List[Optional[np.ndarray]] = field(default_factory=list)
    pre_activations: List[Optional[np.ndarray]] = field(default_factory=list)


@dataclass
class AdamState:
    """Adam一阶、二阶矩估计"""

    first_moments: List[np.ndarray]
    second_moments: List[np.ndarray]
    step: int = 0
    learning_rate: float = 0.0

    @classmethod
    def create(cls, params: Union[NetworkParams, Sequence[np.ndarray]]) -> "AdamState":
        """按参数形状初始化"""
        arrays: List[np.ndarray] = _as_arrays(params)
        return cls(
            first_moments=[np.zeros_like(a) for a in arrays],
            second_moments=[np.zeros_like(a) for a in arrays],
        )

    def copy(self) -> "AdamState":
        """深拷贝"""
        return AdamState(
            first_moments=[m.copy() for m in self.first_moments],
            second_moments=[v.copy() for v in self.second_moments],
            step=self.step,
            learning_rate=self.learning_rate,
        )


def _as_arrays(params: Union[NetworkParams, Sequence[np.ndarray]]) -> List[np.ndarray]:
    """统一取出参数数组列表"""
    if isinstance(params, NetworkParams):
        return params.arrays()
    return list(params)


def xavier_init(specs: Sequence[LayerSpec], seed: int) -> NetworkParams:
    """Xavier均匀分布初始化"""
    check_specs(specs)
    rng: np.random.Generator = np.random.default_rng(seed)

    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    gains: List[np.ndarray] = []
    offsets: List[np.ndarray] = []

    for spec in specs:
        limit: float = np.sqrt(6.0 / (spec.input_width + spec.output_width))
        weights.append(rng.uniform(-limit, limit, size=(spec.input_width, spec.output_width)))
        biases.append(np.zeros(spec.output_width))

        if spec.kind == LayerKind.HIDDEN:
            gains.append(np.ones(spec.output_width))
            offsets.append(np.zeros(spec.output_width))
        else:
            gains.append(np.zeros(0))
            offsets.append(np.zeros(0))

    return NetworkParams(list(specs), weights, biases, gains, offsets)


def forward(params: NetworkParams, x: np.ndarray) -> Tuple[np.ndarray, GradientTape]:
    """前向计算，支持单个向量或(batch, width)矩阵"""
    h: np.ndarray = np.asarray(x, dtype=np.float64)
    single: bool = h.ndim == 1
    if single:
        h = h[None, :]

    if h.ndim != 2 or h.shape[1] != params.input_width:
        raise UsageError(f"输入维度{h.shape}与网络输入宽度{params.input_width}不匹配")

    if not np.all(np.isfinite(h)):
        raise NumericError("网络输入包含非有限值")

    tape: GradientTape = GradientTape(params=params, single=single)

    for i, spec in enumerate(params.specs):
        tape.inputs.append(h)
        z: np.ndarray = h @ params.weights[i] + params.biases[i]

        if spec.kind == LayerKind.HIDDEN:
            mean: np.ndarray = z.mean(axis=1, keepdims=True)
            var: np.ndarray = z.var(axis=1, keepdims=True)
            inv_std: np.ndarray = 1.0 / np.sqrt(var + LAYERNORM_EPS)
            zhat: np.ndarray = (z - mean) * inv_std
            y: np.ndarray = zhat * params.gains[i] + params.offsets[i]
            h = np.maximum(y, 0.0)

            tape.normalized.append(zhat)
            tape.inv_stds.append(inv_std)
            tape.pre_activations.append(y)
        else:
            h = z
            tape.normalized.append(None)
            tape.inv_stds.append(None)
            tape.pre_activations.append(None)

    output: np.ndarray = h[0] if single else h
    return output, tape


def backward(tape: GradientTape, output_gradient: np.ndarray) -> Tuple[NetworkParams, np.ndarray]:
    """反向传播，返回参数梯度和输入梯度"""
    params: NetworkParams = tape.params

    d: np.ndarray = np.asarray(output_gradient, dtype=np.float64)
    if d.ndim == 1:
        d = d[None, :]

    batch: int = tape.inputs[0].shape[0]
    if d.shape != (batch, params.output_width):
        raise UsageError(f"输出梯度形状{d.shape}与前向记录({batch}, {params.output_width})不匹配")

    grads: NetworkParams = params.zeros_like()

    for i in reversed(range(len(params.specs))):
        if params.specs[i].kind == LayerKind.HIDDEN:
            d = d * (tape.pre_activations[i] > 0)

            zhat: np.ndarray = tape.normalized[i]
            grads.gains[i] = (d * zhat).sum(axis=0)
            grads.offsets[i] = d.sum(axis=0)

            # 层归一化雅可比
            dzhat: np.ndarray = d * params.gains[i]
            d = tape.inv_stds[i] * (
                dzhat
                - dzhat.mean(axis=1, keepdims=True)
                - zhat * (dzhat * zhat).mean(axis=1, keepdims=True)
            )

        grads.weights[i] = tape.inputs[i].T @ d
        grads.biases[i] = d.sum(axis=0)
        d = d @ params.weights[i].T

    input_grad: np.ndarray = d[0] if tape.single else d
    return grads, input_grad


def adam_step(
    params: Union[NetworkParams, Sequence[np.ndarray]],
    grads: Union[NetworkParams, Sequence[np.ndarray]],
    state: AdamState,
    learning_rate: float
) -> Tuple[Union[NetworkParams, Sequence[np.ndarray]], AdamState]:
    """沿降低损失的方向执行一步Adam，原地更新参数和状态"""
    param_arrays: List[np.ndarray] = _as_arrays(params)
    grad_arrays: List[np.ndarray] = _as_arrays(grads)

    if len(param_arrays) != len(grad_arrays) or len(param_arrays) != len(state.first_moments):
        raise UsageError("参数、梯度与优化器状态数量不一致")

    for i, (p, g) in enumerate(zip(param_arrays, grad_arrays)):
        if p.shape != g.shape:
            raise UsageError(f"第{i}个参数形状{p.shape}与梯度形状{g.shape}不一致")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"第{i}个梯度数组包含非有限值（形状{g.shape}，step={state.step}）")

    state.step += 1
    state.learning_rate = learning_rate

    bias1: float = 1.0 - ADAM_BETA1 ** state.step
    bias2: float = 1.0 - ADAM_BETA2 ** state.step

    for p, g, m, v in zip(param_arrays, grad_arrays, state.first_moments, state.second_moments):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g

        p -= learning_rate * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)

    return params, state


def pack_params(name: str, params: NetworkParams, store: Dict[str, np.ndarray]) -> None:
    """将网络参数写入检查点字典"""
    store[f"layer_shapes/{name}"] = np.array(
        [[s.input_width, s.output_width, KIND_CODES[s.kind]] for s in params.specs],
        dtype="<i8"
    )
    for kind, arrays in (
        ("weights", params.weights),
        ("biases", params.biases),
        ("gains", params.gains),
        ("offsets", params.offsets),
    ):
        for i, array in enumerate(arrays):
            store[f"{name}/{kind}/{i}"] = np.ascontiguousarray(array, dtype="<f8")


def unpack_params(name: str, data: Dict[str, np.ndarray]) -> NetworkParams:
    """从检查点字典恢复网络参数"""
    key: str = f"layer_shapes/{name}"
    if key not in data:
        raise CheckpointError(f"检查点缺少网络{name}")

    codes: Dict[int, LayerKind] = {v: k for k, v in KIND_CODES.items()}
    specs: List[LayerSpec] = [
        LayerSpec(int(row[0]), int(row[1]), codes[int(row[2])]) for row in data[key]
    ]

    loaded: Dict[str, List[np.ndarray]] = {}
    for kind in ("weights", "biases", "gains", "offsets"):
        loaded[kind] = [
            np.array(data[f"{name}/{kind}/{i}"], dtype=np.float64) for i in range(len(specs))
        ]

    params: NetworkParams = NetworkParams(specs=specs, **loaded)

    for spec, w in zip(specs, params.weights):
        if w.shape != (spec.input_width, spec.output_width):
            raise CheckpointError(f"网络{name}权重形状{w.shape}与层结构不一致")

    return params


def pack_adam(name: str, state: AdamState, store: Dict[str, np.ndarray]) -> None:
    """将优化器状态写入检查点字典"""
    store[f"adam/{name}/step"] = np.array(state.step, dtype="<i8")
    store[f"adam/{name}/learning_rate"] = np.array(state.learning_rate, dtype="<f8")
    for i, (m, v) in enumerate(zip(state.first_moments, state.second_moments)):
        store[f"adam/{name}/m/{i}"] = np.ascontiguousarray(m, dtype="<f8")
        store[f"adam/{name}/v/{i}"] = np.ascontiguousarray(v, dtype="<f8")


def unpack_adam(name: str, count: int, data: Dict[str, np.ndarray]) -> AdamState:
    """从检查点字典恢复优化器状态"""
    return AdamState(
        first_moments=[np.array(data[f"adam/{name}/m/{i}"], dtype=np.float64) for i in range(count)],
        second_moments=[np.array(data[f"adam/{name}/v/{i}"], dtype=np.float64) for i in range(count)],
        step=int(data[f"adam/{name}/step"]),
        learning_rate=float(data[f"adam/{name}/learning_rate"]),
    )


def save_network(path: Union[str, Path], params: NetworkParams, state: Optional[AdamState] = None) -> None:
    """保存单个网络（及其优化器状态）"""
    store: Dict[str, np.ndarray] = {"format_version": np.array(FORMAT_VERSION, dtype="<i8")}
    pack_params("net", params, store)
    if state:
        pack_adam("net", state, store)

    with open(path, "wb") as f:
        np.savez(f, **store)


def load_network(path: Union[str, Path]) -> Tuple[NetworkParams, Optional[AdamState]]:
    """读取单个网络"""
    data: Dict[str, np.ndarray] = read_container(path)
    params: NetworkParams = unpack_params("net", data)

    state: Optional[AdamState] = None
    if "adam/net/step" in data:
        state = unpack_adam("net", len(params.arrays()), data)

    return params, state


def read_container(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """读取npz容器并检查版本号"""
    try:
        with np.load(path, allow_pickle=False) as npz:
            data: Dict[str, np.ndarray] = {key: npz[key] for key in npz.files}
    except (OSError, ValueError, BadZipFile) as e:
        raise CheckpointError(f"无法读取检查点{path}：{e}") from e

    if "format_version" not in data:
        raise CheckpointError(f"检查点{path}缺少版本号")

    version: int = int(data["format_version"])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"检查点版本{version}与当前版本{FORMAT_VERSION}不一致")

    return data
