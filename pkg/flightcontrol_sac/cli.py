"""
命令行入口。

退出码：0 成功，1 未预期异常，2 参数错误，3 配置错误，4 未知场景，
5 检查点错误，6 前置条件不满足，7 训练发散。
"""

import argparse
import traceback
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Type

from .base import (
    StageType,
    FlightControlError,
    ConfigurationError,
    UnknownScenarioError,
    CheckpointError,
    PreconditionError,
    UsageError
)
from .engine import ExperimentEngine
from .setting import ExperimentConfig, apply_overrides, load_config


EXIT_OK: int = 0
EXIT_UNEXPECTED: int = 1
EXIT_USAGE: int = 2
EXIT_CONFIG: int = 3
EXIT_SCENARIO: int = 4
EXIT_CHECKPOINT: int = 5
EXIT_PRECONDITION: int = 6
EXIT_TRAINING_FAILED: int = 7

EXIT_CODES: Dict[Type[FlightControlError], int] = {
    ConfigurationError: EXIT_CONFIG,
    UnknownScenarioError: EXIT_SCENARIO,
    CheckpointError: EXIT_CHECKPOINT,
    PreconditionError: EXIT_PRECONDITION,
    UsageError: EXIT_USAGE,
}


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    common: argparse.ArgumentParser = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="json配置文件")
    common.add_argument("--output", type=Path, default=None, help="输出目录，覆盖output_dir")
    common.add_argument("--seed", type=int, default=None, help="全局随机种子")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY.PATH=VALUE",
        help="覆盖配置项，例如 training.workers=4，可重复"
    )

    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        prog="flightcontrol-sac", description="SAC级联飞行控制训练与评估"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    train = subparsers.add_parser("train", parents=[common], help="训练单个阶段")
    train.add_argument("--stage", choices=[s.value for s in StageType], required=True)
    train.add_argument("--steps", type=int, default=None)
    train.add_argument("--attitude", type=Path, default=None, help="姿态检查点")

    evaluate = subparsers.add_parser("eval", parents=[common], help="在场景预设下评估")
    evaluate.add_argument("--scenario", default="nominal")
    evaluate.add_argument("--attitude", type=Path, default=None)
    evaluate.add_argument("--altitude", type=Path, default=None)

    for name, text in (("matrix", "鲁棒性矩阵"), ("failures", "故障矩阵")):
        sub = subparsers.add_parser(name, parents=[common], help=text)
        sub.add_argument("--attitude", type=Path, default=None)
        sub.add_argument("--altitude", type=Path, default=None)

    adaptive = subparsers.add_parser("adaptive", parents=[common], help="故障对象上重新训练并对比切换响应")
    adaptive.add_argument("--steps", type=int, default=None)
    adaptive.add_argument("--attitude", type=Path, default=None)
    adaptive.add_argument("--altitude", type=Path, default=None)

    sweep = subparsers.add_parser("sweep", parents=[common], help="训练可靠性统计")
    sweep.add_argument("--n", type=int, default=None)
    sweep.add_argument("--steps", type=int, default=None)
    sweep.add_argument("--full-scale", action="store_true", help="使用完整训练步数")

    toy = subparsers.add_parser("toy", parents=[common], help="双积分器SAC检验")
    toy.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    toy.add_argument("--steps", type=int, default=None)

    inspect = subparsers.add_parser("inspect-checkpoint", parents=[common], help="查看检查点")
    inspect.add_argument("path", type=Path)

    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """读取配置并应用命令行覆盖"""
    if args.config:
        config: ExperimentConfig = load_config(args.config, args.set)
    else:
        config = apply_overrides(ExperimentConfig(), args.set) if args.set else ExperimentConfig()

    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output is not None:
        config = replace(config, output_dir=str(args.output))

    return config


def run_command(args: argparse.Namespace) -> int:
    """执行子命令"""
    config: ExperimentConfig = resolve_config(args)
    engine: ExperimentEngine = ExperimentEngine(config)

    if args.command == "train":
        result = engine.run_train(StageType(args.stage), args.steps, args.attitude)
        return EXIT_TRAINING_FAILED if result.failed else EXIT_OK

    if args.command == "eval":
        engine.run_eval(args.scenario, args.attitude, args.altitude)
    elif args.command == "matrix":
        engine.run_matrix(args.attitude, args.altitude)
    elif args.command == "failures":
        engine.run_failures(args.attitude, args.altitude)
    elif args.command == "adaptive":
        engine.run_adaptive(args.steps, args.attitude, args.altitude)
    elif args.command == "sweep":
        engine.run_sweep(args.n, args.steps, args.full_scale)
    elif args.command == "toy":
        engine.run_toy(args.seeds, args.steps)
    elif args.command == "inspect-checkpoint":
        engine.inspect_checkpoint(args.path)

    return EXIT_OK


def exit_code(error: FlightControlError) -> int:
    """按异常类型查找退出码"""
    for cls, code in EXIT_CODES.items():
        if isinstance(error, cls):
            return code
    return EXIT_UNEXPECTED


def output(msg: str) -> None:
    """输出命令行信息"""
    print(f"{datetime.now()}\t{msg}")


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口"""
    parser: argparse.ArgumentParser = build_parser()

    try:
        args: argparse.Namespace = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return run_command(args)
    except FlightControlError as e:
        output(f"{type(e).__name__}: {e}")
        return exit_code(e)
    except Exception:
        output(f"运行失败，触发异常：\n{traceback.format_exc()}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
