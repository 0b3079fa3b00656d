from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from pandas import DataFrame

from .agent import SacAgent, load_checkpoint
from .base import (
    APP_NAME,
    ReferenceKind,
    StageType,
    PreconditionError
)
from .fault import ScenarioSpec, get_scenario
from .reference import ReferenceProgram
from .setting import ExperimentConfig, save_config
from .toy import ToyConfig, ToyResult, toy_benchmark
from .training import (
    EvalReport,
    SweepResult,
    TrainResult,
    adaptive_matrix,
    evaluate,
    failure_matrix,
    robustness_matrix,
    reliability_sweep,
    train_stage
)
from .utility import save_json, to_dict, write_csv


class ExperimentEngine:
    """实验引擎，每次运行先写出配置快照"""

    config_filename: str = "config.json"
    metrics_filename: str = "metrics.json"

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None) -> None:
        """构造函数"""
        self.config: ExperimentConfig = config
        self.output_dir: Path = Path(output_dir or config.output_dir)
        self.logs: list = []

        self.output_dir.mkdir(parents=True, exist_ok=True)
        save_config(self.config, self.output_dir.joinpath(self.config_filename))
        self.write_log(f"{APP_NAME}配置快照已保存")

    def run_train(
        self,
        stage: StageType,
        steps: Optional[int] = None,
        attitude_path: Optional[Path] = None
    ) -> TrainResult:
        """训练单个阶段"""
        stage = StageType(stage)
        if stage == StageType.ALTITUDE:
            attitude_path = attitude_path or self.output_dir.joinpath("attitude.npz")
            if not Path(attitude_path).exists():
                raise PreconditionError(f"高度阶段训练需要先完成姿态阶段，找不到检查点{attitude_path}")

        result: TrainResult = train_stage(
            stage, self.config, self.output_dir, self.config.seed, steps, attitude_path
        )

        self.save_metrics({"train": {"stage": stage.value, "statistics": result.statistics}})
        if result.failed:
            self.write_log(f"{stage.value}阶段训练发散")
        else:
            self.write_log(f"{stage.value}阶段训练完成，检查点{result.checkpoint}")

        return result

    def run_eval(
        self,
        scenario_name: str,
        attitude_path: Optional[Path] = None,
        altitude_path: Optional[Path] = None
    ) -> EvalReport:
        """在指定场景下评估一对检查点"""
        scenario: ScenarioSpec = replace(
            get_scenario(scenario_name),
            altitude=self.config.scenario.altitude,
            speed=self.config.scenario.speed,
        )
        program: ReferenceProgram = replace(self.config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)
        attitude_path, altitude_path = self.checkpoint_paths(attitude_path, altitude_path)

        report: EvalReport = evaluate(
            attitude_path,
            altitude_path,
            self.config.plant,
            self.config.environment,
            self.config.evaluation,
            scenario_name,
            scenario,
            program,
            self.output_dir.joinpath(f"{scenario_name}_log.csv"),
        )

        self.save_metrics(to_dict(report))
        self.output(f"{scenario_name} nMAE={report.aggregate:.4f} 成功={report.success} 中止={report.aborted}")
        return report

    def run_matrix(
        self,
        attitude_path: Optional[Path] = None,
        altitude_path: Optional[Path] = None
    ) -> DataFrame:
        """鲁棒性矩阵"""
        attitude_path, altitude_path = self.checkpoint_paths(attitude_path, altitude_path)
        df: DataFrame = robustness_matrix(
            attitude_path, altitude_path, self.config, self.config.training.workers, self.write_log
        )
        write_csv(self.output_dir.joinpath("matrix.csv"), df)
        self.output_table(df)
        return df

    def run_failures(
        self,
        attitude_path: Optional[Path] = None,
        altitude_path: Optional[Path] = None
    ) -> DataFrame:
        """故障矩阵"""
        attitude_path, altitude_path = self.checkpoint_paths(attitude_path, altitude_path)
        df: DataFrame = failure_matrix(
            attitude_path, altitude_path, self.config, self.config.training.workers, self.write_log
        )
        write_csv(self.output_dir.joinpath("failures.csv"), df)
        self.output_table(df)
        return df

    def run_adaptive(
        self,
        steps: Optional[int] = None,
        attitude_path: Optional[Path] = None,
        altitude_path: Optional[Path] = None
    ) -> DataFrame:
        """在每种故障上重新训练姿态控制器，对比鲁棒响应与切换响应"""
        attitude_path, altitude_path = self.checkpoint_paths(attitude_path, altitude_path)
        for path in (attitude_path, altitude_path):
            if not path.exists():
                raise PreconditionError(f"适应性对比需要已训练的级联控制器，找不到检查点{path}")

        config: ExperimentConfig = replace(self.config, output_dir=str(self.output_dir))
        df: DataFrame = adaptive_matrix(
            attitude_path, altitude_path, config, steps, self.config.training.workers, self.write_log
        )
        write_csv(self.output_dir.joinpath("adaptive.csv"), df)
        self.output_table(df)
        return df

    def run_sweep(
        self,
        n: Optional[int] = None,
        steps: Optional[int] = None,
        full_scale: bool = False
    ) -> SweepResult:
        """可靠性统计，默认使用缩减步数"""
        n = n or self.config.evaluation.sweep_runs
        if not steps and not full_scale:
            steps = self.config.training.desk_steps

        result: SweepResult = reliability_sweep(
            self.config,
            n,
            self.output_dir,
            steps=steps,
            workers=self.config.training.workers,
            write_log=self.write_log,
        )

        write_csv(self.output_dir.joinpath("sweep.csv"), result.table)
        self.save_metrics({
            "sweep": {
                "runs": n,
                "steps": steps,
                "rate": result.rate,
                "low": result.low,
                "high": result.high,
            }
        })
        self.output(f"成功率{result.rate:.2%}，95%区间[{result.low:.2%}, {result.high:.2%}]")
        return result

    def run_toy(self, seeds: List[int], steps: Optional[int] = None) -> DataFrame:
        """SAC正确性检验"""
        toy_config: ToyConfig = ToyConfig(train_steps=steps) if steps else ToyConfig()

        rows: List[dict] = []
        for seed in seeds:
            result: ToyResult = toy_benchmark(seed, toy_config, output=self.output)
            write_csv(self.output_dir.joinpath(f"toy_curve_{seed}.csv"), result.curve)
            rows.append({
                "seed": seed,
                "final_return": result.final_return,
                "oracle_return": result.oracle_return,
                "random_return": result.random_return,
                "score": result.score,
                "passed": result.passed,
            })
            self.output(f"toy seed={seed} 得分{result.score:.3f} 通过={result.passed}")

        df: DataFrame = DataFrame(rows)
        write_csv(self.output_dir.joinpath("toy.csv"), df)
        self.save_metrics({"toy": {"passed": int(df["passed"].sum()), "runs": len(df)}})
        return df

    def inspect_checkpoint(self, path: Path) -> Dict[str, Any]:
        """列出检查点内容"""
        agent: SacAgent = load_checkpoint(path)

        info: Dict[str, Any] = agent.get_data()
        info["networks"] = {
            name: [[spec.input_width, spec.output_width] for spec in params.specs]
            for name, params in agent.networks().items()
        }
        info["eta"] = agent.eta
        info["finite"] = all(params.is_finite() for params in agent.networks().values())

        for key, value in info.items():
            self.output(f"{key}: {value}")

        return info

    def checkpoint_paths(
        self,
        attitude_path: Optional[Path],
        altitude_path: Optional[Path]
    ) -> tuple:
        """默认使用输出目录下的检查点"""
        attitude_path = Path(attitude_path or self.output_dir.joinpath("attitude.npz"))
        altitude_path = Path(altitude_path or self.output_dir.joinpath("altitude.npz"))
        return attitude_path, altitude_path

    def save_metrics(self, data: dict) -> None:
        """写出指标文件"""
        save_json(self.output_dir.joinpath(self.metrics_filename), to_dict(data))

    def output_table(self, df: DataFrame) -> None:
        """逐行输出评估表"""
        for row in df.itertuples(index=False):
            self.output(
                f"{row.name}\t{row.altitude:.0f}m {row.speed:.0f}m/s\t"
                f"nMAE={row.nmae:.4f}\t成功={row.success}\t中止={row.aborted}\t{row.error}"
            )

    def write_log(self, msg: str) -> None:
        """输出日志"""
        self.logs.append(f"{datetime.now()}\t{msg}")

    def output(self, msg: str) -> None:
        """输出实验引擎信息"""
        print(f"{datetime.now()}\t{msg}")
