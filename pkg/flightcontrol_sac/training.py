import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from datetime import datetime
from functools import partial
from multiprocessing import get_context
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import plotly.graph_objects as go
from plotly.subplots import make_subplots
from pandas import DataFrame

from .agent import (
    AgentConfig,
    DiagnosticsRecorder,
    ReplayBuffer,
    SacAgent,
    TrainDiagnostics,
    load_checkpoint,
    save_checkpoint,
    train_step
)
from .base import (
    FailureType,
    ReferenceKind,
    StageType,
    TrainStatus,
    NumericError,
    PreconditionError,
    UnknownScenarioError
)
from .environment import EnvironmentConfig, FlightEnvironment, StepResult, agent_policy
from .fault import FAILURE_PRESETS, ScenarioSpec, get_scenario
from .reference import ReferenceProgram, high_frequency, low_frequency
from .setting import EvaluationConfig, ExperimentConfig
from .simulator import PlantConfig
from .utility import smooth, wilson_interval, write_csv


ALTITUDE_RANGE_FALLBACK: float = 240.0
ANGLE_RANGE_FALLBACK: float = np.radians(10.0)

ROBUSTNESS_IFC: List[Tuple[float, float]] = [
    (2000.0, 90.0),
    (2000.0, 140.0),
    (5000.0, 90.0),
    (5000.0, 140.0),
]


@dataclass
class EpisodeResult:
    """单回合训练结果"""

    episode: int
    steps: int
    length: int
    episode_return: float
    aborted: bool
    eta: float
    critic_loss: float
    policy_objective: float
    entropy_estimate: float


@dataclass
class TrainResult:
    """单阶段训练结果"""

    stage: StageType
    checkpoint: Optional[Path]
    curve: Optional[DataFrame]
    statistics: dict
    failed: bool = False


@dataclass
class EvalReport:
    """跟踪误差评估结果"""

    name: str
    scenario: str
    program: str
    altitude: float
    speed: float
    mae: Dict[str, float] = field(default_factory=dict)
    ranges: Dict[str, float] = field(default_factory=dict)
    nmae: Dict[str, float] = field(default_factory=dict)
    aggregate: float = np.inf
    success: bool = False
    aborted: bool = False
    duration: float = 0.0
    log_path: str = ""
    error: str = ""
    controller: str = "robust"

    def to_row(self) -> dict:
        """展开为表格行"""
        return {
            "name": self.name,
            "scenario": self.scenario,
            "program": self.program,
            "controller": self.controller,
            "altitude": self.altitude,
            "speed": self.speed,
            "nmae_h": self.nmae.get("h", np.nan),
            "nmae_phi": self.nmae.get("phi", np.nan),
            "nmae_beta": self.nmae.get("beta", np.nan),
            "nmae": self.aggregate,
            "success": self.success,
            "aborted": self.aborted,
            "duration": self.duration,
            "error": self.error,
        }


@dataclass
class AttitudeReport:
    """内环姿态评估结果"""

    tasks: DataFrame
    theta: float
    phi: float
    success: bool


@dataclass
class SweepResult:
    """训练可靠性统计"""

    rate: float
    low: float
    high: float
    table: DataFrame


def _value_range(ref: np.ndarray, fallback: float) -> float:
    span: float = float(np.ptp(ref)) if len(ref) else 0.0
    return span if span > 0 else fallback


def compute_nmae(frame: DataFrame, beta_range: float = np.radians(10.0)) -> Tuple[dict, dict, dict, float]:
    """高度、滚转角按参考信号范围归一化，侧滑角按给定范围归一化"""
    if frame.empty:
        nan: dict = {"h": np.nan, "phi": np.nan, "beta": np.nan}
        return nan, nan, nan, np.inf

    mae: dict = {
        "h": float(np.mean(np.abs(frame["h"] - frame["h_ref"]))),
        "phi": float(np.mean(np.abs(frame["phi"] - frame["phi_ref"]))),
        "beta": float(np.mean(np.abs(frame["beta"] - frame["beta_ref"]))),
    }
    ranges: dict = {
        "h": _value_range(frame["h_ref"].to_numpy(), ALTITUDE_RANGE_FALLBACK),
        "phi": _value_range(frame["phi_ref"].to_numpy(), ANGLE_RANGE_FALLBACK),
        "beta": beta_range,
    }
    nmae: dict = {key: mae[key] / ranges[key] for key in mae}
    aggregate: float = float(np.mean(list(nmae.values())))

    return mae, ranges, nmae, aggregate


def evaluate_agents(
    inner: SacAgent,
    outer: SacAgent,
    plant: PlantConfig,
    scenario: ScenarioSpec,
    program: ReferenceProgram,
    env_config: EnvironmentConfig,
    evaluation: EvaluationConfig,
    name: str = "",
    adaptive: Optional[SacAgent] = None,
    handover_time: float = np.inf
) -> Tuple[EvalReport, DataFrame]:
    """
    确定性策略跑完一个级联回合并计算nMAE。

    给出adaptive时，t >= handover_time起内环由鲁棒控制器切换为适应性控制器，
    记录中adaptive列标记每一步使用的内环。
    """
    env: FlightEnvironment = FlightEnvironment(plant, scenario, program, env_config)
    env.reset()

    inner_policy = agent_policy(inner, deterministic=True)
    outer_policy = agent_policy(outer, deterministic=True)
    adaptive_policy = agent_policy(adaptive, deterministic=True) if adaptive is not None else None

    aborted: bool = False
    while True:
        switched: bool = adaptive_policy is not None and env.t >= handover_time - 1e-9
        policy = adaptive_policy if switched else inner_policy

        result: StepResult = env.cascade_step(outer_policy, policy)
        if adaptive_policy is not None and env.log.rows and not result.aborted:
            env.log.rows[-1]["adaptive"] = float(switched)

        if result.aborted:
            aborted = True
            break
        if result.done:
            break

    frame: DataFrame = DataFrame(env.log.rows)
    mae, ranges, nmae, aggregate = compute_nmae(frame, np.radians(evaluation.beta_range_deg))

    report: EvalReport = EvalReport(
        name=name or scenario.name,
        scenario=scenario.name,
        program=program.kind.value,
        altitude=scenario.altitude,
        speed=scenario.speed,
        mae=mae,
        ranges=ranges,
        nmae=nmae,
        aggregate=aggregate,
        success=(not aborted) and aggregate < evaluation.threshold,
        aborted=aborted,
        duration=env.t,
        controller="robust" if adaptive is None else "handover",
    )
    return report, env.episode_frame()


def evaluate(
    attitude_path: Path,
    altitude_path: Path,
    plant: PlantConfig,
    env_config: EnvironmentConfig,
    evaluation: EvaluationConfig,
    name: str,
    scenario: ScenarioSpec,
    program: ReferenceProgram,
    log_path: Optional[Path] = None,
    adaptive_path: Optional[Path] = None,
    handover_time: float = np.inf
) -> EvalReport:
    """包装评估函数以供进程池内运行"""
    inner: SacAgent = load_checkpoint(attitude_path)
    outer: SacAgent = load_checkpoint(altitude_path)
    adaptive: Optional[SacAgent] = load_checkpoint(adaptive_path) if adaptive_path else None

    report, log = evaluate_agents(
        inner, outer, plant, scenario, program, env_config, evaluation, name, adaptive, handover_time
    )
    if log_path:
        write_csv(log_path, log)
        report.log_path = str(log_path)

    return report


def wrap_evaluate(
    attitude_path: Path,
    altitude_path: Path,
    config: ExperimentConfig
) -> Callable[..., EvalReport]:
    """固定检查点和配置，留出场景与参考信号"""
    func: Callable[..., EvalReport] = partial(
        evaluate,
        attitude_path,
        altitude_path,
        config.plant,
        config.environment,
        config.evaluation
    )
    return func


def evaluate_attitude(
    inner: SacAgent,
    config: ExperimentConfig,
    seed: int = 0
) -> AttitudeReport:
    """随机阶跃任务上的内环姿态nMAE"""
    program: ReferenceProgram = replace(
        config.reference,
        kind=ReferenceKind.ATTITUDE_STEPS,
        duration=config.evaluation.attitude_episode_length,
    )
    policy = agent_policy(inner, deterministic=True)

    rows: List[dict] = []
    for task in range(config.evaluation.attitude_tasks):
        env: FlightEnvironment = FlightEnvironment(
            config.plant, config.scenario, program.with_seed(seed + task), config.environment
        )
        env.reset()

        aborted: bool = False
        while True:
            result: StepResult = env.attitude_step(policy)
            if result.aborted:
                aborted = True
                break
            if result.done:
                break

        frame: DataFrame = DataFrame(env.log.rows)
        if frame.empty:
            theta = phi = np.inf
        else:
            theta = float(np.mean(np.abs(frame["theta"] - frame["theta_ref"]))) / _value_range(
                frame["theta_ref"].to_numpy(), ANGLE_RANGE_FALLBACK)
            phi = float(np.mean(np.abs(frame["phi"] - frame["phi_ref"]))) / _value_range(
                frame["phi_ref"].to_numpy(), ANGLE_RANGE_FALLBACK)

        rows.append({"task": task, "nmae_theta": theta, "nmae_phi": phi, "aborted": aborted})

    tasks: DataFrame = DataFrame(rows)
    theta_mean: float = float(tasks["nmae_theta"].mean())
    phi_mean: float = float(tasks["nmae_phi"].mean())
    threshold: float = config.evaluation.attitude_threshold

    return AttitudeReport(
        tasks=tasks,
        theta=theta_mean,
        phi=phi_mean,
        success=theta_mean < threshold and phi_mean < threshold and not tasks["aborted"].any(),
    )


class TrainingEngine:
    """单阶段SAC训练引擎"""

    def __init__(self) -> None:
        """构造函数"""
        self.config: ExperimentConfig = ExperimentConfig()
        self.stage: StageType = StageType.ATTITUDE
        self.name: str = self.stage.value
        self.scenario: ScenarioSpec = self.config.scenario
        self.output_dir: Path = Path(".")
        self.total_steps: int = 0
        self.seed: int = 0

        self.agent: Optional[SacAgent] = None
        self.inner: Optional[SacAgent] = None
        self.buffer: Optional[ReplayBuffer] = None
        self.env: Optional[FlightEnvironment] = None
        self.rng: np.random.Generator = np.random.default_rng(0)

        self.steps: int = 0
        self.failed: bool = False
        self.checkpoint: Optional[Path] = None

        self.logs: list = []
        self.episode_results: List[EpisodeResult] = []
        self.recorder: DiagnosticsRecorder = DiagnosticsRecorder()
        self.episode_df: Optional[DataFrame] = None

    def clear_data(self) -> None:
        """清理上次训练缓存数据"""
        self.agent = None
        self.inner = None
        self.buffer = None
        self.env = None
        self.steps = 0
        self.failed = False
        self.checkpoint = None

        self.logs.clear()
        self.episode_results.clear()
        self.recorder = DiagnosticsRecorder()
        self.episode_df = None

    def set_parameters(
        self,
        config: ExperimentConfig,
        stage: StageType,
        output_dir: Path,
        steps: Optional[int] = None,
        seed: Optional[int] = None,
        name: Optional[str] = None,
        scenario: Optional[ScenarioSpec] = None
    ) -> None:
        """设置参数，name决定检查点与曲线文件名，scenario默认取配置中的场景"""
        self.config = config
        self.stage = StageType(stage)
        self.name = name or self.stage.value
        self.scenario = scenario or config.scenario
        self.output_dir = Path(output_dir)
        self.seed = config.seed if seed is None else seed

        if steps:
            self.total_steps = steps
        elif self.stage == StageType.ATTITUDE:
            self.total_steps = config.training.attitude_steps
        else:
            self.total_steps = config.training.altitude_steps

        self.rng = np.random.default_rng([self.seed, 1 if self.stage == StageType.ATTITUDE else 2])

    def add_agent(self, inner_path: Optional[Path] = None) -> None:
        """创建待训练智能体，高度阶段需要已训练的姿态检查点"""
        if self.stage == StageType.ATTITUDE:
            agent_config: AgentConfig = replace(self.config.attitude_agent, seed=self.seed)
            program: ReferenceProgram = replace(self.config.reference, kind=ReferenceKind.ATTITUDE_STEPS)
        else:
            if inner_path is None or not Path(inner_path).exists():
                raise PreconditionError(f"高度阶段训练需要姿态检查点：{inner_path}")

            self.inner = load_checkpoint(inner_path)
            self.inner.freeze()
            agent_config = replace(self.config.altitude_agent, seed=self.seed + 1)
            program = replace(self.config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)

        self.agent = SacAgent(agent_config)
        self.buffer = ReplayBuffer(agent_config.buffer_capacity, agent_config.n, agent_config.m)
        self.env = FlightEnvironment(
            self.config.plant, self.scenario, program, self.config.environment, record=False
        )

    def run_training(self) -> bool:
        """开始训练，返回是否正常完成"""
        self.output(f"开始{self.name}阶段训练，总步数{self.total_steps}")

        episode: int = 0
        while self.steps < self.total_steps:
            episode += 1
            try:
                result: EpisodeResult = self.run_episode(episode)
            except NumericError:
                self.failed = True
                self.output("训练发散，保存检查点后终止")
                self.output(traceback.format_exc())
                self.save_agent(f"{self.name}_failed.npz")
                return False

            self.episode_results.append(result)

            if episode % self.config.training.log_interval == 0:
                self.output(
                    f"回合{episode} 步数{self.steps} 回报{result.episode_return:.2f} "
                    f"η={result.eta:.4f} critic={result.critic_loss:.4f}"
                )

        self.checkpoint = self.save_agent(f"{self.name}.npz")
        self.output(f"{self.name}阶段训练结束，共{episode}回合")
        return True

    def run_episode(self, episode: int) -> EpisodeResult:
        """运行一个训练回合"""
        training = self.config.training

        if self.stage == StageType.ATTITUDE:
            program: ReferenceProgram = self.env.program.with_seed(self.seed * 1_000_003 + episode)
            duration: float = training.attitude_episode_length
        else:
            program = replace(
                self.env.program,
                climb_rate=float(self.rng.uniform(-training.climb_rate_range, training.climb_rate_range)),
                turn_roll_deg=float(self.rng.uniform(-training.turn_roll_range_deg, training.turn_roll_range_deg)),
            )
            duration = training.altitude_episode_length

        self.env.reset(program, duration)

        inner_policy = agent_policy(self.inner, deterministic=True) if self.inner else None
        policy = agent_policy(self.agent, deterministic=False)

        total: float = 0.0
        length: int = 0
        diagnostics: Optional[TrainDiagnostics] = None
        result: Optional[StepResult] = None

        while self.steps < self.total_steps:
            if self.stage == StageType.ATTITUDE:
                result = self.env.attitude_step(policy)
                self.buffer.add(result.attitude)
                reward: float = result.attitude_reward
            else:
                result = self.env.cascade_step(policy, inner_policy)
                self.buffer.add(result.altitude)
                reward = result.altitude_reward

            diagnostics = train_step(self.agent, self.buffer)
            self.steps += 1
            total += reward
            length += 1

            if self.steps % self.config.training.checkpoint_interval == 0:
                self.save_agent(f"{self.name}.npz")
                self.write_log(f"保存检查点，步数{self.steps}")

            if result.done:
                break

        if diagnostics is None:
            diagnostics = TrainDiagnostics(self.agent.step_count, TrainStatus.WARMING_UP, self.agent.eta)
        self.recorder.record(diagnostics, total)

        return EpisodeResult(
            episode=episode,
            steps=self.steps,
            length=length,
            episode_return=total,
            aborted=bool(result and result.aborted),
            eta=diagnostics.eta,
            critic_loss=diagnostics.critic_loss,
            policy_objective=diagnostics.policy_objective,
            entropy_estimate=diagnostics.entropy_estimate,
        )

    def save_agent(self, filename: str) -> Path:
        """先写临时文件再替换，中断时保留上一个有效检查点"""
        path: Path = self.output_dir.joinpath(filename)
        temp: Path = path.with_name(path.stem + ".tmp.npz")
        save_checkpoint(self.agent, temp)
        temp.replace(path)
        return path

    def calculate_result(self) -> Optional[DataFrame]:
        """计算逐回合训练曲线"""
        if not self.episode_results:
            self.output("回合记录为空，无法计算")
            return None

        results: dict = defaultdict(list)
        for result in self.episode_results:
            for key in (
                "episode", "steps", "length", "episode_return", "aborted",
                "eta", "critic_loss", "policy_objective", "entropy_estimate"
            ):
                results[key].append(getattr(result, key))

        df: DataFrame = DataFrame.from_dict(results).set_index("episode")
        df["smoothed"] = smooth(df["episode_return"].to_numpy(), 20)

        self.episode_df = df
        return df

    def calculate_statistics(self, df: Optional[DataFrame] = None, output: bool = True) -> dict:
        """计算训练统计指标"""
        if df is None:
            df = self.episode_df

        total_episodes: int = 0
        total_steps: int = 0
        aborted_episodes: int = 0
        best_return: float = 0
        final_smoothed: float = 0
        last_mean: float = 0
        final_eta: float = 0

        if df is not None and not df.empty:
            total_episodes = len(df)
            total_steps = int(df["steps"].iloc[-1])
            aborted_episodes = int(df["aborted"].sum())
            best_return = float(df["episode_return"].max())
            final_smoothed = float(df["smoothed"].iloc[-1])
            last_mean = float(df["episode_return"].iloc[-20:].mean())
            final_eta = float(df["eta"].iloc[-1])

        if output:
            self.output("-" * 30)
            self.output(f"训练阶段：\t{self.stage.value}")
            self.output(f"总回合数：\t{total_episodes}")
            self.output(f"总步数：\t{total_steps}")
            self.output(f"中止回合：\t{aborted_episodes}")
            self.output(f"最佳回报：\t{best_return:,.2f}")
            self.output(f"平滑回报：\t{final_smoothed:,.2f}")
            self.output(f"末20回合均值：\t{last_mean:,.2f}")
            self.output(f"最终温度：\t{final_eta:,.4f}")

        statistics: dict = {
            "stage": self.stage.value,
            "total_episodes": total_episodes,
            "total_steps": total_steps,
            "aborted_episodes": aborted_episodes,
            "best_return": best_return,
            "final_smoothed": final_smoothed,
            "last_mean": last_mean,
            "final_eta": final_eta,
            "failed": self.failed,
        }

        for key, value in statistics.items():
            if isinstance(value, float):
                statistics[key] = float(np.nan_to_num(value, posinf=0, neginf=0))

        return statistics

    def show_chart(self, df: Optional[DataFrame] = None, path: Optional[Path] = None) -> None:
        """显示或保存训练曲线"""
        if df is None:
            df = self.episode_df

        if df is None:
            return

        fig = make_subplots(
            rows=3,
            cols=1,
            subplot_titles=["Sum of rewards", "Temperature", "Critic loss"],
            vertical_spacing=0.08
        )

        fig.add_trace(go.Scatter(x=df.index, y=df["episode_return"], mode="lines", name="Return"), row=1, col=1)
        fig.add_trace(go.Scatter(x=df.index, y=df["smoothed"], mode="lines", name="Smoothed"), row=1, col=1)
        fig.add_trace(go.Scatter(x=df.index, y=df["eta"], mode="lines", name="Eta"), row=2, col=1)
        fig.add_trace(go.Scatter(x=df.index, y=df["critic_loss"], mode="lines", name="Critic"), row=3, col=1)

        fig.update_layout(height=900, width=1000)
        if path:
            fig.write_html(str(path), include_plotlyjs="cdn")
        else:
            fig.show()

    def write_log(self, msg: str) -> None:
        """输出日志"""
        self.logs.append(f"{self.steps}\t{msg}")

    def output(self, msg: str) -> None:
        """输出训练引擎信息"""
        print(f"{datetime.now()}\t{msg}")


def train_stage(
    stage: StageType,
    config: ExperimentConfig,
    output_dir: Path,
    seed: Optional[int] = None,
    steps: Optional[int] = None,
    attitude_path: Optional[Path] = None,
    name: Optional[str] = None,
    scenario: Optional[ScenarioSpec] = None
) -> TrainResult:
    """训练单个阶段，输出检查点、训练曲线与诊断数据"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    engine: TrainingEngine = TrainingEngine()
    engine.set_parameters(config, stage, output_dir, steps, seed, name, scenario)
    engine.add_agent(attitude_path)
    finished: bool = engine.run_training()

    df: Optional[DataFrame] = engine.calculate_result()
    statistics: dict = engine.calculate_statistics(output=finished)

    if df is not None:
        write_csv(output_dir.joinpath(f"{engine.name}_curve.csv"), df.reset_index())
        engine.show_chart(df, output_dir.joinpath(f"{engine.name}_curve.html"))
    engine.recorder.save(output_dir.joinpath(f"{engine.name}_diagnostics.csv"))

    return TrainResult(
        stage=engine.stage,
        checkpoint=engine.checkpoint,
        curve=df,
        statistics=statistics,
        failed=engine.failed,
    )


def run_parallel(
    func: Callable[..., Any],
    jobs: List[dict],
    workers: int = 1,
    write_log: Optional[Callable[[str], None]] = None
) -> List[Any]:
    """
    并行执行相互独立的任务，结果按提交顺序返回。

    单个任务抛出的任何异常都作为该任务的结果返回，不影响其他任务，
    异常信息通过write_log记录。
    """
    results: List[Any] = [None] * len(jobs)

    def record(i: int, error: Exception) -> None:
        results[i] = error
        if write_log:
            write_log(f"任务{i}失败，触发异常：{type(error).__name__}: {error}")

    if workers <= 1:
        for i, kwargs in enumerate(jobs):
            try:
                results[i] = func(**kwargs)
            except Exception as e:
                record(i, e)
        return results

    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as executor:
        futures: dict = {executor.submit(func, **kwargs): i for i, kwargs in enumerate(jobs)}
        for future in as_completed(futures):
            i: int = futures[future]
            try:
                results[i] = future.result()
            except Exception as e:
                record(i, e)

    return results


def _reports_table(jobs: List[dict], results: List[Any]) -> DataFrame:
    """评估结果汇总为表格，失败行记录错误信息"""
    rows: List[dict] = []
    for job, result in zip(jobs, results):
        if isinstance(result, EvalReport):
            rows.append(result.to_row())
        else:
            scenario: ScenarioSpec = job["scenario"]
            report: EvalReport = EvalReport(
                name=job["name"],
                scenario=scenario.name,
                program=job["program"].kind.value,
                altitude=scenario.altitude,
                speed=scenario.speed,
                error=f"{type(result).__name__}: {result}",
                controller="handover" if "adaptive_path" in job else "robust",
            )
            rows.append(report.to_row())
    return DataFrame(rows)


def robustness_jobs(config: ExperimentConfig) -> List[dict]:
    """初始状态与参考信号形状组合"""
    base: ReferenceProgram = replace(config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)
    duration: float = base.duration

    jobs: List[dict] = []
    for altitude, speed in ROBUSTNESS_IFC:
        scenario: ScenarioSpec = ScenarioSpec(name="nominal", altitude=altitude, speed=speed)
        jobs.append({
            "name": f"profile_{altitude:.0f}_{speed:.0f}",
            "scenario": scenario,
            "program": base,
        })

    nominal: ScenarioSpec = ScenarioSpec(name="nominal")
    for kind in (ReferenceKind.SINUSOIDAL, ReferenceKind.TRIANGULAR):
        for label, builder in (("low", low_frequency), ("high", high_frequency)):
            jobs.append({
                "name": f"{kind.value}_{label}",
                "scenario": nominal,
                "program": builder(kind, duration),
            })

    return jobs


def robustness_matrix(
    attitude_path: Path,
    altitude_path: Path,
    config: ExperimentConfig,
    workers: int = 1,
    write_log: Optional[Callable[[str], None]] = None
) -> DataFrame:
    """不同初始状态与参考信号形状下的评估表"""
    jobs: List[dict] = robustness_jobs(config)
    func: Callable[..., EvalReport] = wrap_evaluate(attitude_path, altitude_path, config)
    results: List[Any] = run_parallel(func, jobs, workers, write_log)
    return _reports_table(jobs, results)


def failure_jobs(config: ExperimentConfig) -> List[dict]:
    """六种故障与噪声阵风场景"""
    program: ReferenceProgram = replace(config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)

    jobs: List[dict] = []
    for name in ["nominal"] + FAILURE_PRESETS + ["noise_gust"]:
        scenario: ScenarioSpec = replace(
            get_scenario(name),
            altitude=config.scenario.altitude,
            speed=config.scenario.speed,
        )
        jobs.append({"name": name, "scenario": scenario, "program": program})

    return jobs


def failure_matrix(
    attitude_path: Path,
    altitude_path: Path,
    config: ExperimentConfig,
    workers: int = 1,
    write_log: Optional[Callable[[str], None]] = None
) -> DataFrame:
    """故障场景下的评估表"""
    jobs: List[dict] = failure_jobs(config)
    func: Callable[..., EvalReport] = wrap_evaluate(attitude_path, altitude_path, config)
    results: List[Any] = run_parallel(func, jobs, workers, write_log)
    return _reports_table(jobs, results)


def adaptive_scenario(name: str, config: ExperimentConfig) -> ScenarioSpec:
    """适应性训练用的故障场景，故障从回合开始即生效"""
    if name not in FAILURE_PRESETS:
        raise UnknownScenarioError(f"{name}不是故障场景，可选：{', '.join(FAILURE_PRESETS)}")

    preset: ScenarioSpec = get_scenario(name)
    return replace(
        preset,
        failure=replace(preset.failure, onset_time=0.0),
        altitude=config.scenario.altitude,
        speed=config.scenario.speed,
    )


def train_adaptive(
    config: ExperimentConfig,
    failure: str,
    output_dir: Path,
    seed: Optional[int] = None,
    steps: Optional[int] = None
) -> TrainResult:
    """在故障对象上重新训练姿态控制器，检查点为adaptive_<failure>.npz"""
    scenario: ScenarioSpec = adaptive_scenario(failure, config)

    # 方向舵卡死时不再跟踪侧滑角
    if scenario.failure.kind == FailureType.RUDDER_JAM:
        config = replace(config, environment=replace(config.environment, track_sideslip=False))

    return train_stage(
        StageType.ATTITUDE, config, output_dir, seed, steps,
        name=f"adaptive_{failure}", scenario=scenario
    )


def adaptive_jobs(config: ExperimentConfig, adaptive_paths: Dict[str, Optional[Path]]) -> List[dict]:
    """每种故障一个鲁棒响应任务和一个鲁棒到适应性切换的任务"""
    program: ReferenceProgram = replace(config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)
    output_dir: Path = Path(config.output_dir)

    jobs: List[dict] = []
    for name, path in adaptive_paths.items():
        scenario: ScenarioSpec = replace(
            get_scenario(name),
            altitude=config.scenario.altitude,
            speed=config.scenario.speed,
        )
        jobs.append({
            "name": f"{name}_robust",
            "scenario": scenario,
            "program": program,
            "log_path": output_dir.joinpath(f"{name}_robust_log.csv"),
        })
        jobs.append({
            "name": f"{name}_handover",
            "scenario": scenario,
            "program": program,
            "log_path": output_dir.joinpath(f"{name}_handover_log.csv"),
            "adaptive_path": path,
            "handover_time": scenario.failure.onset_time + config.evaluation.handover_delay,
        })

    return jobs


def adaptive_matrix(
    attitude_path: Path,
    altitude_path: Path,
    config: ExperimentConfig,
    steps: Optional[int] = None,
    workers: int = 1,
    write_log: Optional[Callable[[str], None]] = None
) -> DataFrame:
    """
    逐个故障在失效对象上训练适应性姿态控制器，
    再比较全程鲁棒控制与故障后切换到适应性控制器的响应。

    适应性训练失败的故障，其切换行记录错误信息。
    """
    output_dir: Path = Path(config.output_dir)
    train_jobs: List[dict] = [
        {"config": config, "failure": name, "output_dir": output_dir, "seed": config.seed, "steps": steps}
        for name in FAILURE_PRESETS
    ]
    trained: List[Any] = run_parallel(train_adaptive, train_jobs, workers, write_log)

    adaptive_paths: Dict[str, Optional[Path]] = {}
    for job, result in zip(train_jobs, trained):
        ok: bool = isinstance(result, TrainResult) and not result.failed
        adaptive_paths[job["failure"]] = result.checkpoint if ok else None

    jobs: List[dict] = adaptive_jobs(config, adaptive_paths)
    pending: List[int] = [i for i, job in enumerate(jobs) if job.get("adaptive_path", True)]

    func: Callable[..., EvalReport] = wrap_evaluate(attitude_path, altitude_path, config)
    evaluated: List[Any] = run_parallel(func, [jobs[i] for i in pending], workers, write_log)

    results: List[Any] = [PreconditionError("适应性控制器训练失败")] * len(jobs)
    for i, result in zip(pending, evaluated):
        results[i] = result

    return _reports_table(jobs, results)


def train_pair(config: ExperimentConfig, seed: int, output_dir: Path, steps: Optional[int] = None) -> dict:
    """训练一对级联控制器并在标称任务上评估"""
    output_dir = Path(output_dir)
    row: dict = {"seed": seed, "failed": False, "nmae": np.inf, "success": False, "aborted": False}

    attitude: TrainResult = train_stage(StageType.ATTITUDE, config, output_dir, seed, steps)
    if attitude.failed:
        row["failed"] = True
        return row

    altitude: TrainResult = train_stage(
        StageType.ALTITUDE, config, output_dir, seed, steps, attitude.checkpoint
    )
    if altitude.failed:
        row["failed"] = True
        return row

    program: ReferenceProgram = replace(config.reference, kind=ReferenceKind.ALTITUDE_PROFILE)
    scenario: ScenarioSpec = replace(get_scenario("nominal"), altitude=config.scenario.altitude,
                                     speed=config.scenario.speed)
    report: EvalReport = evaluate(
        attitude.checkpoint,
        altitude.checkpoint,
        config.plant,
        config.environment,
        config.evaluation,
        "nominal",
        scenario,
        program,
        output_dir.joinpath("nominal_log.csv"),
    )

    row.update({"nmae": report.aggregate, "success": report.success, "aborted": report.aborted})
    return row


def summarize_sweep(table: DataFrame, threshold: float) -> SweepResult:
    """成功率与Wilson区间，与运行顺序无关。发散或中止的运行不计为成功"""
    total: int = len(table)
    successes: int = 0
    if total:
        finished = ~(table["failed"].astype(bool) | table["aborted"].astype(bool))
        successes = int((finished & (table["nmae"] < threshold)).sum())
    low, high = wilson_interval(successes, total)
    rate: float = successes / total if total else 0.0
    return SweepResult(rate=rate, low=low, high=high, table=table)


def reliability_sweep(
    config: ExperimentConfig,
    n: int,
    output_dir: Path,
    threshold: Optional[float] = None,
    steps: Optional[int] = None,
    workers: int = 1,
    write_log: Optional[Callable[[str], None]] = None
) -> SweepResult:
    """独立训练n对控制器，统计成功率"""
    if n < 1:
        raise PreconditionError("训练次数至少为1")

    threshold = config.evaluation.threshold if threshold is None else threshold
    output_dir = Path(output_dir)

    jobs: List[dict] = [
        {
            "config": config,
            "seed": config.seed + i,
            "output_dir": output_dir.joinpath(f"run_{i:03d}"),
            "steps": steps,
        }
        for i in range(n)
    ]
    results: List[Any] = run_parallel(train_pair, jobs, workers, write_log)

    rows: List[dict] = []
    for job, result in zip(jobs, results):
        if isinstance(result, dict):
            rows.append(result)
        else:
            rows.append({"seed": job["seed"], "failed": True, "nmae": np.inf,
                         "success": False, "aborted": False})

    table: DataFrame = DataFrame(rows, columns=["seed", "failed", "nmae", "success", "aborted"])
    return summarize_sweep(table, threshold)
