# MIT License
#
# Copyright (c) 2015-present, Xiaoyou Chen
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.


from .base import (
    APP_NAME,
    FORMAT_VERSION,
    StageType,
    FailureType,
    ReferenceKind,
    RewardMode,
    FlightControlError,
    ConfigurationError,
    NumericError,
    UsageError,
    SimulationAbort,
    CheckpointError,
    PreconditionError,
    UnknownScenarioError
)
from .agent import (
    AgentConfig,
    SacAgent,
    ReplayBuffer,
    Transition,
    train_step,
    save_checkpoint,
    load_checkpoint
)
from .simulator import PlantConfig, Simulator, trim
from .fault import ScenarioSpec, get_scenario
from .reference import ReferenceProgram, gen_reference
from .environment import FlightEnvironment
from .setting import ExperimentConfig, load_config
from .training import (
    TrainingEngine,
    evaluate,
    train_stage,
    train_adaptive,
    robustness_matrix,
    adaptive_matrix,
    reliability_sweep
)
from .engine import ExperimentEngine


__version__ = "1.1.0"
