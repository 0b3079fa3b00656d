import json

import pytest

from flightcontrol_sac.base import ConfigurationError, FailureType, LrSchedule, RewardMode
from flightcontrol_sac.setting import (
    ExperimentConfig,
    apply_overrides,
    config_to_dict,
    load_config,
    parse_config,
    save_config
)


def test_empty_document_gives_defaults():
    config = parse_config("")
    assert config == ExperimentConfig()
    assert parse_config("{}") == ExperimentConfig()

    assert config.attitude_agent.n == 9 and config.attitude_agent.m == 3
    assert config.attitude_agent.lr_schedule == LrSchedule.LINEAR
    assert config.altitude_agent.n == 2 and config.altitude_agent.m == 1
    assert config.plant.dt == 0.01
    assert config.evaluation.threshold == 0.05


def test_partial_document():
    config = parse_config(json.dumps({
        "seed": 4,
        "scenario": {"failure": {"kind": "icing", "onset_time": 5}},
        "environment": {"reward_mode": "literal"},
    }))

    assert config.seed == 4
    assert config.scenario.failure.kind == FailureType.ICING
    assert config.scenario.failure.onset_time == 5.0
    assert config.environment.reward_mode == RewardMode.LITERAL
    assert config.scenario.speed == 90.0


def test_invalid_discount():
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config('{"attitude_agent": {"gamma": 1.2}}')

    assert "discount" in str(excinfo.value)
    assert excinfo.value.key == "attitude_agent.gamma"


def test_unknown_key_reports_line():
    text = '{\n  "training": {\n    "bogus": 1\n  }\n}'
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(text)

    assert excinfo.value.key == "training.bogus"
    assert excinfo.value.line == 3


def test_wrong_type():
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config('{"training": {"workers": "four"}}')
    assert excinfo.value.key == "training.workers"

    with pytest.raises(ConfigurationError):
        parse_config('{"scenario": {"failure": {"kind": "engine_fire"}}}')

    with pytest.raises(ConfigurationError):
        parse_config('{"plant": 3}')


def test_json_syntax_error_line():
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config('{\n  "seed": 1,\n  "x":\n}')
    assert excinfo.value.line == 4


def test_snapshot_round_trip(tmp_path):
    config = apply_overrides(ExperimentConfig(), [
        "seed=12",
        "scenario.gust.enabled=true",
        "reference.kind=sinusoidal",
        "reference.altitude_offset=2500",
    ])
    path = tmp_path / "config.json"
    save_config(config, path)

    loaded = load_config(path)
    assert loaded == config
    assert config_to_dict(loaded) == json.loads(path.read_text(encoding="UTF-8"))


def test_overrides():
    config = apply_overrides(ExperimentConfig(), [
        "training.workers=4",
        "evaluation.beta_range_deg=5",
        "output_dir=elsewhere",
    ])

    assert config.training.workers == 4
    assert config.evaluation.beta_range_deg == 5.0
    assert config.output_dir == "elsewhere"


def test_bad_override():
    with pytest.raises(ConfigurationError):
        apply_overrides(ExperimentConfig(), ["training.workers"])

    with pytest.raises(ConfigurationError):
        apply_overrides(ExperimentConfig(), ["training.workers=0"])

    with pytest.raises(ConfigurationError):
        apply_overrides(ExperimentConfig(), ["nothing.here=1"])

    with pytest.raises(ConfigurationError) as excinfo:
        apply_overrides(ExperimentConfig(), ["evaluation.handover_delay=-1"])
    assert excinfo.value.key == "evaluation.handover_delay"


def test_load_with_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"seed": 3}', encoding="UTF-8")

    config = load_config(path, ["training.log_interval=5"])
    assert config.seed == 3
    assert config.training.log_interval == 5


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.json")
