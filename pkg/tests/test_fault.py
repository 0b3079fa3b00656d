import numpy as np
import pytest

from flightcontrol_sac.base import ConfigurationError, FailureType, UnknownScenarioError, UsageError
from flightcontrol_sac.fault import (
    FAILURE_PRESETS,
    SCENARIO_PRESETS,
    FailureSpec,
    GustSpec,
    NoiseSpec,
    SensorReading,
    apply_failure,
    get_scenario,
    gust_alpha_offset,
    noise_samples,
    observe
)
from flightcontrol_sac.simulator import AeroModel, ControlInput, PlantConfig, Simulator, trim


ONSET = 0.5


def run_with_failure(failure: FailureSpec, steps: int = 100):
    """配平起步，给定固定舵面指令运行，返回每步的状态与记录"""
    point = trim(AeroModel(), 2000.0, 90.0)
    sim = Simulator(PlantConfig(), failure)
    sim.reset_trimmed(point)

    command = np.array([point.elevator - np.radians(3.0), np.radians(1.0), 0.0])
    states, rows = [], []
    for _ in range(steps):
        t = sim.t
        sim.step(command)
        states.append((t, sim.state.x.copy()))
        rows.append((t, sim.record()))
    return states, rows


def test_presets():
    assert set(FAILURE_PRESETS) < set(SCENARIO_PRESETS)
    assert len(SCENARIO_PRESETS) == 8

    assert get_scenario("nominal").failure.kind == FailureType.NONE
    assert get_scenario("rudder_jam").failure.onset_time == 10.0
    assert get_scenario("aileron_eff").failure.onset_time == 30.0
    assert get_scenario("icing").failure.kind == FailureType.ICING

    scenario = get_scenario("noise_gust")
    assert scenario.noise.enabled and scenario.gust.enabled
    assert scenario.failure.kind == FailureType.NONE


def test_presets_are_fresh_copies():
    first = get_scenario("rudder_jam")
    first.failure.onset_time = 99.0
    assert get_scenario("rudder_jam").failure.onset_time == 10.0


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError):
        get_scenario("engine_fire")


def test_failure_spec_validation():
    with pytest.raises(ConfigurationError):
        FailureSpec(kind="bogus")
    with pytest.raises(ConfigurationError):
        FailureSpec(kind="aileron_eff", aileron_factor=1.5)
    with pytest.raises(ConfigurationError):
        FailureSpec(onset_time=-1.0)

    assert FailureSpec(kind="icing").kind == FailureType.ICING


@pytest.mark.parametrize("name", FAILURE_PRESETS)
def test_failure_leaves_flight_untouched_before_onset(name: str):
    failure = get_scenario(name).failure
    failure.onset_time = ONSET

    nominal, _ = run_with_failure(FailureSpec())
    failed, _ = run_with_failure(failure)

    for (t, x_nominal), (_, x_failed) in zip(nominal, failed):
        if t < ONSET - 1e-9:
            np.testing.assert_array_equal(x_failed, x_nominal)

    assert not np.array_equal(failed[-1][1], nominal[-1][1])


def test_rudder_jam_holds_position():
    _, rows = run_with_failure(FailureSpec(kind=FailureType.RUDDER_JAM, onset_time=ONSET))
    for t, row in rows:
        if t >= ONSET:
            assert row["dr"] == np.radians(-15.0)
        else:
            assert row["dr"] != np.radians(-15.0)


def test_elevator_range_clipped():
    _, rows = run_with_failure(FailureSpec(kind=FailureType.ELEVATOR_RANGE, onset_time=ONSET))
    after = [row["de"] for t, row in rows if t >= ONSET]
    before = [row["de"] for t, row in rows if t < ONSET]

    assert max(abs(de) for de in after) <= np.radians(2.5) + 1e-15
    assert min(before) < -np.radians(2.5)


def test_model_failures():
    surfaces = ControlInput(0.1, 0.2, 0.05, 1000.0)
    model = AeroModel()

    _, htail = apply_failure(FailureSpec(kind=FailureType.HTAIL_LOSS), 1.0, surfaces, model)
    assert htail.Cm_q == pytest.approx(model.Cm_q * 0.3)
    assert htail.Cm_de == pytest.approx(model.Cm_de * 0.3)
    assert htail.CL_de == pytest.approx(model.CL_de * 0.3)

    _, icing = apply_failure(FailureSpec(kind=FailureType.ICING), 1.0, surfaces, model)
    assert icing.CL_max == pytest.approx(model.CL_max * 0.7)
    assert icing.CD_0 == pytest.approx(model.CD_0 + 0.06)

    _, shifted = apply_failure(FailureSpec(kind=FailureType.CG_SHIFT), 1.0, surfaces, model)
    assert shifted.dx_cg == -0.25

    reduced, same = apply_failure(FailureSpec(kind=FailureType.AILERON_EFF), 1.0, surfaces, model)
    assert reduced.aileron == pytest.approx(0.06)
    assert reduced.elevator == 0.1 and reduced.thrust == 1000.0
    assert same is model

    # 原模型不被修改
    assert model.Cm_q == AeroModel().Cm_q


def test_failure_inactive_before_onset():
    surfaces = ControlInput(0.1, 0.2, 0.05)
    model = AeroModel()
    spec = FailureSpec(kind=FailureType.RUDDER_JAM, onset_time=10.0)

    out_surfaces, out_model = apply_failure(spec, 9.99, surfaces, model)
    assert out_surfaces == surfaces and out_model is model

    out_surfaces, _ = apply_failure(spec, 10.0, surfaces, model)
    assert out_surfaces.rudder == np.radians(-15.0)


def test_negative_time():
    with pytest.raises(UsageError):
        apply_failure(FailureSpec(), -0.01, ControlInput(), AeroModel())


def test_noise_statistics():
    spec = NoiseSpec(enabled=True)
    samples = noise_samples(spec, np.random.default_rng(11), 10 ** 6)

    assert samples.shape == (10 ** 6, 7)

    mean = samples.mean(axis=0)
    std = samples.std(axis=0)
    assert np.all(np.abs(mean - spec.biases()) < 5 * spec.ssds() / 1000)
    np.testing.assert_allclose(std, spec.ssds(), rtol=0.01)


def test_observe_without_noise():
    truth = SensorReading(0.1, -0.2, 0.0, 0.05, 0.3, 0.01, 2000.0)
    rng = np.random.default_rng(0)
    before = rng.bit_generator.state

    reading = observe(truth, NoiseSpec(), rng)

    assert reading == truth
    assert reading is not truth
    assert rng.bit_generator.state == before


def test_observe_with_noise_is_reproducible():
    truth = SensorReading(0.1, -0.2, 0.0, 0.05, 0.3, 0.01, 2000.0)
    spec = NoiseSpec(enabled=True)

    first = observe(truth, spec, np.random.default_rng(5))
    second = observe(truth, spec, np.random.default_rng(5))

    assert first == second
    assert first != truth


def test_gust_window():
    spec = GustSpec(enabled=True)
    expected = np.arctan(15 * 0.3048 / 90.0)

    assert gust_alpha_offset(spec, 19.99, 90.0) == 0.0
    assert gust_alpha_offset(spec, 20.0, 90.0) == pytest.approx(expected)
    assert gust_alpha_offset(spec, 22.5, 90.0) == pytest.approx(expected)
    assert gust_alpha_offset(spec, 23.0, 90.0) == 0.0
    assert gust_alpha_offset(spec, 76.0, 90.0) == pytest.approx(expected)

    assert gust_alpha_offset(GustSpec(), 21.0, 90.0) == 0.0

    with pytest.raises(UsageError):
        gust_alpha_offset(spec, 21.0, 0.0)
