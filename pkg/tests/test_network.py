import numpy as np
import pytest

from flightcontrol_sac.base import CheckpointError, ConfigurationError, NumericError, UsageError
from flightcontrol_sac.network import (
    ADAM_EPS,
    LAYERNORM_EPS,
    AdamState,
    LayerSpec,
    adam_step,
    backward,
    check_specs,
    forward,
    load_network,
    mlp_specs,
    save_network,
    xavier_init
)


def randomized_network(seed: int, n_in: int = 3, hidden: int = 5, n_out: int = 2):
    """增益、偏置均随机化的网络，覆盖层归一化全部路径"""
    params = xavier_init(mlp_specs(n_in, hidden, n_out), seed)
    rng = np.random.default_rng(seed + 1000)
    for array in params.biases + params.gains + params.offsets:
        array += rng.normal(scale=0.3, size=array.shape)
    return params


def numeric_gradient(func, array: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """中心差分"""
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + h
        upper = func()
        array[index] = original - h
        lower = func()
        array[index] = original
        grad[index] = (upper - lower) / (2 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def test_mlp_specs_topology():
    specs = mlp_specs(9, 64, 6)
    assert [(s.input_width, s.output_width) for s in specs] == [(9, 64), (64, 64), (64, 6)]
    check_specs(specs)


def test_mismatched_specs_rejected():
    with pytest.raises(ConfigurationError):
        check_specs([LayerSpec(3, 4), LayerSpec(5, 2)])

    with pytest.raises(ConfigurationError):
        LayerSpec(0, 4)


def test_single_vector_matches_batch_row():
    params = randomized_network(1)
    x = np.random.default_rng(2).normal(size=(4, 3))

    batch, _ = forward(params, x)
    single, _ = forward(params, x[2])

    assert single.shape == (2,)
    np.testing.assert_allclose(single, batch[2], rtol=1e-12, atol=1e-12)


def test_wrong_input_width():
    params = xavier_init(mlp_specs(3, 4, 1), 0)
    with pytest.raises(UsageError):
        forward(params, np.zeros(4))


def test_non_finite_input():
    params = xavier_init(mlp_specs(3, 4, 1), 0)
    with pytest.raises(NumericError):
        forward(params, np.array([0.0, np.nan, 1.0]))


def test_layernorm_statistics():
    params = xavier_init(mlp_specs(4, 16, 1), 3)
    x = np.random.default_rng(4).normal(size=(10, 4))
    _, tape = forward(params, x)

    zhat = tape.normalized[0]
    inv_std = tape.inv_stds[0][:, 0]

    np.testing.assert_allclose(zhat.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(zhat.var(axis=1), 1.0 - LAYERNORM_EPS * inv_std ** 2, rtol=1e-10)


def test_xavier_variance():
    samples = np.concatenate([
        xavier_init([LayerSpec(16, 16)], seed).weights[0].ravel() for seed in range(20)
    ])
    assert abs(samples.var() / (2 / 32) - 1) < 0.05

    # 均匀分布，边界为 sqrt(6/(fan_in+fan_out))
    limit = np.sqrt(6 / 32)
    assert np.abs(samples).max() <= limit
    assert np.abs(samples).max() > 0.95 * limit

    params = xavier_init(mlp_specs(3, 4, 2), 0)
    assert all(np.all(b == 0) for b in params.biases)
    assert np.all(params.gains[0] == 1) and np.all(params.offsets[0] == 0)
    assert params.gains[-1].size == 0


@pytest.mark.parametrize("seed", range(50))
def test_gradients_match_finite_differences(seed: int):
    params = randomized_network(seed)
    rng = np.random.default_rng(seed + 5000)
    x = rng.normal(size=(3, 3))
    weights = rng.normal(size=(3, 2))

    def loss() -> float:
        out, _ = forward(params, x)
        return float(np.sum(out * weights))

    _, tape = forward(params, x)
    grads, input_grad = backward(tape, weights)

    analytic = np.concatenate([g.ravel() for g in grads.arrays()])
    numeric = np.concatenate([numeric_gradient(loss, a).ravel() for a in params.arrays()])
    assert relative_error(analytic, numeric) < 1e-4

    assert relative_error(input_grad, numeric_gradient(loss, x)) < 1e-4


def test_backward_shape_mismatch():
    params = xavier_init(mlp_specs(3, 4, 2), 0)
    _, tape = forward(params, np.zeros((5, 3)))
    with pytest.raises(UsageError):
        backward(tape, np.zeros((5, 1)))


def test_adam_first_step():
    p = np.array([1.0, -2.0, 0.5])
    g = np.array([0.2, -0.4, 0.0])
    state = AdamState.create([p])

    adam_step([p], [g], state, 0.1)

    expected = np.array([1.0, -2.0, 0.5]) - 0.1 * g / (np.abs(g) + ADAM_EPS)
    np.testing.assert_allclose(p, expected, rtol=0, atol=1e-15)
    assert state.step == 1
    assert state.learning_rate == 0.1


def test_adam_rejects_non_finite_gradient():
    p = np.zeros(2)
    state = AdamState.create([p])
    with pytest.raises(NumericError):
        adam_step([p], [np.array([np.inf, 0.0])], state, 0.1)
    assert state.step == 0


def test_network_file_round_trip(tmp_path):
    params = randomized_network(9)
    state = AdamState.create(params)
    adam_step(params, params.copy(), state, 1e-3)

    path = tmp_path / "net.npz"
    save_network(path, params, state)
    loaded, loaded_state = load_network(path)

    assert loaded.specs == params.specs
    for a, b in zip(loaded.arrays(), params.arrays()):
        np.testing.assert_array_equal(a, b)
    assert loaded_state.step == 1
    for a, b in zip(loaded_state.second_moments, state.second_moments):
        np.testing.assert_array_equal(a, b)


def test_version_mismatch(tmp_path):
    path = tmp_path / "net.npz"
    save_network(path, xavier_init(mlp_specs(2, 3, 1), 0))

    with np.load(path) as npz:
        data = {key: npz[key] for key in npz.files}
    data["format_version"] = np.array(99)
    with open(path, "wb") as f:
        np.savez(f, **data)

    with pytest.raises(CheckpointError):
        load_network(path)


def test_unreadable_container(tmp_path):
    path = tmp_path / "garbage.npz"
    path.write_bytes(b"not a zip archive")
    with pytest.raises(CheckpointError):
        load_network(path)
