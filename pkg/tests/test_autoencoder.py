import numpy as np
import pytest
from pydantic import ValidationError

from autoencoder import (FlatObjective, cost, cost_and_gradient, decode, encode, encode_batch, flatten_params,
                         gradient, kl_divergence, load_params, reconstruct, satlin, satlin_grad, save_params,
                         unflatten_params)
from exceptions import DimensionError, NonFiniteError
from models import AEConfig, AEParams, AESettings


def interior_instance(seed: int, input_dim: int = 8, hidden_dim: int = 4, n: int = 5):
    """Parameters and data whose pre-activations all lie inside (0,1)"""
    rng = np.random.default_rng(seed)
    params = AEParams(
        W=rng.uniform(-0.05, 0.05, size=(hidden_dim, input_dim)),
        b1=np.full(hidden_dim, 0.5),
        b2=np.full(input_dim, 0.5),
    )
    X = rng.uniform(size=(n, input_dim))
    return params, X


def oracle_cost(params: AEParams, X: np.ndarray, config: AEConfig) -> float:
    """Direct summation over samples, units and inputs"""
    n, input_dim = X.shape
    W, b1, b2 = params.W, params.b1, params.b2
    total_squared = 0.0
    activations = np.zeros(config.hidden_dim)
    for k in range(n):
        z = [min(max(sum(W[i, j] * X[k, j] for j in range(input_dim)) + b1[i], 0.0), 1.0)
             for i in range(config.hidden_dim)]
        activations += z
        for j in range(input_dim):
            x_hat = min(max(sum(W[i, j] * z[i] for i in range(config.hidden_dim)) + b2[j], 0.0), 1.0)
            total_squared += (X[k, j] - x_hat) ** 2
    rho = config.sparsity_target
    kl = 0.0
    for rho_hat in activations / n:
        kl += rho * np.log(rho / rho_hat) + (1 - rho) * np.log((1 - rho) / (1 - rho_hat))
    return total_squared / n + config.l2_coeff * 0.5 * float(np.sum(W ** 2)) + config.sparsity_coeff * kl


def test_satlin() -> None:
    np.testing.assert_array_equal(satlin(np.array([-2.0, 0.0, 0.3, 1.0, 4.0])), [0.0, 0.0, 0.3, 1.0, 1.0])
    np.testing.assert_array_equal(satlin_grad(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])), [0, 0, 1, 0, 0])


def test_encode_decode_shapes(small_config) -> None:
    params, X = interior_instance(0)
    assert encode(params, X[0]).shape == (small_config.hidden_dim,)
    assert encode_batch(params, X).shape == (5, small_config.hidden_dim)
    assert decode(params, encode(params, X[0])).shape == (8,)
    assert reconstruct(params, X).shape == X.shape
    np.testing.assert_allclose(encode_batch(params, X)[2], encode(params, X[2]), rtol=0, atol=1e-15)


def test_encode_rejects_wrong_dimension() -> None:
    params, _ = interior_instance(0)
    with pytest.raises(DimensionError):
        encode(params, np.ones(7))
    with pytest.raises(DimensionError):
        decode(params, np.ones(5))


def test_encode_hand_computed() -> None:
    params = AEParams(W=np.array([[1.0, 1.0]]), b1=np.array([-0.5]), b2=np.zeros(2))
    np.testing.assert_allclose(encode(params, [0.5, 0.5]), [0.5], rtol=0, atol=1e-15)

    saturated = AEParams(W=np.array([[3.0, 3.0]]), b1=np.zeros(1), b2=np.zeros(2))
    np.testing.assert_array_equal(encode(saturated, [0.5, 0.5]), [1.0])


def test_decode_hand_computed() -> None:
    params = AEParams(W=np.array([[0.5, 1.0]]), b1=np.zeros(1), b2=np.zeros(2))
    np.testing.assert_array_equal(decode(params, [1.0]), [0.5, 1.0])
    np.testing.assert_array_equal(decode(params, [0.0]), [0.0, 0.0])

    lifted = AEParams(W=np.array([[0.5, 1.0]]), b1=np.zeros(1), b2=np.full(2, 2.0))
    np.testing.assert_array_equal(decode(lifted, [0.3]), [1.0, 1.0])


def test_codes_stay_in_unit_range(rng) -> None:
    params = AEParams(W=rng.normal(scale=3.0, size=(4, 8)), b1=rng.normal(size=4), b2=rng.normal(size=8))
    codes = encode_batch(params, rng.normal(size=(20, 8)))
    assert codes.min() >= 0.0 and codes.max() <= 1.0


def test_kl_divergence() -> None:
    assert kl_divergence(0.05, 0.05) == pytest.approx(0.0, abs=1e-15)
    assert kl_divergence(0.05, 0.5) > 0
    assert np.isfinite(kl_divergence(0.05, 0.0))
    assert np.isfinite(kl_divergence(0.05, 1.0))
    # 0.5 ln 2 + 0.5 ln(0.5 / 0.75)
    assert kl_divergence(0.5, 0.25) == pytest.approx(0.143841, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_cost_matches_direct_summation(seed, small_config) -> None:
    params, X = interior_instance(seed)
    breakdown = cost(params, X, small_config)
    assert breakdown.total == pytest.approx(oracle_cost(params, X, small_config), rel=1e-12)
    assert breakdown.total == breakdown.mse + small_config.l2_coeff * breakdown.l2 + small_config.sparsity_coeff * breakdown.sparsity


def test_zero_coefficients_leave_only_reconstruction(rng) -> None:
    config = AEConfig(input_dim=8, hidden_dim=4, l2_coeff=0.0, sparsity_coeff=0.0)
    params, X = interior_instance(1)
    breakdown = cost(params, X, config)
    assert breakdown.total == breakdown.mse


@pytest.mark.parametrize("seed", range(10))
def test_cost_ignores_sample_order(seed, small_config) -> None:
    params, X = interior_instance(seed, n=12)
    shuffled = X[np.random.default_rng(seed).permutation(len(X))]
    assert cost(params, shuffled, small_config).total == pytest.approx(cost(params, X, small_config).total, rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_cost_without_sparsity_ignores_hidden_unit_labels(seed) -> None:
    config = AEConfig(input_dim=8, hidden_dim=4, l2_coeff=0.01, sparsity_coeff=0.0)
    rng = np.random.default_rng(seed)
    params = AEParams(W=rng.normal(scale=0.5, size=(4, 8)), b1=rng.normal(size=4), b2=rng.uniform(size=8))
    X = rng.uniform(size=(6, 8))
    order = rng.permutation(4)
    relabelled = AEParams(W=params.W[order], b1=params.b1[order], b2=params.b2)
    assert cost(relabelled, X, config).total == pytest.approx(cost(params, X, config).total, rel=1e-12)


def test_linear_region_gradient_matches_hand_derivation() -> None:
    # D_x=2, D=1, W=0: z = b1 and x_hat = b2, so dW = -(2/N) sum_n (x_n - b2) * b1
    config = AEConfig(input_dim=2, hidden_dim=1, l2_coeff=0.0, sparsity_coeff=0.0)
    params = AEParams(W=np.zeros((1, 2)), b1=np.array([0.5]), b2=np.array([0.3, 0.4]))
    X = np.array([[0.2, 0.6], [0.6, 0.8]])

    dW, db1, db2 = gradient(params, X, config)
    residual = X - params.b2
    np.testing.assert_allclose(dW, [-(2 / 2) * residual.sum(axis=0) * 0.5], rtol=0, atol=1e-12)
    np.testing.assert_allclose(dW, [[-0.1, -0.3]], rtol=0, atol=1e-12)
    np.testing.assert_allclose(db2, [-0.2, -0.6], rtol=0, atol=1e-12)
    np.testing.assert_array_equal(db1, [0.0])


def test_perfect_reconstruction_has_zero_mse() -> None:
    config = AEConfig(input_dim=2, hidden_dim=1, l2_coeff=0.0, sparsity_coeff=0.0)
    params = AEParams(W=np.zeros((1, 2)), b1=np.zeros(1), b2=np.array([0.25, 0.75]))
    breakdown = cost(params, np.array([[0.25, 0.75], [0.25, 0.75]]), config)
    assert breakdown.mse == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_central_differences(seed, small_config) -> None:
    params, X = interior_instance(seed)
    objective = FlatObjective(X, small_config)
    vector = flatten_params(params)

    analytic = objective.gradient(vector)
    h = 1e-6
    numeric = np.empty_like(vector)
    for index in range(vector.size):
        step = np.zeros_like(vector)
        step[index] = h
        numeric[index] = (objective.cost(vector + step) - objective.cost(vector - step)) / (2 * h)

    # entries below the rounding floor of the difference quotient compare absolutely
    relative = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-3)
    assert relative.max() < 1e-5


def test_gradient_blocks_match_flat_gradient(small_config) -> None:
    params, X = interior_instance(3)
    dW, db1, db2 = gradient(params, X, small_config)
    flat = FlatObjective(X, small_config).gradient(flatten_params(params))
    np.testing.assert_array_equal(flat, np.concatenate([dW.ravel(), db1, db2]))

    breakdown, (dW2, _, _) = cost_and_gradient(params, X, small_config)
    np.testing.assert_array_equal(dW, dW2)
    assert breakdown.total == cost(params, X, small_config).total


def test_saturated_units_have_no_gradient(small_config) -> None:
    params = AEParams(W=np.zeros((4, 8)), b1=np.full(4, 3.0), b2=np.full(8, -3.0))
    X = np.random.default_rng(0).uniform(size=(5, 8))
    config = AEConfig(input_dim=8, hidden_dim=4, l2_coeff=0.0, sparsity_coeff=0.0)
    dW, db1, db2 = gradient(params, X, config)
    assert not dW.any() and not db1.any() and not db2.any()


def test_cost_rejects_mismatched_dimensions(small_config) -> None:
    params, X = interior_instance(0)
    with pytest.raises(DimensionError):
        cost(params, X[:, :7], small_config)
    with pytest.raises(DimensionError):
        cost(params, X, AEConfig(input_dim=9, hidden_dim=4))


def test_overflowing_weights_raise_non_finite(small_config) -> None:
    _, X = interior_instance(0)
    params = AEParams(W=np.full((4, 8), 1e200), b1=np.zeros(4), b2=np.zeros(8))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteError):
            cost(params, X, small_config)


def test_config_requires_compression() -> None:
    with pytest.raises(ValidationError):
        AEConfig(input_dim=4, hidden_dim=4)
    with pytest.raises(ValidationError):
        AEConfig(input_dim=8, hidden_dim=4, sparsity_target=1.0)
    assert AESettings(hidden_dim=16).to_config(input_dim=64, seed=3).seed == 3


def test_flatten_and_unflatten(small_config) -> None:
    params, _ = interior_instance(2)
    vector = flatten_params(params)
    assert vector.shape == (params.size,)
    restored = unflatten_params(vector, 4, 8)
    np.testing.assert_array_equal(restored.W, params.W)
    np.testing.assert_array_equal(restored.b2, params.b2)
    with pytest.raises(DimensionError):
        unflatten_params(vector[:-1], 4, 8)


@pytest.mark.parametrize("suffix", [".npz", ".json"])
def test_params_persist_bit_exact(tmp_path, small_config, suffix) -> None:
    params, _ = interior_instance(4)
    loaded, config = load_params(save_params(params, tmp_path / f"params{suffix}", small_config))
    np.testing.assert_array_equal(loaded.W, params.W)
    np.testing.assert_array_equal(loaded.b1, params.b1)
    np.testing.assert_array_equal(loaded.b2, params.b2)
    assert config == small_config


def test_exact_fixed_point_has_zero_gradient() -> None:
    config = AEConfig(input_dim=3, hidden_dim=2, l2_coeff=0.0, sparsity_coeff=0.0)
    target = np.array([0.2, 0.5, 0.7])
    params = AEParams(W=np.zeros((2, 3)), b1=np.full(2, 0.5), b2=target)
    dW, db1, db2 = gradient(params, np.tile(target, (4, 1)), config)
    assert not dW.any() and not db1.any() and not db2.any()
