import math

import numpy as np
import pytest

from gradmesh.core.exceptions import ConfigurationError, ContractError
from gradmesh.services.sgd.data import generate_synthetic_dataset
from gradmesh.services.sgd.engine import (
    GradientVector,
    Minibatch,
    ModelParams,
    accuracy,
    apply_update,
    compute_gradient,
    compute_loss,
    finite_diff_gradient,
    init_model,
)
from gradmesh.utils.numeric import relative_error


def _random_case(rng, classes=None, features=None, batch=None, scale=1.0):
    classes = classes or int(rng.integers(2, 5))
    features = features or int(rng.integers(1, 5))
    size = batch or int(rng.integers(1, 9))
    params = ModelParams.from_flat(rng.normal(scale=scale, size=classes * (features + 1)), (classes, features))
    examples = rng.normal(size=(size, features))
    labels = rng.integers(0, classes, size=size)
    return params, Minibatch(examples=examples, labels=labels)


def test_init_model_shapes_and_determinism():
    params = init_model(10, 32, seed=7)
    assert params.weights.shape == (10, 32)
    assert params.bias.shape == (10,)
    assert params.size == 330
    assert params.equals(init_model(10, 32, seed=7))
    assert not params.equals(init_model(10, 32, seed=8))


def test_init_model_rejects_bad_dims():
    with pytest.raises(ConfigurationError):
        init_model(1, 4, seed=0)
    with pytest.raises(ConfigurationError):
        init_model(3, 0, seed=0)


def test_loss_of_zero_model_is_log_classes():
    for classes in (2, 10):
        params = ModelParams(weights=np.zeros((classes, 3)), bias=np.zeros(classes))
        batch = Minibatch(examples=np.ones((4, 3)), labels=np.arange(4) % classes)
        assert compute_loss(params, batch) == pytest.approx(math.log(classes), abs=1e-12)


def test_loss_matches_per_example_cross_entropy(rng):
    params, batch = _random_case(rng, classes=3, features=2, batch=5)
    expected = []
    for x, y in zip(batch.examples, batch.labels):
        logits = params.weights @ x + params.bias
        expected.append(-logits[y] + math.log(sum(math.exp(v) for v in logits)))
    assert compute_loss(params, batch) == pytest.approx(sum(expected) / len(expected), rel=1e-12)


def test_gradient_layout_weights_then_bias(rng):
    params, batch = _random_case(rng, classes=3, features=4, batch=6)
    grad = compute_gradient(params, batch)
    assert len(grad) == 3 * 4 + 3
    assert grad.dims == (3, 4)


def test_zero_features_give_zero_weight_gradient():
    params = ModelParams(weights=np.zeros((2, 3)), bias=np.zeros(2))
    batch = Minibatch(examples=np.zeros((2, 3)), labels=np.array([0, 1]))
    grad = compute_gradient(params, batch)
    np.testing.assert_array_equal(grad.values[:6], np.zeros(6))
    assert np.abs(finite_diff_gradient(params, batch).values - grad.values).max() < 1e-8


def test_gradient_agrees_with_finite_differences(rng):
    for _ in range(200):
        params, batch = _random_case(rng)
        analytic = compute_gradient(params, batch)
        numeric = finite_diff_gradient(params, batch)
        assert relative_error(analytic.values, numeric.values) < 1e-6


def test_finite_difference_error_is_second_order_in_eps(rng):
    params, batch = _random_case(rng, classes=3, features=3, batch=4)
    analytic = compute_gradient(params, batch).values
    coarse = np.linalg.norm(finite_diff_gradient(params, batch, eps=1e-2).values - analytic)
    fine = np.linalg.norm(finite_diff_gradient(params, batch, eps=5e-3).values - analytic)
    # central differences: halving eps cuts the truncation error about fourfold
    assert 3.0 < coarse / fine < 5.0


def test_gradient_of_concatenated_batch_is_size_weighted_mean(rng):
    for _ in range(100):
        params, first = _random_case(rng, classes=3, features=2)
        _, second = _random_case(rng, classes=3, features=2)
        combined = compute_gradient(params, first.concat(second)).values
        weighted = (
            first.size * compute_gradient(params, first).values + second.size * compute_gradient(params, second).values
        ) / (first.size + second.size)
        np.testing.assert_allclose(combined, weighted, rtol=0, atol=1e-12)


def test_apply_update_examples():
    params = ModelParams(weights=np.array([[1.0], [2.0]]), bias=np.array([0.5, -0.5]))
    grad = GradientVector(values=np.array([0.5, 1.0, 1.0, -1.0]), dims=(2, 1))
    updated = apply_update(params, grad, lr=0.1)
    np.testing.assert_allclose(updated.flat(), [0.95, 1.9, 0.4, -0.4], rtol=0, atol=1e-15)
    assert apply_update(params, GradientVector.zeros((2, 1)), lr=0.1).equals(params)


def test_apply_update_rejects_bad_inputs():
    params = init_model(2, 1, seed=0)
    with pytest.raises(ConfigurationError):
        apply_update(params, GradientVector.zeros((2, 1)), lr=0.0)
    with pytest.raises(ContractError):
        apply_update(params, GradientVector.zeros((3, 1)), lr=0.1)


def test_gradient_rejects_mismatched_batch(rng):
    params = init_model(3, 4, seed=0)
    with pytest.raises(ContractError):
        compute_gradient(params, Minibatch(examples=np.zeros((2, 5)), labels=np.array([0, 1])))
    with pytest.raises(ContractError):
        compute_gradient(params, Minibatch(examples=np.zeros((2, 4)), labels=np.array([0, 3])))


def test_small_step_decreases_loss(rng):
    for _ in range(20):
        params, batch = _random_case(rng)
        grad = compute_gradient(params, batch)
        if grad.norm() == 0:
            continue
        assert compute_loss(apply_update(params, grad, lr=1e-3), batch) < compute_loss(params, batch)


def test_full_batch_training_fits_separated_clusters():
    ds = generate_synthetic_dataset(100, classes=2, features=2, separation=10.0, seed=3)
    params = init_model(2, 2, seed=3)
    full = ds.full_batch()
    for _ in range(500):
        params = apply_update(params, compute_gradient(params, full), lr=0.5)
    assert accuracy(params, full) > 0.99
