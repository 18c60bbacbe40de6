import numpy as np
import pytest

from vulnscan.nn import (Adam, EmptyDataset, NonFiniteLoss, TrainingConfig,
                         clip_global_norm, init_model, train)


def tiny_config(**kw):
    defaults = dict(input_layer_units=6, hidden_layers=1, hidden_units=5,
                    epochs=5, batch_size=4, seed=2)
    defaults.update(kw)
    return TrainingConfig(**defaults)


def separable_dataset(dim=6, n=12, steps=5, seed=0):
    """Positives carry a strong constant direction; negatives its negation."""
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        label = i % 2
        base = np.ones(dim) if label else -np.ones(dim)
        window = (rng.normal(scale=0.1, size=(steps, dim)) + base
                  ).astype(np.float32)
        data.append((window, label))
    return data


def test_adam_single_step_matches_closed_form():
    lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8
    params = {"w": np.array([0.5], dtype=np.float64)}
    opt = Adam(params, learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps)
    g = 0.3
    opt.step(params, {"w": np.array([g])})
    # bias-corrected first step: m_hat = g, v_hat = g^2
    expected = 0.5 - lr * g / (np.sqrt(g * g) + eps)
    assert params["w"][0] == pytest.approx(expected, rel=1e-12)


def test_adam_second_step_hand_computed():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    params = {"w": np.array([1.0], dtype=np.float64)}
    opt = Adam(params, learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps)
    g1, g2 = 0.2, -0.4
    w1 = 1.0 - lr * g1 / (np.sqrt(g1 ** 2) + eps)
    opt.step(params, {"w": np.array([g1])})
    assert params["w"][0] == pytest.approx(w1, rel=1e-12)
    m2 = b1 * (1 - b1) * g1 + (1 - b1) * g2
    v2 = b2 * (1 - b2) * g1 ** 2 + (1 - b2) * g2 ** 2
    m_hat = m2 / (1 - b1 ** 2)
    v_hat = v2 / (1 - b2 ** 2)
    w2 = w1 - lr * m_hat / (np.sqrt(v_hat) + eps)
    opt.step(params, {"w": np.array([g2])})
    assert params["w"][0] == pytest.approx(w2, rel=1e-12)


def test_adam_rejects_bad_hyperparameters():
    params = {"w": np.zeros(1)}
    with pytest.raises(ValueError):
        Adam(params, beta1=1.0)
    with pytest.raises(ValueError):
        Adam(params, epsilon=0.0)


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([0.0, 4.0])}
    total = clip_global_norm(grads, 1.0)
    assert total == pytest.approx(5.0)
    clipped = np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values()))
    assert clipped == pytest.approx(1.0)
    grads2 = {"a": np.array([0.3])}
    clip_global_norm(grads2, 1.0)
    assert grads2["a"][0] == pytest.approx(0.3)  # under the cap: untouched


def test_zero_learning_rate_changes_nothing():
    # dropout off: otherwise per-epoch masks alone would wiggle the curve
    config = tiny_config(learning_rate=0.0, dropout_rate=0.0)
    model = init_model(config)
    before = {k: v.copy() for k, v in model.params.items()}
    trained, losses = train(model, separable_dataset(), config)
    assert all(np.array_equal(before[k], trained.params[k]) for k in before)
    assert all(loss == pytest.approx(losses[0]) for loss in losses)


def test_training_reduces_loss_and_is_deterministic():
    config = tiny_config(epochs=8)
    model = init_model(config)
    trained_a, losses_a = train(model, separable_dataset(), config)
    trained_b, losses_b = train(model, separable_dataset(), config)
    assert losses_a[-1] < losses_a[0]
    assert losses_a == losses_b
    assert all(np.array_equal(trained_a.params[k], trained_b.params[k])
               for k in trained_a.params)


def test_train_does_not_mutate_input_model():
    config = tiny_config(epochs=2)
    model = init_model(config)
    before = {k: v.copy() for k, v in model.params.items()}
    train(model, separable_dataset(), config)
    assert all(np.array_equal(before[k], model.params[k]) for k in before)


def test_empty_dataset_rejected():
    config = tiny_config()
    with pytest.raises(EmptyDataset):
        train(init_model(config), [], config)


def test_bad_labels_rejected():
    config = tiny_config()
    window = np.zeros((3, 6), dtype=np.float32)
    with pytest.raises(ValueError):
        train(init_model(config), [(window, 2)], config)


def test_nonfinite_loss_detected():
    config = tiny_config(epochs=1)
    model = init_model(config)
    model.params["head.W"][:] = np.nan
    with pytest.raises(NonFiniteLoss):
        train(model, separable_dataset(), config)


def test_variable_length_windows_train():
    config = tiny_config(epochs=3)
    rng = np.random.default_rng(1)
    data = [(rng.normal(size=(steps, 6)).astype(np.float32), steps % 2)
            for steps in (2, 3, 3, 4, 5, 2)]
    trained, losses = train(init_model(config), data, config)
    assert len(losses) == 3
    assert np.isfinite(losses).all()
