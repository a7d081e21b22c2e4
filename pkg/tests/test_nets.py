import numpy as np
import pytest

from lidarclf.errors import TrainingDiverged
from lidarclf.nets import (FeedForwardNet, TrainConfig, mse_loss,
                           softmax_cross_entropy, train_minibatch)


def numeric_gradient(f, params, eps=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.empty_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] += eps
        hi = f(bumped)
        bumped[i] -= 2 * eps
        lo = f(bumped)
        grad[i] = (hi - lo) / (2 * eps)
    return grad


def analytic_gradient(net, X, loss_fn):
    out, cache = net.forward(X)
    _, grad = loss_fn(out)
    gw, gb = net.backward(cache, grad)
    return np.concatenate([g.ravel() for g in gw + gb])


def relative_errors(analytic, numeric):
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return np.abs(analytic - numeric) / scale


class TestGradients:
    def test_mse_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(5, 4))
        net = FeedForwardNet((4, 3, 2, 2, 2, 3, 4), hidden_activation="tanh",
                             output_activation="linear", rng=rng)

        def scalar(params):
            net.set_params(params)
            out, _ = net.forward(X)
            return mse_loss(out, X)[0]

        params = net.get_params()
        numeric = numeric_gradient(scalar, params)
        net.set_params(params)
        analytic = analytic_gradient(net, X, lambda out: mse_loss(out, X))
        errs = relative_errors(analytic, numeric)
        assert errs.max() < 1e-4, f"worst {errs.max():.2e}"

    def test_cross_entropy_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(43)
        X = rng.normal(size=(4, 3))
        y = np.array([0, 2, 1, 2])
        net = FeedForwardNet((3, 5, 4, 3), hidden_activation="relu",
                             output_activation="linear", rng=rng)

        def loss_fn(out):
            loss, grad, _ = softmax_cross_entropy(out, y)
            return loss, grad

        def scalar(params):
            net.set_params(params)
            out, _ = net.forward(X)
            return softmax_cross_entropy(out, y)[0]

        params = net.get_params()
        numeric = numeric_gradient(scalar, params)
        net.set_params(params)
        analytic = analytic_gradient(net, X, loss_fn)
        errs = relative_errors(analytic, numeric)
        assert errs.max() < 1e-4, f"worst {errs.max():.2e}"

    def test_tanh_output_gradient(self):
        rng = np.random.default_rng(44)
        X = rng.normal(size=(3, 2))
        T = rng.normal(size=(3, 2))
        net = FeedForwardNet((2, 4, 2), hidden_activation="tanh",
                             output_activation="tanh", rng=rng)

        def scalar(params):
            net.set_params(params)
            return mse_loss(net.forward(X)[0], T)[0]

        params = net.get_params()
        numeric = numeric_gradient(scalar, params)
        net.set_params(params)
        analytic = analytic_gradient(net, X, lambda out: mse_loss(out, T))
        assert relative_errors(analytic, numeric).max() < 1e-4


class TestLosses:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(scale=5.0, size=(50, 6))
        _, _, probs = softmax_cross_entropy(logits, rng.integers(0, 6, 50))
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_mse_zero_on_perfect(self):
        X = np.ones((3, 2))
        loss, grad = mse_loss(X, X)
        assert loss == 0.0
        assert np.all(grad == 0.0)


class TestTraining:
    def test_deterministic_logs(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 4))
        cfg = TrainConfig(learning_rate=0.05, epochs=40, batch_size=16, seed=9)
        logs = []
        for _ in range(2):
            r = np.random.default_rng(cfg.seed)
            net = FeedForwardNet((4, 3, 4), rng=r)
            logs.append(train_minibatch(net, X, X, mse_loss, cfg, r))
        assert np.array_equal(logs[0], logs[1])

    def test_loss_decreases(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(80, 3))
        cfg = TrainConfig(learning_rate=0.05, epochs=300, batch_size=20, seed=0)
        r = np.random.default_rng(cfg.seed)
        net = FeedForwardNet((3, 3, 3), rng=r)
        log = train_minibatch(net, X, X, mse_loss, cfg, r)
        assert log[-1] < log[0]

    @pytest.mark.filterwarnings("ignore:overflow")
    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_divergence_raises_with_advice(self):
        rng = np.random.default_rng(7)
        X = rng.normal(scale=10.0, size=(40, 3))
        cfg = TrainConfig(learning_rate=1e6, epochs=50, batch_size=40, seed=0)
        r = np.random.default_rng(cfg.seed)
        net = FeedForwardNet((3, 4, 3), hidden_activation="relu", rng=r)
        with pytest.raises(TrainingDiverged, match="learning rate"):
            train_minibatch(net, X, X, mse_loss, cfg, r)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
