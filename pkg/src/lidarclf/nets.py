"""Minimal feed-forward network core with mini-batch gradient descent.

One backprop implementation serves both the reconstruction autoencoder
and the softmax classifier; they differ only in the loss attached to the
output layer. Training is single-threaded and fully determined by the
seed in TrainConfig.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDiverged

_ACTIVATIONS = {
    "linear": (lambda z: z, lambda z: np.ones_like(z)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(np.float64)),
}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 2000
    batch_size: int = 128
    seed: int = 0
    momentum: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_in, fan_out))


class FeedForwardNet:
    """Dense layers a_next = act(a @ W + b); last layer uses output_activation."""

    def __init__(self, dims, hidden_activation="tanh", output_activation="linear",
                 rng: np.random.Generator | None = None):
        if len(dims) < 2:
            raise ValueError("need at least an input and an output layer")
        for name in (hidden_activation, output_activation):
            if name not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")
        rng = rng or np.random.default_rng()
        self.dims = tuple(int(d) for d in dims)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.weights = [glorot_uniform(rng, a, b)
                        for a, b in zip(self.dims[:-1], self.dims[1:])]
        self.biases = [np.zeros(b) for b in self.dims[1:]]

    def _activation(self, layer: int):
        last = len(self.weights) - 1
        name = self.output_activation if layer == last else self.hidden_activation
        return _ACTIVATIONS[name]

    def forward(self, X: np.ndarray):
        """Returns (output, cache) where cache holds per-layer (input, preact)."""
        a = X
        cache = []
        for layer, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            cache.append((a, z))
            a = self._activation(layer)[0](z)
        return a, cache

    def predict(self, X: np.ndarray) -> np.ndarray:
        out, _ = self.forward(X)
        return out

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output). Returns
        ([dW...], [db...]) aligned with weights/biases."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = grad_out
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev, z = cache[layer]
            delta = delta * self._activation(layer)[1](z)
            grads_w[layer] = a_prev.T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer:
                delta = delta @ self.weights[layer].T
        return grads_w, grads_b

    def get_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def set_params(self, flat: np.ndarray) -> None:
        off = 0
        for coll in (self.weights, self.biases):
            for i, p in enumerate(coll):
                coll[i] = flat[off:off + p.size].reshape(p.shape).copy()
                off += p.size
        if off != flat.size:
            raise ValueError("parameter vector has the wrong length")


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean over all entries of the squared error, and its gradient."""
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, gradient wrt logits, probabilities).
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n, probs


def train_minibatch(net: FeedForwardNet, X: np.ndarray, target, loss_fn,
                    cfg: TrainConfig, rng: np.random.Generator,
                    grad_hook=None) -> np.ndarray:
    """SGD over shuffled mini-batches; returns the per-epoch loss log.

    ``loss_fn(output, batch_target) -> (loss, grad_wrt_output)``; the
    logged epoch loss is the sample-weighted mean of its batch losses.
    ``grad_hook(gw, gb)`` may rewrite the gradient lists in place before
    each update (used to couple tied weights).
    """
    n = X.shape[0]
    batch = min(cfg.batch_size, n)
    vel_w = [np.zeros_like(w) for w in net.weights]
    vel_b = [np.zeros_like(b) for b in net.biases]
    log = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch):
            sel = perm[lo:lo + batch]
            xb = X[sel]
            tb = target[sel]
            out, cache = net.forward(xb)
            loss, grad = loss_fn(out, tb)
            total += loss * sel.size
            gw, gb = net.backward(cache, grad)
            if grad_hook is not None:
                grad_hook(gw, gb)
            for i in range(len(net.weights)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * gw[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * gb[i]
                net.weights[i] += vel_w[i]
                net.biases[i] += vel_b[i]
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(
                f"loss became non-finite at epoch {epoch}; "
                f"try a learning rate below {cfg.learning_rate}")
        log[epoch] = epoch_loss
    return log
