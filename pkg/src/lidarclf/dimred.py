"""Dimension reduction: PCA and a five-hidden-layer autoencoder.

PCA is fitted by singular value decomposition of the centered data. The
autoencoder is a mirrored seven-dim stack (input, five hidden layers,
output) trained to reconstruct its input under mean squared error; its
innermost layer provides the reduced predictors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, PTooLarge
from .features import FeatureMatrix
from .nets import FeedForwardNet, TrainConfig, mse_loss, train_minibatch

__all__ = [
    "PcaModel", "AutoencoderModel", "TrainConfig",
    "pca_fit", "pca_transform", "pca_inverse_transform",
    "validate_ae_dims", "ae_train", "ae_encode", "ae_reconstruct",
]

_ENCODER_LAYERS = 3  # weights 0..2 map input to the innermost layer


def _as_array(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.data
    return np.asarray(X, dtype=np.float64)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # (p, d) orthonormal rows
    explained_variance: np.ndarray  # (p,) nonincreasing

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]

    def project(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.n_features:
            raise DimMismatch(f"model fitted on width {self.n_features}, "
                              f"got {X.shape[1]}")
        return (X - self.mean) @ self.components.T

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self.project(X) @ self.components + self.mean


def pca_fit(X, p: int) -> PcaModel:
    """Top-p principal directions of the centered data.

    Sign convention: the largest-magnitude entry of every component is
    positive. Trailing zero variances are fine; p beyond min(s-1, d) is
    an error.
    """
    data = _as_array(X)
    s, d = data.shape
    if not 1 <= p <= min(s - 1, d):
        raise PTooLarge(f"p={p} outside [1, min(s-1={s - 1}, d={d})]")
    mean = data.mean(axis=0)
    _, sigma, vt = np.linalg.svd(data - mean, full_matrices=False)
    components = vt[:p]
    flip = components[np.arange(p), np.argmax(np.abs(components), axis=1)] < 0
    components = np.where(flip[:, None], -components, components)
    return PcaModel(mean=mean, components=components,
                    explained_variance=sigma[:p] ** 2 / (s - 1))


def pca_transform(model: PcaModel, fm: FeatureMatrix) -> FeatureMatrix:
    """Project onto the principal subspace; labels carried through."""
    proj = model.project(fm.data)
    names = [f"pc{i}" for i in range(model.n_components)]
    return fm.with_data(proj, feature_names=names)


def pca_inverse_transform(model: PcaModel, fm: FeatureMatrix) -> FeatureMatrix:
    if fm.n_features != model.n_components:
        raise DimMismatch(f"expected width {model.n_components}, got {fm.n_features}")
    data = fm.data @ model.components + model.mean
    return fm.with_data(data, feature_names=[f"f{i}" for i in range(model.n_features)])


def validate_ae_dims(dims) -> tuple[int, ...]:
    """Mirror checks: seven entries, d6=d0, d5=d1, d4=d2."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 7:
        raise ValueError(f"need 7 layer dims (input, 5 hidden, output), got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValueError("layer dims must be positive")
    if dims[6] != dims[0] or dims[5] != dims[1] or dims[4] != dims[2]:
        raise ValueError(f"dims {dims} break the mirror constraint "
                         "(d6=d0, d5=d1, d4=d2)")
    return dims


@dataclass
class AutoencoderModel:
    """Trained reconstruction network; encoder is the first three layers."""

    layer_dims: tuple[int, ...]
    net: FeedForwardNet
    config: TrainConfig
    loss_log: np.ndarray = field(repr=False, default=None)
    tied: bool = False

    @property
    def weights(self) -> list[np.ndarray]:
        return self.net.weights

    @property
    def biases(self) -> list[np.ndarray]:
        return self.net.biases

    @property
    def hidden_activation(self) -> str:
        return self.net.hidden_activation

    @property
    def output_activation(self) -> str:
        return self.net.output_activation

    @property
    def inner_dim(self) -> int:
        return self.layer_dims[_ENCODER_LAYERS]

    @property
    def final_loss(self) -> float:
        return float(self.loss_log[-1])

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.layer_dims[0]:
            raise DimMismatch(f"model input width is {self.layer_dims[0]}, "
                              f"got {X.shape[1]}")
        return X

    def encode_array(self, X: np.ndarray) -> np.ndarray:
        a = self._check_width(X)
        act = self.net._activation
        for layer in range(_ENCODER_LAYERS):
            a = act(layer)[0](a @ self.net.weights[layer] + self.net.biases[layer])
        return a

    def reconstruct_array(self, X: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(self._check_width(X))
        return out


def _tie_gradients(gw, gb):
    # Pairs (0,5), (1,4), (2,3) share one parameter matrix and its transpose;
    # writing the summed gradient to both keeps W_dec == W_enc.T exactly.
    n = len(gw)
    for i in range(n // 2):
        j = n - 1 - i
        merged = gw[i] + gw[j].T
        gw[i] = merged
        gw[j] = merged.T


def ae_train(X, dims, cfg: TrainConfig, hidden_activation: str = "tanh",
             output_activation: str = "linear", tied: bool = False) -> AutoencoderModel:
    """Fit the autoencoder by seeded mini-batch gradient descent.

    Raises TrainingDiverged with learning-rate advice if the loss leaves
    the finite range.
    """
    data = _as_array(X)
    dims = validate_ae_dims(dims)
    if data.shape[1] != dims[0]:
        raise DimMismatch(f"data width {data.shape[1]} != input dim {dims[0]}")
    rng = np.random.default_rng(cfg.seed)
    net = FeedForwardNet(dims, hidden_activation=hidden_activation,
                         output_activation=output_activation, rng=rng)
    if tied:
        for i in range(len(net.weights) // 2):
            net.weights[len(net.weights) - 1 - i] = net.weights[i].T.copy()
    log = train_minibatch(net, data, data, mse_loss, cfg, rng,
                          grad_hook=_tie_gradients if tied else None)
    return AutoencoderModel(layer_dims=dims, net=net, config=cfg,
                            loss_log=log, tied=tied)


def ae_encode(model: AutoencoderModel, fm: FeatureMatrix) -> FeatureMatrix:
    """Innermost-layer representation; labels carried through."""
    enc = model.encode_array(fm.data)
    names = [f"enc{i}" for i in range(model.inner_dim)]
    return fm.with_data(enc, feature_names=names)


def ae_reconstruct(model: AutoencoderModel, fm: FeatureMatrix) -> FeatureMatrix:
    out = model.reconstruct_array(fm.data)
    return fm.with_data(out)
