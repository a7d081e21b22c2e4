"""Model persistence: one versioned little-endian binary per model plus a
JSON sidecar summarizing dims and hyperparameters.

Layout: magic, 8-byte kind tag, length-prefixed JSON metadata, then the
arrays named by the metadata manifest in order (dtype code, shape,
row-major bytes). The sidecar at <path>.json repeats the metadata for
humans; the binary is authoritative.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .classifiers import (DecisionTree, KnnClassifier, MlpClassifier,
                          RandomForest, RfEnsemble)
from .dimred import AutoencoderModel, PcaModel
from .nets import FeedForwardNet, TrainConfig

_MAGIC = b"LCMDL001"
_DTYPES = {0: "<f8", 1: "<i8", 2: "u1"}
_DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("int64"): 1, np.dtype("uint8"): 2}


def _write_array(parts: list[bytes], arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    code = _DTYPE_CODES[arr.dtype]
    parts.append(struct.pack("<BB", code, arr.ndim))
    parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    parts.append(arr.astype(_DTYPES[code], copy=False).tobytes())


def _read_array(buf: bytes, off: int):
    code, ndim = struct.unpack_from("<BB", buf, off)
    off += 2
    shape = struct.unpack_from(f"<{ndim}Q", buf, off)
    off += 8 * ndim
    dtype = np.dtype(_DTYPES[code])
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(buf, dtype, count, off).reshape(shape).copy()
    return arr, off + count * dtype.itemsize


def _pack(kind: str, meta: dict, arrays: list[np.ndarray]) -> bytes:
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    parts = [_MAGIC, kind.encode().ljust(8, b"\0"),
             struct.pack("<Q", len(meta_bytes)), meta_bytes,
             struct.pack("<Q", len(arrays))]
    for arr in arrays:
        _write_array(parts, arr)
    return b"".join(parts)


def _unpack(buf: bytes):
    if buf[:8] != _MAGIC:
        raise ValueError("not a lidarclf model blob")
    kind = buf[8:16].rstrip(b"\0").decode()
    (mlen,) = struct.unpack_from("<Q", buf, 16)
    meta = json.loads(buf[24:24 + mlen])
    off = 24 + mlen
    (n_arrays,) = struct.unpack_from("<Q", buf, off)
    off += 8
    arrays = []
    for _ in range(n_arrays):
        arr, off = _read_array(buf, off)
        arrays.append(arr)
    return kind, meta, arrays


def _seed_meta(seed):
    return list(seed) if isinstance(seed, (tuple, list)) else seed


def _seed_load(value):
    return tuple(value) if isinstance(value, list) else value


def _config_meta(cfg: TrainConfig) -> dict:
    return {"learning_rate": cfg.learning_rate, "epochs": cfg.epochs,
            "batch_size": cfg.batch_size, "seed": cfg.seed,
            "momentum": cfg.momentum}


def _tree_arrays(tree: DecisionTree) -> list[np.ndarray]:
    return [
        np.asarray(tree._feature, dtype=np.int64),
        np.asarray(tree._threshold, dtype=np.float64),
        np.asarray(tree._left, dtype=np.int64),
        np.asarray(tree._right, dtype=np.int64),
        np.stack([np.asarray(h, dtype=np.int64) for h in tree._hist]),
    ]


def _tree_restore(meta: dict, arrays: list[np.ndarray]) -> DecisionTree:
    tree = DecisionTree(max_depth=meta["max_depth"],
                        feature_subsample=meta["feature_subsample"])
    feature, threshold, left, right, hist = arrays
    tree.n_classes = meta["n_classes"]
    tree._feature = feature.tolist()
    tree._threshold = threshold.tolist()
    tree._left = left.tolist()
    tree._right = right.tolist()
    tree._hist = [row for row in hist]
    return tree


def _encode(model) -> bytes:
    if isinstance(model, PcaModel):
        meta = {"n_components": model.n_components,
                "n_features": model.n_features,
                "arrays": ["mean", "components", "explained_variance"]}
        return _pack("pca", meta, [model.mean, model.components,
                                   model.explained_variance])

    if isinstance(model, AutoencoderModel):
        meta = {"layer_dims": list(model.layer_dims),
                "hidden_activation": model.hidden_activation,
                "output_activation": model.output_activation,
                "tied": model.tied,
                "config": _config_meta(model.config),
                "final_loss": model.final_loss}
        arrays = list(model.weights) + list(model.biases) + [model.loss_log]
        return _pack("autoenc", meta, arrays)

    if isinstance(model, KnnClassifier):
        meta = {"k_vote": model.k_vote, "n_classes": model.n_classes,
                "arrays": ["train_data", "train_labels"]}
        return _pack("knn", meta, [model._X, model._y])

    if isinstance(model, RandomForest):
        meta = {"n_trees": model.n_trees, "max_depth": model.max_depth,
                "seed": _seed_meta(model.seed), "bootstrap": model.bootstrap,
                "feature_subsample": model.feature_subsample,
                "n_classes": model.n_classes}
        arrays = []
        for tree in model.trees:
            arrays.extend(_tree_arrays(tree))
        return _pack("rf", meta, arrays)

    if isinstance(model, RfEnsemble):
        meta = {"n_forests": model.n_forests,
                "trees_per_forest": model.trees_per_forest,
                "max_depth": model.max_depth, "seed": _seed_meta(model.seed),
                "n_classes": model.n_classes}
        blobs = [np.frombuffer(_encode(f), dtype=np.uint8)
                 for f in model.forests]
        return _pack("rfens", meta, blobs)

    if isinstance(model, MlpClassifier):
        meta = {"hidden": list(model.hidden),
                "hidden_activation": model.hidden_activation,
                "config": _config_meta(model.config),
                "n_classes": model.n_classes,
                "dims": list(model.net.dims)}
        arrays = list(model.net.weights) + list(model.net.biases) + [model.loss_log]
        return _pack("mlp", meta, arrays)

    raise TypeError(f"cannot serialize {type(model).__name__}")


def _restore_net(dims, hidden_activation, output_activation, weights, biases):
    net = FeedForwardNet(dims, hidden_activation=hidden_activation,
                         output_activation=output_activation,
                         rng=np.random.default_rng(0))
    net.weights = [np.asarray(w, dtype=np.float64) for w in weights]
    net.biases = [np.asarray(b, dtype=np.float64) for b in biases]
    return net


def _decode(buf: bytes):
    kind, meta, arrays = _unpack(buf)

    if kind == "pca":
        mean, components, explained = arrays
        return PcaModel(mean=mean, components=components,
                        explained_variance=explained)

    if kind == "autoenc":
        dims = tuple(meta["layer_dims"])
        n_layers = len(dims) - 1
        net = _restore_net(dims, meta["hidden_activation"],
                           meta["output_activation"],
                           arrays[:n_layers], arrays[n_layers:2 * n_layers])
        return AutoencoderModel(layer_dims=dims, net=net,
                                config=TrainConfig(**meta["config"]),
                                loss_log=arrays[-1], tied=meta["tied"])

    if kind == "knn":
        model = KnnClassifier(k_vote=meta["k_vote"])
        model._X, model._y = arrays
        model.n_classes = meta["n_classes"]
        return model

    if kind == "rf":
        model = RandomForest(n_trees=meta["n_trees"],
                             max_depth=meta["max_depth"],
                             seed=_seed_load(meta["seed"]),
                             bootstrap=meta["bootstrap"],
                             feature_subsample=meta["feature_subsample"])
        model.n_classes = meta["n_classes"]
        tree_meta = {"max_depth": meta["max_depth"],
                     "feature_subsample": meta["feature_subsample"],
                     "n_classes": meta["n_classes"]}
        model.trees = [_tree_restore(tree_meta, arrays[i:i + 5])
                       for i in range(0, len(arrays), 5)]
        return model

    if kind == "rfens":
        model = RfEnsemble(n_forests=meta["n_forests"],
                           trees_per_forest=meta["trees_per_forest"],
                           max_depth=meta["max_depth"],
                           seed=_seed_load(meta["seed"]))
        model.n_classes = meta["n_classes"]
        model.forests = [_decode(blob.tobytes()) for blob in arrays]
        return model

    if kind == "mlp":
        cfg = meta["config"]
        model = MlpClassifier(hidden=tuple(meta["hidden"]),
                              learning_rate=cfg["learning_rate"],
                              epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                              seed=cfg["seed"], momentum=cfg["momentum"],
                              hidden_activation=meta["hidden_activation"])
        dims = tuple(meta["dims"])
        n_layers = len(dims) - 1
        model.net = _restore_net(dims, meta["hidden_activation"], "linear",
                                 arrays[:n_layers], arrays[n_layers:2 * n_layers])
        model.loss_log = arrays[-1]
        model.n_classes = meta["n_classes"]
        return model

    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> Path:
    """Write the binary blob and its JSON sidecar; returns the blob path."""
    path = Path(path)
    blob = _encode(model)
    path.write_bytes(blob)
    kind, meta, _ = _unpack(blob)
    sidecar = {"kind": kind, **{k: v for k, v in meta.items() if k != "arrays"}}
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def load_model(path):
    return _decode(Path(path).read_bytes())


def inspect_model(path) -> dict:
    """Kind plus dims/hyperparameters, parsed from the binary itself."""
    kind, meta, _ = _unpack(Path(path).read_bytes())
    return {"kind": kind, **{k: v for k, v in meta.items() if k != "arrays"}}
