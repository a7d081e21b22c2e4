"""Feature matrices, neighbor-matrix assembly, and preprocessing.

The base representation is a dense examples-by-features matrix with an
aligned label vector. Context features are added by concatenating, for
every example, the full feature rows of its k spatially nearest
neighbors (found on the raw x, y, z columns), giving a matrix of width
(k+1)*N whose first block is the example's own features. Preprocessing
is two ordered steps: per-column standardization, then scaling each row
to unit Euclidean norm.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, KTooLarge
from .kdtree import KdTree
from .las_io import PointCloud

BASE_FEATURES = ("x", "y", "z", "intensity", "scan_angle",
                 "num_returns", "return_number")

_BLOB_MAGIC = b"LCFM0001"


@dataclass
class FeatureMatrix:
    """s x d data with dense labels 0..C-1 and the code->label mapping."""

    data: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    class_map: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 2:
            raise ValueError("data must be 2-d")
        if self.data.shape[0] != self.labels.shape[0]:
            raise ValueError("labels length must match the number of rows")
        if not self.feature_names:
            self.feature_names = [f"f{i}" for i in range(self.data.shape[1])]
        if not np.isfinite(self.data).all():
            raise ValueError("feature matrix contains NaN or Inf entries")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_map) if self.class_map else int(self.labels.max()) + 1

    def with_data(self, data: np.ndarray, feature_names=None) -> "FeatureMatrix":
        return FeatureMatrix(data, self.labels.copy(),
                             list(feature_names or self.feature_names),
                             dict(self.class_map))

    def to_csv(self, path) -> None:
        table = np.column_stack([self.data, self.labels.astype(np.float64)])
        header = ",".join(list(self.feature_names) + ["label"])
        np.savetxt(path, table, delimiter=",", header=header, comments="",
                   fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            names = [c.strip() for c in fh.readline().split(",")]
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        if names[-1] != "label":
            raise ValueError("last CSV column must be 'label'")
        return cls(table[:, :-1], table[:, -1].astype(np.int64), names[:-1])

    def to_blob(self) -> bytes:
        """Little-endian cache blob: magic, dims, doubles, labels, JSON tail."""
        s, d = self.data.shape
        meta = json.dumps({"feature_names": self.feature_names,
                           "class_map": {str(k): v for k, v in self.class_map.items()}},
                          sort_keys=True).encode()
        parts = [
            _BLOB_MAGIC,
            struct.pack("<QQ", s, d),
            np.ascontiguousarray(self.data, "<f8").tobytes(),
            np.ascontiguousarray(self.labels, "<i8").tobytes(),
            struct.pack("<Q", len(meta)), meta,
        ]
        return b"".join(parts)

    @classmethod
    def from_blob(cls, blob: bytes) -> "FeatureMatrix":
        if blob[:8] != _BLOB_MAGIC:
            raise ValueError("not a feature-matrix blob")
        s, d = struct.unpack_from("<QQ", blob, 8)
        off = 24
        data = np.frombuffer(blob, "<f8", s * d, off).reshape(s, d).copy()
        off += 8 * s * d
        labels = np.frombuffer(blob, "<i8", s, off).copy()
        off += 8 * s
        (mlen,) = struct.unpack_from("<Q", blob, off)
        meta = json.loads(blob[off + 8:off + 8 + mlen])
        class_map = {int(k): v for k, v in meta["class_map"].items()}
        return cls(data, labels, meta["feature_names"], class_map)


@dataclass
class NeighborMatrix(FeatureMatrix):
    """FeatureMatrix of width (k+1)*base_dim; block j holds neighbor j."""

    k: int = 0
    base_dim: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.k and self.base_dim:
            if self.n_features != (self.k + 1) * self.base_dim:
                raise ValueError("width must be (k+1) * base feature count")


@dataclass(frozen=True)
class StandardizeStats:
    """Per-column mean and standard deviation (population, divisor n)."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # bool mask of zero-variance columns (std forced to 1)


def to_feature_matrix(cloud: PointCloud) -> FeatureMatrix:
    """Seven-attribute matrix with labels densely remapped by ascending code."""
    if len(cloud) == 0:
        raise EmptyCloud("cannot build features from an empty cloud")
    data = np.column_stack([
        cloud.x, cloud.y, cloud.z, cloud.intensity, cloud.scan_angle,
        cloud.num_returns.astype(np.float64),
        cloud.return_number.astype(np.float64),
    ])
    codes = np.unique(cloud.class_code)
    class_map = {int(c): i for i, c in enumerate(codes)}
    labels = np.searchsorted(codes, cloud.class_code)
    return FeatureMatrix(data, labels, list(BASE_FEATURES), class_map)


def build_spatial_index(fm: FeatureMatrix) -> KdTree:
    """kd-tree over the raw x, y, z columns (the first three)."""
    return KdTree(fm.data[:, :3])


def knn_indices(tree: KdTree, i: int, k: int) -> np.ndarray:
    """Indices of the k nearest points to stored point i, self excluded.

    Sorted by distance; equal distances resolve to the lower index.
    """
    return tree.query_index(i, k)


def assemble_neighbor_matrix(fm: FeatureMatrix, k: int,
                             tree: KdTree | None = None) -> NeighborMatrix:
    """Concatenate each row with the full feature rows of its k nearest
    spatial neighbors; labels stay those of the center example."""
    s, n_base = fm.data.shape
    if k >= s:
        raise KTooLarge(f"k={k} with only {s} examples")
    if tree is None:
        tree = build_spatial_index(fm)
    nbr = tree.query_all(k)

    blocks = [fm.data] + [fm.data[nbr[:, j]] for j in range(k)]
    names = list(fm.feature_names)
    for j in range(1, k + 1):
        names.extend(f"{name}_nn{j}" for name in fm.feature_names)
    return NeighborMatrix(np.hstack(blocks), fm.labels.copy(), names,
                          dict(fm.class_map), k=k, base_dim=n_base)


def _unwrap(data):
    if isinstance(data, FeatureMatrix):
        return data.data, data
    return np.asarray(data, dtype=np.float64), None


def standardize_fit(data) -> StandardizeStats:
    """Column means and population stds; zero-variance columns flagged
    and given std 1 so they pass through after centering.

    Accepts a FeatureMatrix or a plain (s, d) array.
    """
    X, _ = _unwrap(data)
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std == 0.0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} zero-variance feature(s); "
                      "passing them through after centering", RuntimeWarning,
                      stacklevel=2)
        std = np.where(degenerate, 1.0, std)
    return StandardizeStats(mean=mean, std=std, degenerate=degenerate)


def standardize_apply(data, stats: StandardizeStats):
    """Map x -> (x - mean) / std per column; returns the input's type."""
    X, fm = _unwrap(data)
    if X.shape[1] != stats.mean.shape[0]:
        raise ValueError("stats were fitted on a different width")
    out = (X - stats.mean) / stats.std
    return fm.with_data(out) if fm is not None else out


def normalize_rows(data):
    """Scale each row onto the unit sphere; zero rows stay zero (flagged)."""
    X, fm = _unwrap(data)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero-norm row(s) left unscaled",
                      RuntimeWarning, stacklevel=2)
        norms = norms.copy()
        norms[zero] = 1.0
    out = X / norms
    return fm.with_data(out) if fm is not None else out
