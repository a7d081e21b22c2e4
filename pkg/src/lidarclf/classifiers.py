"""The four supervised learners: KNN, decision-tree random forest, an
ensemble of random forests, and a two-hidden-layer softmax network.

Every classifier exposes fit(X, labels) -> self and predict(Q) -> dense
labels, never emitting a class index it did not see histogram mass for.
Ties are fixed everywhere: equal votes go to the smallest class index,
equal distances to the smallest training-row index, so predictions are
reproducible given the seed.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch, KTooLarge
from .nets import FeedForwardNet, TrainConfig, softmax_cross_entropy, train_minibatch

_CHUNK = 256  # query rows per distance block


def _as_seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


class KnnClassifier:
    """Majority vote among the k_vote nearest training rows (Euclidean)."""

    def __init__(self, k_vote: int = 5):
        if k_vote < 1:
            raise KTooLarge("k_vote must be at least 1")
        self.k_vote = k_vote
        self._X = None
        self._y = None
        self.n_classes = 0

    def fit(self, X: np.ndarray, labels: np.ndarray) -> "KnnClassifier":
        X = np.asarray(X, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if self.k_vote > X.shape[0]:
            raise KTooLarge(f"k_vote={self.k_vote} exceeds {X.shape[0]} training rows")
        self._X = X
        self._y = labels
        self.n_classes = int(labels.max()) + 1
        return self

    def predict(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.shape[1] != self._X.shape[1]:
            raise DimMismatch(f"query width {Q.shape[1]} != {self._X.shape[1]}")
        out = np.empty(Q.shape[0], dtype=np.int64)
        sq_train = (self._X * self._X).sum(axis=1)
        for lo in range(0, Q.shape[0], _CHUNK):
            qb = Q[lo:lo + _CHUNK]
            d2 = sq_train[None, :] - 2.0 * (qb @ self._X.T)
            # Stable argsort keeps equal distances in training-row order.
            nn = np.argsort(d2, axis=1, kind="stable")[:, :self.k_vote]
            votes = self._y[nn]
            counts = np.zeros((qb.shape[0], self.n_classes), dtype=np.int64)
            np.add.at(counts, (np.arange(qb.shape[0])[:, None], votes), 1)
            out[lo:lo + _CHUNK] = counts.argmax(axis=1)
        return out


def gini_impurity(labels: np.ndarray) -> float:
    """1 - sum of squared class fractions."""
    if len(labels) == 0:
        return 0.0
    counts = np.bincount(labels)
    frac = counts / len(labels)
    return float(1.0 - (frac * frac).sum())


def split_gini(left: np.ndarray, right: np.ndarray) -> float:
    """Size-weighted Gini impurity of a two-way split."""
    n = len(left) + len(right)
    return (len(left) * gini_impurity(left) + len(right) * gini_impurity(right)) / n


class DecisionTree:
    """Greedy CART classifier on numeric features.

    At each node the (feature, threshold) pair minimizing weighted Gini
    impurity is chosen over a candidate subset of features: all of them
    by default, or ceil(sqrt(d)) freshly drawn per node when
    feature_subsample="sqrt". Growth stops at pure nodes, max_depth, or
    fewer than 2 samples.
    """

    def __init__(self, max_depth: int | None = None,
                 feature_subsample: str | int | None = None):
        self.max_depth = max_depth
        self.feature_subsample = feature_subsample
        self.n_classes = 0
        # Flat node arrays; feature -1 marks a leaf.
        self._feature: list[int] = []
        self._threshold: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._hist: list[np.ndarray] = []

    def _n_candidates(self, d: int) -> int:
        if self.feature_subsample is None or self.feature_subsample == "all":
            return d
        if self.feature_subsample == "sqrt":
            return min(d, int(np.ceil(np.sqrt(d))))
        return min(d, int(self.feature_subsample))

    def fit(self, X: np.ndarray, labels: np.ndarray,
            rng: np.random.Generator | None = None,
            n_classes: int | None = None) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        self.n_classes = n_classes or int(y.max()) + 1
        self._feature, self._threshold = [], []
        self._left, self._right, self._hist = [], [], []
        rng = rng or np.random.default_rng()
        self._grow(X, y, 0, rng)
        return self

    def _new_node(self) -> int:
        self._feature.append(-1)
        self._threshold.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._hist.append(None)
        return len(self._feature) - 1

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int,
              rng: np.random.Generator) -> int:
        node = self._new_node()
        hist = np.bincount(y, minlength=self.n_classes)
        self._hist[node] = hist

        n, d = X.shape
        depth_capped = self.max_depth is not None and depth >= self.max_depth
        if n < 2 or depth_capped or (hist > 0).sum() == 1:
            return node

        m = self._n_candidates(d)
        feats = np.sort(rng.choice(d, size=m, replace=False)) if m < d \
            else np.arange(d)
        split = self._best_split(X, y, feats)
        if split is None:
            return node
        feat, threshold = split
        mask = X[:, feat] <= threshold
        self._feature[node] = feat
        self._threshold[node] = threshold
        self._left[node] = self._grow(X[mask], y[mask], depth + 1, rng)
        self._right[node] = self._grow(X[~mask], y[~mask], depth + 1, rng)
        return node

    def _best_split(self, X: np.ndarray, y: np.ndarray, feats: np.ndarray):
        n = y.shape[0]
        cols = X[:, feats]
        order = np.argsort(cols, axis=0, kind="stable")
        svals = np.take_along_axis(cols, order, axis=0)
        slabels = y[order]                                   # (n, F)

        onehot = np.identity(self.n_classes)[slabels]        # (n, F, C)
        left_counts = np.cumsum(onehot, axis=0)[:-1]         # (n-1, F, C)
        total = left_counts[-1] + onehot[-1]
        right_counts = total[None] - left_counts

        left_n = np.arange(1, n, dtype=np.float64)[:, None]
        right_n = n - left_n
        # Weighted Gini = 1 - (sum_l^2/n_l + sum_r^2/n_r)/n, minimized.
        purity = ((left_counts * left_counts).sum(axis=2) / left_n
                  + (right_counts * right_counts).sum(axis=2) / right_n)
        valid = svals[1:] > svals[:-1]
        if not valid.any():
            return None
        score = np.where(valid, 1.0 - purity / n, np.inf)
        pos, fidx = np.unravel_index(np.argmin(score), score.shape)
        threshold = 0.5 * (svals[pos, fidx] + svals[pos + 1, fidx])
        return int(feats[fidx]), float(threshold)

    @property
    def n_nodes(self) -> int:
        return len(self._feature)

    @property
    def depth(self) -> int:
        depths = {0: 0}
        best = 0
        for node in range(self.n_nodes):
            for child in (self._left[node], self._right[node]):
                if child >= 0:
                    depths[child] = depths[node] + 1
                    best = max(best, depths[child])
        return best

    def predict(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        out = np.empty(Q.shape[0], dtype=np.int64)
        stack = [(0, np.arange(Q.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            feat = self._feature[node]
            if feat < 0:
                out[idx] = int(np.argmax(self._hist[node]))
                continue
            mask = Q[idx, feat] <= self._threshold[node]
            stack.append((self._left[node], idx[mask]))
            stack.append((self._right[node], idx[~mask]))
        return out


def _majority(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Column-wise majority of a (voters, m) label array; ties go to the
    smallest class index."""
    m = votes.shape[1]
    counts = np.zeros((m, n_classes), dtype=np.int64)
    rows = np.arange(m)
    for v in votes:
        counts[rows, v] += 1
    return counts.argmax(axis=1)


class RandomForest:
    """Bagged CART trees with per-node feature subsampling."""

    def __init__(self, n_trees: int = 100, max_depth: int | None = None,
                 seed=0, bootstrap: bool = True,
                 feature_subsample: str | int | None = "sqrt"):
        if n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.seed = seed
        self.bootstrap = bootstrap
        self.feature_subsample = feature_subsample
        self.trees: list[DecisionTree] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, labels: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        self.n_classes = int(y.max()) + 1
        base = _as_seed_tuple(self.seed)
        self.trees = []
        n = X.shape[0]
        for t in range(self.n_trees):
            rng = np.random.default_rng(base + (t,))
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(max_depth=self.max_depth,
                                feature_subsample=self.feature_subsample)
            tree.fit(X[idx], y[idx], rng=rng, n_classes=self.n_classes)
            self.trees.append(tree)
        return self

    def predict(self, Q: np.ndarray) -> np.ndarray:
        votes = np.stack([tree.predict(Q) for tree in self.trees])
        return _majority(votes, self.n_classes)


class RfEnsemble:
    """Majority vote over independently seeded random forests."""

    def __init__(self, n_forests: int = 20, trees_per_forest: int = 100,
                 max_depth: int | None = 20, seed=0):
        if n_forests < 1:
            raise ValueError("n_forests must be at least 1")
        self.n_forests = n_forests
        self.trees_per_forest = trees_per_forest
        self.max_depth = max_depth
        self.seed = seed
        self.forests: list[RandomForest] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, labels: np.ndarray) -> "RfEnsemble":
        base = _as_seed_tuple(self.seed)
        self.forests = [
            RandomForest(n_trees=self.trees_per_forest, max_depth=self.max_depth,
                         seed=base + (f,)).fit(X, labels)
            for f in range(self.n_forests)
        ]
        self.n_classes = self.forests[0].n_classes
        return self

    def predict(self, Q: np.ndarray) -> np.ndarray:
        votes = np.stack([forest.predict(Q) for forest in self.forests])
        return _majority(votes, self.n_classes)


class MlpClassifier:
    """Feed-forward softmax classifier with two hidden layers."""

    def __init__(self, hidden=(20, 15), learning_rate: float = 0.01,
                 epochs: int = 500, batch_size: int = 64, seed: int = 0,
                 momentum: float = 0.0, hidden_activation: str = "relu"):
        self.hidden = tuple(int(h) for h in hidden)
        self.config = TrainConfig(learning_rate=learning_rate, epochs=epochs,
                                  batch_size=batch_size, seed=seed,
                                  momentum=momentum)
        self.hidden_activation = hidden_activation
        self.net: FeedForwardNet | None = None
        self.loss_log: np.ndarray | None = None
        self.n_classes = 0

    def fit(self, X: np.ndarray, labels: np.ndarray) -> "MlpClassifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        self.n_classes = int(y.max()) + 1
        dims = (X.shape[1],) + self.hidden + (self.n_classes,)
        rng = np.random.default_rng(self.config.seed)
        self.net = FeedForwardNet(dims, hidden_activation=self.hidden_activation,
                                  output_activation="linear", rng=rng)

        def loss_fn(logits, yb):
            loss, grad, _ = softmax_cross_entropy(logits, yb)
            return loss, grad

        self.loss_log = train_minibatch(self.net, X, y, loss_fn, self.config, rng)
        return self

    def predict_proba(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.shape[1] != self.net.dims[0]:
            raise DimMismatch(f"query width {Q.shape[1]} != {self.net.dims[0]}")
        logits = self.net.predict(Q)
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        return expz / expz.sum(axis=1, keepdims=True)

    def predict(self, Q: np.ndarray) -> np.ndarray:
        return self.predict_proba(Q).argmax(axis=1).astype(np.int64)
