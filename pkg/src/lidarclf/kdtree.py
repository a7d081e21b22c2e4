"""Exact k-nearest-neighbor search over point coordinates.

Array-backed kd-tree with bucketed leaves. Queries return indices sorted
by nondecreasing squared Euclidean distance; equal distances are broken
by the lower original index, so results are fully deterministic and can
be checked against a brute-force scan.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import KTooLarge

_LEAF_SIZE = 32


class KdTree:
    """Immutable spatial index over an (n, dim) coordinate array."""

    def __init__(self, points: np.ndarray, leaf_size: int = _LEAF_SIZE):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (n, dim) array")
        self._pts = pts
        self._leaf_size = max(2, leaf_size)
        n = pts.shape[0]
        self._perm = np.arange(n, dtype=np.int64)
        # Parallel node arrays; leaves have split_dim == -1 and carry a
        # [start, end) range into the permutation.
        self._split_dim: list[int] = []
        self._split_val: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._start: list[int] = []
        self._end: list[int] = []
        self._build(0, n)

    def __len__(self) -> int:
        return self._pts.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._pts

    def _new_node(self) -> int:
        self._split_dim.append(-1)
        self._split_val.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._start.append(0)
        self._end.append(0)
        return len(self._split_dim) - 1

    def _build(self, lo: int, hi: int) -> int:
        node = self._new_node()
        count = hi - lo
        if count <= self._leaf_size:
            self._start[node], self._end[node] = lo, hi
            return node

        idx = self._perm[lo:hi]
        sub = self._pts[idx]
        spans = sub.max(axis=0) - sub.min(axis=0)
        dim = int(np.argmax(spans))
        if spans[dim] == 0.0:
            # Every remaining point is identical; keep one flat bucket.
            self._start[node], self._end[node] = lo, hi
            return node

        mid = count // 2
        vals = sub[:, dim]
        order = np.argpartition(vals, mid)
        self._perm[lo:hi] = idx[order]
        split_val = float(self._pts[self._perm[lo + mid], dim])

        self._split_dim[node] = dim
        self._split_val[node] = split_val
        self._left[node] = self._build(lo, lo + mid)
        self._right[node] = self._build(lo + mid, hi)
        return node

    def query(self, point, k: int, exclude: int = -1) -> np.ndarray:
        """Indices of the k nearest stored points to ``point``.

        ``exclude`` drops one stored index (the query's own row for
        self-queries). Returns min(k, available) indices.
        """
        q = np.asarray(point, dtype=np.float64)
        pts = self._pts
        perm = self._perm
        split_dim = self._split_dim
        split_val = self._split_val
        left, right = self._left, self._right
        start, end = self._start, self._end

        # Min-heap of (-d2, -idx): the root is the current worst candidate,
        # with equal distances resolved toward the higher index so that a
        # lower-index tie can still displace it.
        heap: list[tuple[float, float]] = []
        stack: list[tuple[int, float]] = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if len(heap) == k and bound > -heap[0][0]:
                continue
            dim = split_dim[node]
            if dim < 0:
                idx = perm[start[node]:end[node]]
                diff = pts[idx] - q
                d2 = (diff * diff).sum(axis=1)
                for dist, i in zip(d2.tolist(), idx.tolist()):
                    if i == exclude:
                        continue
                    if len(heap) < k:
                        heapq.heappush(heap, (-dist, -i))
                    else:
                        wd, wi = heap[0]
                        if dist < -wd or (dist == -wd and i < -wi):
                            heapq.heapreplace(heap, (-dist, -i))
                continue
            delta = q[dim] - split_val[node]
            if delta < 0.0:
                near, far = left[node], right[node]
            else:
                near, far = right[node], left[node]
            stack.append((far, delta * delta))
            stack.append((near, bound))

        found = sorted((-d, -i) for d, i in heap)
        return np.array([i for _, i in found], dtype=np.int64)

    def query_index(self, i: int, k: int) -> np.ndarray:
        """k nearest neighbors of stored point i, i itself excluded."""
        n = len(self)
        if k >= n:
            raise KTooLarge(f"k={k} with only {n} points (need k < n)")
        return self.query(self._pts[i], k, exclude=int(i))

    def query_all(self, k: int) -> np.ndarray:
        """Self-excluded k-nearest indices for every stored point, (n, k)."""
        n = len(self)
        if k >= n:
            raise KTooLarge(f"k={k} with only {n} points (need k < n)")
        out = np.empty((n, k), dtype=np.int64)
        for i in range(n):
            out[i] = self.query(self._pts[i], k, exclude=i)
        return out
