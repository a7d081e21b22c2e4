"""Synthetic labeled point clouds for desk-scale experiments.

The default "slabs" layout stacks four point populations whose single-point
attributes overlap but whose neighborhoods differ:

* ground (code 2): a dense plane near z = 0,
* deck (code 17): a plane at z_deck over an inset sub-rectangle,
* scatter (code 18): vertically spread cluster points whose z range
  straddles the deck elevation,
* outliers (code 7): sparse points anywhere in the volume.

A scatter point near the deck height looks like a deck point on its own
row; its neighbors (vertically spread, different intensity mix) give it
away. That makes neighbor-augmented features genuinely informative while
raw per-point features stay partially ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .las_io import PointCloud

GROUND_CODE, OUTLIER_CODE, DECK_CODE, SCATTER_CODE = 2, 7, 17, 18

PRESETS = ("slabs", "two-planes")


@dataclass(frozen=True)
class SynthSpec:
    """Per-class counts plus the geometry/noise knobs of the layout."""

    n_ground: int = 800
    n_deck: int = 500
    n_scatter: int = 600
    n_outlier: int = 100
    extent: float = 40.0
    ground_z_sigma: float = 0.3
    z_deck: float = 3.0
    deck_z_sigma: float = 0.8
    deck_inset: float = 0.2
    scatter_z_range: tuple[float, float] = (0.5, 6.0)
    scatter_clusters: int = 40
    cluster_xy_sigma: float = 0.8
    outlier_z_max: float = 8.0
    intensity_sigma: float = 30.0
    intensity_means: dict[str, float] = field(default_factory=lambda: {
        "ground": 35.0, "deck": 65.0, "scatter": 48.0, "outlier": 50.0})

    @property
    def n_points(self) -> int:
        return self.n_ground + self.n_deck + self.n_scatter + self.n_outlier

    def class_counts(self) -> dict[int, int]:
        counts = {GROUND_CODE: self.n_ground, DECK_CODE: self.n_deck,
                  SCATTER_CODE: self.n_scatter, OUTLIER_CODE: self.n_outlier}
        return {code: n for code, n in counts.items() if n > 0}


def preset(name: str, n_points: int | None = None, **overrides) -> SynthSpec:
    """Named starting layouts; counts are scaled to n_points if given."""
    if name == "slabs":
        spec = SynthSpec()
    elif name == "two-planes":
        # Two clean z-separated planes: trivially separable on (x, y, z).
        spec = SynthSpec(n_ground=1000, n_deck=1000, n_scatter=0, n_outlier=0,
                         ground_z_sigma=0.05, z_deck=5.0, deck_z_sigma=0.05,
                         deck_inset=0.0)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    if n_points is not None:
        total = spec.n_points
        counts = {}
        acc = 0
        for fld in ("n_ground", "n_deck", "n_scatter"):
            counts[fld] = int(round(getattr(spec, fld) * n_points / total))
            acc += counts[fld]
        counts["n_outlier"] = max(0, n_points - acc)
        spec = replace(spec, **counts)
    if overrides:
        spec = replace(spec, **overrides)
    return spec


def _returns(rng, n, probs):
    """Draw (num_returns, return_number) with nr from ``probs`` over 1..len."""
    nr = rng.choice(np.arange(1, len(probs) + 1), size=n, p=probs)
    rn = rng.integers(1, nr + 1)
    return nr.astype(np.int64), rn.astype(np.int64)


def generate(spec: SynthSpec, seed: int = 0) -> PointCloud:
    """Deterministic labeled cloud for the given spec and seed."""
    rng = np.random.default_rng(seed)
    L = spec.extent
    xs, ys, zs, intens, nrs, rns, codes = [], [], [], [], [], [], []

    def emit(n, x, y, z, mean_intensity, nr_probs, code):
        xs.append(x)
        ys.append(y)
        zs.append(z)
        intens.append(rng.normal(mean_intensity, spec.intensity_sigma, n))
        nr, rn = _returns(rng, n, nr_probs)
        nrs.append(nr)
        rns.append(rn)
        codes.append(np.full(n, code, dtype=np.int64))

    if spec.n_ground:
        n = spec.n_ground
        emit(n, rng.uniform(0, L, n), rng.uniform(0, L, n),
             rng.normal(0.0, spec.ground_z_sigma, n),
             spec.intensity_means["ground"], [0.8, 0.2], GROUND_CODE)

    if spec.n_deck:
        n = spec.n_deck
        lo, hi = spec.deck_inset * L, (1.0 - spec.deck_inset) * L
        emit(n, rng.uniform(lo, hi, n), rng.uniform(lo, hi, n),
             rng.normal(spec.z_deck, spec.deck_z_sigma, n),
             spec.intensity_means["deck"], [0.7, 0.3], DECK_CODE)

    if spec.n_scatter:
        n = spec.n_scatter
        centers = rng.uniform(0, L, size=(spec.scatter_clusters, 2))
        pick = rng.integers(0, spec.scatter_clusters, n)
        xy = centers[pick] + rng.normal(0, spec.cluster_xy_sigma, (n, 2))
        z = rng.uniform(*spec.scatter_z_range, n)
        emit(n, xy[:, 0], xy[:, 1], z,
             spec.intensity_means["scatter"], [0.5, 0.3, 0.2], SCATTER_CODE)

    if spec.n_outlier:
        n = spec.n_outlier
        emit(n, rng.uniform(0, L, n), rng.uniform(0, L, n),
             rng.uniform(0, spec.outlier_z_max, n),
             spec.intensity_means["outlier"], [1.0], OUTLIER_CODE)

    order = rng.permutation(spec.n_points)
    return PointCloud(
        x=np.concatenate(xs)[order],
        y=np.concatenate(ys)[order],
        z=np.concatenate(zs)[order],
        intensity=np.concatenate(intens)[order],
        scan_angle=rng.uniform(-20.0, 20.0, spec.n_points),
        num_returns=np.concatenate(nrs)[order],
        return_number=np.concatenate(rns)[order],
        class_code=np.concatenate(codes)[order],
    )
