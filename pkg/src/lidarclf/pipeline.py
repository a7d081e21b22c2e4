"""Declarative experiment runner for the six classification frameworks.

An ExperimentSpec names an input source, one of six feature frameworks
(raw, pca, enc, neigh, neigh-pca, neigh-enc), one of four classifiers
(knn, rf, rf-ens, nn) and every hyperparameter needed to reproduce the
run. Execution order: load, filter to the target classes, subsample
equally spaced in file order, optionally assemble the neighbor matrix,
then cross-validate a pipeline that standardizes, row-normalizes,
optionally reduces dimension, and classifies. Preprocessing statistics
and dimension-reduction models are refit inside every training fold;
the neighbor matrix is assembled once on the subsample, before
splitting, since each row bakes in its spatial context.
"""

from __future__ import annotations

import dataclasses
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .classifiers import KnnClassifier, MlpClassifier, RandomForest, RfEnsemble
from .dimred import AutoencoderModel, PcaModel, ae_train, pca_fit, validate_ae_dims
from .errors import SpecError
from .evaluation import CvResult, CvSummary, kfold_plan, cross_validate
from .features import (FeatureMatrix, assemble_neighbor_matrix, normalize_rows,
                       standardize_apply, standardize_fit, to_feature_matrix)
from .las_io import (DEFAULT_CLASS_CODES, PointCloud, filter_classes, load_cloud,
                     subsample_uniform)
from .nets import TrainConfig
from .synth import PRESETS, SynthSpec, generate, preset

FRAMEWORKS = ("raw", "pca", "enc", "neigh", "neigh-pca", "neigh-enc")
CLASSIFIERS = ("knn", "rf", "rf-ens", "nn")

_AE_INNER_RAW = 5
_AE_INNER_NEIGH = 40


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one table cell."""

    source: str = "synth:slabs"
    framework: str = "raw"
    classifier: str = "rf"
    class_codes: tuple[int, ...] = tuple(sorted(DEFAULT_CLASS_CODES))
    sample_size: int | None = 2000
    neighbor_k: int = 15
    pca_components: int | None = None     # default: 5 raw, 40 neighbor
    ae_dims: tuple[int, ...] | None = None
    ae_epochs: int = 2000
    ae_lr: float = 0.01
    ae_batch: int = 128
    ae_momentum: float = 0.0
    ae_activation: str = "tanh"
    ae_tied: bool = False
    knn_votes: int = 5
    rf_trees: int = 25
    rf_depth: int | None = None
    ens_forests: int = 20
    ens_trees: int = 10
    ens_depth: int | None = 20
    mlp_epochs: int = 500
    mlp_lr: float = 0.01
    mlp_batch: int = 64
    mlp_momentum: float = 0.0
    folds: int = 5
    stratified: bool = True
    per_split_stats: bool = False
    seed: int = 0
    synth: SynthSpec | None = None        # explicit generator parameters

    def validate(self) -> "ExperimentSpec":
        if self.framework not in FRAMEWORKS:
            raise SpecError(f"framework {self.framework!r} not in {FRAMEWORKS}")
        if self.classifier not in CLASSIFIERS:
            raise SpecError(f"classifier {self.classifier!r} not in {CLASSIFIERS}")
        if self.sample_size is not None and self.sample_size < 1:
            raise SpecError("sample_size must be positive")
        if self.neighbor_k < 1:
            raise SpecError("neighbor_k must be positive")
        if self.folds < 2:
            raise SpecError("folds must be at least 2")
        if self.ae_dims is not None:
            validate_ae_dims(self.ae_dims)
        return self

    @property
    def uses_neighbors(self) -> bool:
        return self.framework.startswith("neigh")

    @property
    def uses_pca(self) -> bool:
        return self.framework in ("pca", "neigh-pca")

    @property
    def uses_encoder(self) -> bool:
        return self.framework in ("enc", "neigh-enc")

    def effective_pca_components(self, input_width: int | None = None) -> int:
        if self.pca_components is not None:
            return self.pca_components
        p = _AE_INNER_NEIGH if self.uses_neighbors else _AE_INNER_RAW
        return min(p, input_width) if input_width is not None else p

    def effective_ae_dims(self, input_width: int) -> tuple[int, ...]:
        """Mirrored five-hidden-layer shapes.

        Without neighbors (width d): (d, d-1, 5, 5, 5, d-1, d).
        With neighbors of k points: multiples of (k+1) stepping 7, 6, 5
        down to an inner width of 40.
        """
        if self.ae_dims is not None:
            dims = validate_ae_dims(self.ae_dims)
            if dims[0] != input_width:
                raise SpecError(f"ae_dims input {dims[0]} != data width {input_width}")
            return dims
        if self.uses_neighbors:
            q = self.neighbor_k + 1
            inner = min(_AE_INNER_NEIGH, 5 * q)
            return (input_width, 6 * q, 5 * q, inner, 5 * q, 6 * q, input_width)
        h1 = max(2, input_width - 1)
        inner = min(_AE_INNER_RAW, input_width)
        h2 = max(inner, min(h1, _AE_INNER_RAW))
        return (input_width, h1, h2, inner, h2, h1, input_width)

    def paper_scale(self) -> "ExperimentSpec":
        """Full-scale settings: 100k subsample, 200k-epoch batch-1000
        autoencoder training, 100-tree forests."""
        return replace(self, sample_size=100_000, ae_epochs=200_000,
                       ae_batch=1000, rf_trees=100, ens_forests=20,
                       ens_trees=100, ens_depth=20, neighbor_k=15)

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["class_codes"] = list(self.class_codes)
        if self.ae_dims is not None:
            d["ae_dims"] = list(self.ae_dims)
        if self.synth is not None:
            d["synth"] = dataclasses.asdict(self.synth)
            d["synth"]["scatter_z_range"] = list(self.synth.scatter_z_range)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["class_codes"] = tuple(d.get("class_codes", sorted(DEFAULT_CLASS_CODES)))
        if d.get("ae_dims") is not None:
            d["ae_dims"] = tuple(d["ae_dims"])
        if d.get("synth") is not None:
            sd = dict(d["synth"])
            sd["scatter_z_range"] = tuple(sd["scatter_z_range"])
            d["synth"] = SynthSpec(**sd)
        return cls(**d).validate()


class PcaStage:
    """Per-fold PCA reduction stage."""

    name = "pca"

    def __init__(self, spec: ExperimentSpec):
        self._spec = spec
        self.components: int | None = None
        self.model: PcaModel | None = None

    def fit(self, X: np.ndarray) -> None:
        self.components = self._spec.effective_pca_components(X.shape[1])
        self.model = pca_fit(X, self.components)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return self.model.project(X)

    @property
    def out_dim(self) -> int:
        return self.components


class EncoderStage:
    """Per-fold autoencoder stage; transform is the innermost layer."""

    name = "encoder"

    def __init__(self, spec: ExperimentSpec):
        self._spec = spec
        self.model: AutoencoderModel | None = None
        self.dims: tuple[int, ...] | None = None

    def fit(self, X: np.ndarray) -> None:
        spec = self._spec
        self.dims = spec.effective_ae_dims(X.shape[1])
        cfg = TrainConfig(learning_rate=spec.ae_lr, epochs=spec.ae_epochs,
                          batch_size=spec.ae_batch, seed=spec.seed,
                          momentum=spec.ae_momentum)
        self.model = ae_train(X, self.dims, cfg,
                              hidden_activation=spec.ae_activation,
                              tied=spec.ae_tied)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return self.model.encode_array(X)

    @property
    def out_dim(self) -> int:
        return self.dims[3]


def make_classifier(spec: ExperimentSpec):
    if spec.classifier == "knn":
        return KnnClassifier(k_vote=spec.knn_votes)
    if spec.classifier == "rf":
        return RandomForest(n_trees=spec.rf_trees, max_depth=spec.rf_depth,
                            seed=spec.seed)
    if spec.classifier == "rf-ens":
        return RfEnsemble(n_forests=spec.ens_forests,
                          trees_per_forest=spec.ens_trees,
                          max_depth=spec.ens_depth, seed=spec.seed)
    if spec.classifier == "nn":
        return MlpClassifier(hidden=(20, 15), learning_rate=spec.mlp_lr,
                             epochs=spec.mlp_epochs, batch_size=spec.mlp_batch,
                             seed=spec.seed, momentum=spec.mlp_momentum)
    raise SpecError(f"unknown classifier {spec.classifier!r}")


def make_dimred_stage(spec: ExperimentSpec):
    if spec.uses_pca:
        return PcaStage(spec)
    if spec.uses_encoder:
        return EncoderStage(spec)
    return None


class ClassificationPipeline:
    """standardize -> row-normalize -> optional dimred -> classifier.

    fit() learns everything from the training data it is given; predict()
    reuses the training statistics unless per_split_stats is set, which
    reproduces the variant that standardizes each split by its own
    statistics.
    """

    def __init__(self, dimred_stage, classifier, per_split_stats: bool = False):
        self.dimred_stage = dimred_stage
        self.classifier = classifier
        self.per_split_stats = per_split_stats
        self.stats = None
        self._in_dim = None

    def _preprocess(self, X: np.ndarray, stats) -> np.ndarray:
        return normalize_rows(standardize_apply(X, stats))

    def fit(self, X: np.ndarray, y: np.ndarray) -> "ClassificationPipeline":
        self._in_dim = X.shape[1]
        self.stats = standardize_fit(X)
        Z = self._preprocess(X, self.stats)
        if self.dimred_stage is not None:
            self.dimred_stage.fit(Z)
            Z = self.dimred_stage.transform(Z)
        self.classifier.fit(Z, y)
        return self

    def predict(self, Q: np.ndarray) -> np.ndarray:
        stats = standardize_fit(Q) if self.per_split_stats else self.stats
        Z = self._preprocess(Q, stats)
        if self.dimred_stage is not None:
            Z = self.dimred_stage.transform(Z)
        return self.classifier.predict(Z)

    def stage_summary(self) -> list[dict]:
        d = self._in_dim
        stages = [
            {"stage": "standardize", "in_dim": d, "out_dim": d},
            {"stage": "normalize", "in_dim": d, "out_dim": d},
        ]
        if self.dimred_stage is not None:
            stages.append({"stage": self.dimred_stage.name, "in_dim": d,
                           "out_dim": self.dimred_stage.out_dim})
            d = self.dimred_stage.out_dim
        stages.append({"stage": type(self.classifier).__name__, "in_dim": d,
                       "out_dim": self.classifier.n_classes})
        return stages


def load_source(spec: ExperimentSpec) -> PointCloud:
    if spec.source.startswith("synth:"):
        name = spec.source.split(":", 1)[1]
        synth_spec = spec.synth
        if synth_spec is None:
            synth_spec = preset(name) if name in PRESETS else preset("slabs")
        return generate(synth_spec, seed=spec.seed)
    return load_cloud(spec.source)


@dataclass
class RunReport:
    """Outcome of one experiment, sufficient to reproduce it."""

    spec: ExperimentSpec
    summary: CvSummary
    fold_matrices: tuple[np.ndarray, ...]
    pooled_matrix: np.ndarray
    accuracy: float
    error_rate: float
    class_codes: tuple[int, ...]          # dense label -> original code
    input_points: int
    filtered_points: int
    discarded_points: int
    dimred_input_width: int
    dimred_output_width: int
    warnings: tuple[str, ...]
    timings: dict[str, float]
    version: str = __version__

    def to_json_dict(self) -> dict:
        """Canonical report payload. Wall-clock timings are kept out so
        reruns with one seed serialize byte-identically."""
        return {
            "version": self.version,
            "spec": self.spec.to_json_dict(),
            "cv": {
                "fold_f1": list(self.summary.fold_scores),
                "mean_f1": self.summary.mean,
                "two_sigma": self.summary.two_sigma,
                "cell": self.summary.format_cell(),
            },
            "confusion": {
                "class_codes": list(self.class_codes),
                "pooled": self.pooled_matrix.tolist(),
                "per_fold": [m.tolist() for m in self.fold_matrices],
            },
            "accuracy": self.accuracy,
            "error_rate": self.error_rate,
            "counts": {
                "input_points": self.input_points,
                "filtered_points": self.filtered_points,
                "discarded_points": self.discarded_points,
                "examples": int(self.pooled_matrix.sum()),
            },
            "widths": {
                "dimred_input": self.dimred_input_width,
                "dimred_output": self.dimred_output_width,
            },
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def render_text(self) -> str:
        lines = [
            f"framework={self.spec.framework} classifier={self.spec.classifier} "
            f"seed={self.spec.seed}",
            f"examples: {int(self.pooled_matrix.sum())} "
            f"(filtered {self.filtered_points} of {self.input_points}, "
            f"discarded {self.discarded_points})",
            f"widths: dimred {self.dimred_input_width} -> {self.dimred_output_width}",
            f"5-fold F1: {self.summary.format_cell()}",
            f"accuracy: {self.accuracy:.4f}  error rate: {self.error_rate:.4f}",
            "pooled confusion (rows true, cols predicted; codes "
            f"{list(self.class_codes)}):",
        ]
        for row in self.pooled_matrix:
            lines.append("  " + " ".join(f"{v:8d}" for v in row))
        if self.warnings:
            lines.append("warnings:")
            lines.extend(f"  - {w}" for w in self.warnings)
        lines.append("timings (s): " + "  ".join(
            f"{k}={v:.3f}" for k, v in self.timings.items()))
        return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec) -> RunReport:
    """Execute one spec end to end; see the module docstring for order."""
    spec = spec.validate()
    timings: dict[str, float] = {}
    collected: list[str] = []

    t0 = time.perf_counter()
    cloud = load_source(spec)
    input_points = len(cloud)
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cloud = filter_classes(cloud, spec.class_codes)
    filtered_points = len(cloud)
    discarded = input_points - filtered_points
    if spec.sample_size is not None:
        cloud = subsample_uniform(cloud, spec.sample_size)
    if cloud.clamp_warnings:
        collected.append(f"{cloud.clamp_warnings} record(s) clamped during parsing")
    timings["select"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fm = to_feature_matrix(cloud)
    base_width = fm.n_features
    if spec.uses_neighbors:
        fm = assemble_neighbor_matrix(fm, spec.neighbor_k)
    width_in = fm.n_features
    timings["features"] = time.perf_counter() - t0

    if spec.uses_pca:
        width_out = spec.effective_pca_components(width_in)
    elif spec.uses_encoder:
        width_out = spec.effective_ae_dims(width_in)[3]
    else:
        width_out = width_in
    expected = (spec.neighbor_k + 1) * base_width if spec.uses_neighbors else base_width
    assert width_in == expected, "neighbor block bookkeeping is off"

    t0 = time.perf_counter()
    factory = lambda: ClassificationPipeline(  # noqa: E731
        make_dimred_stage(spec), make_classifier(spec),
        per_split_stats=spec.per_split_stats)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        plan = kfold_plan(fm.labels, n_folds=spec.folds, seed=spec.seed,
                          stratified=spec.stratified)
        result: CvResult = cross_validate(factory, fm.data, fm.labels, plan)
    for w in caught:
        msg = str(w.message)
        if msg not in collected:
            collected.append(msg)
    timings["cross_validate"] = time.perf_counter() - t0

    code_by_label = tuple(sorted(fm.class_map, key=fm.class_map.get))
    return RunReport(
        spec=spec, summary=result.summary, fold_matrices=result.fold_matrices,
        pooled_matrix=result.pooled_matrix,
        accuracy=result.pooled_accuracy, error_rate=result.pooled_error_rate,
        class_codes=code_by_label, input_points=input_points,
        filtered_points=filtered_points, discarded_points=discarded,
        dimred_input_width=width_in, dimred_output_width=width_out,
        warnings=tuple(collected), timings=timings,
    )


@dataclass
class SuiteResult:
    """Grid of runs: one cell per (framework, classifier) pair."""

    frameworks: tuple[str, ...]
    classifiers: tuple[str, ...]
    cells: dict[tuple[str, str], RunReport]
    failures: dict[tuple[str, str], str] = field(default_factory=dict)

    def f1(self, framework: str, classifier: str) -> float:
        return self.cells[(framework, classifier)].summary.mean

    @property
    def ok(self) -> bool:
        return not self.failures

    def cell_text(self, framework: str, classifier: str) -> str:
        key = (framework, classifier)
        if key in self.failures:
            return "ERROR"
        return self.cells[key].summary.format_cell()


def _suite_cell(spec: ExperimentSpec) -> RunReport:
    return run_experiment(spec)


def run_suite(base: ExperimentSpec,
              frameworks=FRAMEWORKS, classifiers=CLASSIFIERS,
              overrides: dict | None = None, workers: int = 1) -> SuiteResult:
    """Run every (framework, classifier) cell from one base spec.

    ``overrides`` maps (framework, classifier) to spec-field dicts for
    per-cell tweaks. Cells are independent; failures are recorded per
    cell and leave the rest of the grid intact.
    """
    frameworks = tuple(frameworks)
    classifiers = tuple(classifiers)
    keys = [(fw, clf) for fw in frameworks for clf in classifiers]
    specs = []
    for fw, clf in keys:
        fields = {"framework": fw, "classifier": clf}
        if overrides and (fw, clf) in overrides:
            fields.update(overrides[(fw, clf)])
        specs.append(replace(base, **fields).validate())

    cells: dict[tuple[str, str], RunReport] = {}
    failures: dict[tuple[str, str], str] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {key: pool.submit(_suite_cell, spec)
                       for key, spec in zip(keys, specs)}
        for key in keys:
            try:
                cells[key] = futures[key].result()
            except Exception as exc:
                failures[key] = str(exc)
    else:
        for key, spec in zip(keys, specs):
            try:
                cells[key] = _suite_cell(spec)
            except Exception as exc:
                failures[key] = str(exc)
    return SuiteResult(frameworks=frameworks, classifiers=classifiers,
                       cells=cells, failures=failures)
