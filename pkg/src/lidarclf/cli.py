"""Command-line interface.

Subcommands: ``parse`` (LAS/CSV to CSV plus a summary), ``synth``
(generate a labeled cloud), ``run`` (one experiment), ``suite`` (the
frameworks-by-classifiers grid), and ``model inspect``. Run and suite
write JSON/CSV reports with confusion-matrix and grid figures beside
them.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import LidarclfError
from .las_io import (DEFAULT_CLASS_CODES, filter_classes, load_cloud,
                     subsample_uniform, write_csv)
from .pipeline import (CLASSIFIERS, FRAMEWORKS, ExperimentSpec, run_experiment,
                       run_suite)
from .serialize import inspect_model, save_model
from .synth import PRESETS, generate, preset

_INT_FIELDS = {"sample_size", "neighbor_k", "pca_components", "ae_epochs",
               "ae_batch", "knn_votes", "rf_trees", "rf_depth", "ens_forests",
               "ens_trees", "ens_depth", "mlp_epochs", "mlp_batch", "folds",
               "seed"}
_FLOAT_FIELDS = {"ae_lr", "ae_momentum", "mlp_lr", "mlp_momentum"}
_BOOL_FIELDS = {"stratified", "per_split_stats", "ae_tied"}
_TUPLE_FIELDS = {"class_codes", "ae_dims"}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if name in _INT_FIELDS:
        return int(raw)
    if name in _FLOAT_FIELDS:
        return float(raw)
    if name in _BOOL_FIELDS:
        return raw.lower() in ("1", "true", "yes", "on")
    if name in _TUPLE_FIELDS:
        return tuple(int(v) for v in raw.replace(",", " ").split())
    return raw


def _parse_codes(text: str) -> tuple[int, ...]:
    return tuple(sorted(int(v) for v in text.replace(",", " ").split()))


@click.group()
@click.version_option(version=__version__, prog_name="lidarclf")
def main():
    """LiDAR point cloud classification experiments."""


@main.command("parse")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              help="Write the retained points as CSV.")
@click.option("--classes", default=None,
              help="Keep only these class codes (comma separated).")
@click.option("-s", "--sample-size", type=int, default=None,
              help="Equally spaced subsample size after filtering.")
def parse_cmd(input_path, output, classes, sample_size):
    """Read a LAS or CSV cloud and print a per-class summary."""
    cloud = load_cloud(input_path)
    total = len(cloud)
    click.echo(f"points: {total}")
    if cloud.clamp_warnings:
        click.echo(f"clamped records: {cloud.clamp_warnings}")
    if classes:
        codes = _parse_codes(classes)
        cloud = filter_classes(cloud, codes)
        click.echo(f"retained {len(cloud)} points in classes {list(codes)} "
                   f"(discarded {total - len(cloud)})")
    if sample_size is not None:
        cloud = subsample_uniform(cloud, sample_size)
        click.echo(f"subsampled to {len(cloud)} points")
    for code, count in sorted(cloud.class_counts().items()):
        click.echo(f"  class {code:3d}: {count}")
    if output:
        write_csv(cloud, output)
        click.echo(f"wrote {output}")


@main.command("synth")
@click.option("--preset", "preset_name", default="slabs",
              type=click.Choice(PRESETS), show_default=True)
@click.option("-n", "--n-points", type=int, default=None,
              help="Scale the preset to this many points.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", required=True,
              type=click.Path(dir_okay=False), help="CSV output path.")
def synth_cmd(preset_name, n_points, seed, output):
    """Generate a labeled synthetic cloud and write it as CSV."""
    spec = preset(preset_name, n_points=n_points)
    cloud = generate(spec, seed=seed)
    write_csv(cloud, output)
    click.echo(f"wrote {len(cloud)} points to {output}")
    for code, count in sorted(cloud.class_counts().items()):
        click.echo(f"  class {code:3d}: {count}")


def _spec_options(fn):
    opts = [
        click.option("--input", "input_path", default=None,
                     type=click.Path(exists=True, dir_okay=False),
                     help="LAS or CSV input file."),
        click.option("--synth", "synth_preset", default=None,
                     type=click.Choice(PRESETS),
                     help="Generate input instead of reading a file."),
        click.option("--classes", default=None,
                     help="Class codes to keep (comma separated)."),
        click.option("-s", "--sample-size", type=int, default=2000,
                     show_default=True),
        click.option("-k", "--neighbor-k", type=int, default=15,
                     show_default=True),
        click.option("-p", "--pca-components", type=int, default=None),
        click.option("--folds", type=int, default=5, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--no-stratify", is_flag=True,
                     help="Plain shuffled folds instead of stratified."),
        click.option("--per-split-stats", is_flag=True,
                     help="Standardize each split by its own statistics."),
        click.option("--knn-votes", type=int, default=5, show_default=True),
        click.option("--rf-trees", type=int, default=25, show_default=True),
        click.option("--rf-depth", type=int, default=None),
        click.option("--ens-forests", type=int, default=20, show_default=True),
        click.option("--ens-trees", type=int, default=10, show_default=True),
        click.option("--ens-depth", type=int, default=20, show_default=True),
        click.option("--mlp-epochs", type=int, default=500, show_default=True),
        click.option("--mlp-lr", type=float, default=0.01, show_default=True),
        click.option("--ae-epochs", type=int, default=2000, show_default=True),
        click.option("--ae-lr", type=float, default=0.01, show_default=True),
        click.option("--ae-batch", type=int, default=128, show_default=True),
        click.option("--ae-tied", is_flag=True,
                     help="Tie decoder weights to encoder transposes."),
        click.option("--paper-scale", is_flag=True,
                     help="Full-scale settings (100k sample, 200k epochs)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_spec(input_path, synth_preset, classes, **kw) -> ExperimentSpec:
    if input_path and synth_preset:
        raise click.UsageError("give either --input or --synth, not both")
    if input_path:
        source = input_path
    else:
        source = f"synth:{synth_preset or 'slabs'}"
    codes = _parse_codes(classes) if classes else tuple(sorted(DEFAULT_CLASS_CODES))
    spec = ExperimentSpec(
        source=source, class_codes=codes,
        framework=kw.get("framework", "raw"), classifier=kw.get("classifier", "rf"),
        sample_size=kw["sample_size"], neighbor_k=kw["neighbor_k"],
        pca_components=kw["pca_components"], folds=kw["folds"], seed=kw["seed"],
        stratified=not kw["no_stratify"], per_split_stats=kw["per_split_stats"],
        knn_votes=kw["knn_votes"], rf_trees=kw["rf_trees"],
        rf_depth=kw["rf_depth"], ens_forests=kw["ens_forests"],
        ens_trees=kw["ens_trees"], ens_depth=kw["ens_depth"],
        mlp_epochs=kw["mlp_epochs"], mlp_lr=kw["mlp_lr"],
        ae_epochs=kw["ae_epochs"], ae_lr=kw["ae_lr"], ae_batch=kw["ae_batch"],
        ae_tied=kw["ae_tied"],
    )
    if kw["paper_scale"]:
        spec = spec.paper_scale()
    return spec.validate()


@main.command("run")
@click.option("--framework", type=click.Choice(FRAMEWORKS), default="raw",
              show_default=True)
@click.option("--classifier", type=click.Choice(CLASSIFIERS), default="rf",
              show_default=True)
@_spec_options
@click.option("--out", "outdir", type=click.Path(file_okay=False), default=None,
              help="Directory for report.json, fold_scores.csv and figures.")
@click.option("--save-model", "model_dir", type=click.Path(file_okay=False),
              default=None,
              help="Refit on the full sample and save the fitted models here.")
def run_cmd(framework, classifier, outdir, model_dir, **kw):
    """Run a single experiment and print its report."""
    spec = _build_spec(framework=framework, classifier=classifier, **kw)
    try:
        report = run_experiment(spec)
    except LidarclfError as exc:
        raise click.ClickException(str(exc))
    click.echo(report.render_text(), nl=False)
    if outdir:
        from .report import save_run_outputs
        paths = save_run_outputs(report, outdir)
        click.echo("wrote " + ", ".join(str(p) for p in paths.values()))
    if model_dir:
        _save_fitted_models(spec, Path(model_dir))


def _save_fitted_models(spec: ExperimentSpec, outdir: Path) -> None:
    from .features import assemble_neighbor_matrix, to_feature_matrix
    from .pipeline import ClassificationPipeline, load_source, make_classifier, \
        make_dimred_stage

    cloud = filter_classes(load_source(spec), spec.class_codes)
    if spec.sample_size is not None:
        cloud = subsample_uniform(cloud, spec.sample_size)
    fm = to_feature_matrix(cloud)
    if spec.uses_neighbors:
        fm = assemble_neighbor_matrix(fm, spec.neighbor_k)
    pipe = ClassificationPipeline(make_dimred_stage(spec), make_classifier(spec),
                                  per_split_stats=spec.per_split_stats)
    pipe.fit(fm.data, fm.labels)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [save_model(pipe.classifier, outdir / "classifier.lcm")]
    if pipe.dimred_stage is not None:
        paths.append(save_model(pipe.dimred_stage.model, outdir / "dimred.lcm"))
    click.echo("saved " + ", ".join(str(p) for p in paths))


def _read_suite_config(path: str):
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    base_fields: dict = {}
    frameworks = FRAMEWORKS
    classifiers = CLASSIFIERS
    if parser.has_section("suite"):
        for key, raw in parser.items("suite"):
            if key == "frameworks":
                frameworks = tuple(v.strip() for v in raw.split(","))
            elif key == "classifiers":
                classifiers = tuple(v.strip() for v in raw.split(","))
            else:
                base_fields[key] = _coerce(key, raw)
    overrides: dict = {}
    for section in parser.sections():
        if section.startswith("cell:"):
            _, fw, clf = section.split(":")
            overrides[(fw, clf)] = {k: _coerce(k, v)
                                    for k, v in parser.items(section)}
    return base_fields, frameworks, classifiers, overrides


@main.command("suite")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="INI file with a [suite] section and optional "
                   "[cell:<framework>:<classifier>] overrides.")
@click.option("--frameworks", default=None,
              help="Comma-separated subset of frameworks to run.")
@click.option("--classifiers", default=None,
              help="Comma-separated subset of classifiers to run.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel worker processes for suite cells.")
@_spec_options
@click.option("--out", "outdir", type=click.Path(file_okay=False), default=None,
              help="Directory for grid.csv, grid.txt, figures, cell reports.")
def suite_cmd(config_path, frameworks, classifiers, workers, outdir, **kw):
    """Run the frameworks-by-classifiers grid and print the score table."""
    base_fields: dict = {}
    fw_list, clf_list = FRAMEWORKS, CLASSIFIERS
    overrides = None
    if config_path:
        base_fields, fw_list, clf_list, overrides = _read_suite_config(config_path)
    base = _build_spec(**kw)
    if base_fields:
        base = dataclasses.replace(base, **base_fields).validate()
    if frameworks:
        fw_list = tuple(v.strip() for v in frameworks.split(","))
    if classifiers:
        clf_list = tuple(v.strip() for v in classifiers.split(","))

    suite = run_suite(base, frameworks=fw_list, classifiers=clf_list,
                      overrides=overrides, workers=workers)
    from .report import grid_text, save_suite_outputs
    click.echo(grid_text(suite), nl=False)
    if outdir:
        paths = save_suite_outputs(suite, outdir)
        click.echo("wrote " + ", ".join(str(p) for p in paths.values()))
    if not suite.ok:
        for (fw, clf), message in sorted(suite.failures.items()):
            click.echo(f"cell {fw}/{clf} failed: {message}", err=True)
        sys.exit(1)


@main.group("model")
def model_group():
    """Saved-model utilities."""


@model_group.command("inspect")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def model_inspect_cmd(path):
    """Print the kind, dims and hyperparameters of a saved model."""
    info = inspect_model(path)
    click.echo(json.dumps(info, sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
