"""Command-line interface for the dataset-compression toolkit."""

from __future__ import annotations

from pathlib import Path

import click

from .augment import augment_batch
from .combining import (
    GridSpec,
    build_compressed_dataset,
    load_compressed_dataset,
    save_compressed_dataset,
    storage_report,
)
from .dynamics import TrainConfig, build_score_table, load_scores, save_scores, train_with_dynamics
from .harness import (
    EXPERIMENT_TAGS,
    cost_report,
    desk_datasets,
    entropy_lab_inputs,
    pca_config_from_run_config,
    pipeline_from_config,
    run_pca,
    run_table_experiments,
    evaluate_hard_label,
    EvalConfig,
)
from .images import write_ppm
from .pruning import SelectionSpec, load_subset, save_subset, select_balanced, select_unbalanced
from .runconfig import default_run_config, load_run_config
from .seeding import SeedSpec
from . import dataset_io


def _config(config_path):
    return load_run_config(config_path) if config_path else default_run_config()


@click.group()
def main():
    """Desk-scale dataset compression: prune, combine, augment, measure."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen(config_path, out_dir):
    """Generate the synthetic train/test datasets."""
    rc = _config(config_path)
    train, test = desk_datasets(rc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_io.save_dataset_view(train, out / "train")
    dataset_io.save_dataset_view(test, out / "test")
    click.echo(f"wrote {len(train)} train / {len(test)} test samples to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def score(config_path, data_dir, seed, out_path):
    """Train the toy model on the train split and write the scores file."""
    rc = _config(config_path)
    train = dataset_io.load_dataset_view(Path(data_dir) / "train")
    s = rc["score"]
    cfg = TrainConfig(
        epochs=s["epochs"],
        batch_size=s["batch_size"],
        learning_rate=s["learning_rate"],
        early_window=s["early_window"],
        hidden_dim=s["hidden_dim"],
        seed=SeedSpec(seed).child_seed("score"),
    )
    _, log = train_with_dynamics(train, cfg)
    table = build_score_table(log, cfg.early_window)
    save_scores(table, out_path)
    click.echo(f"wrote scores for {len(table)} samples to {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--scores", "scores_path", type=click.Path(exists=True), required=True)
@click.option("--ipc", type=int, default=None, help="Per-class count (balanced selection).")
@click.option("--total", type=int, default=None, help="Global count (unbalanced selection).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def select(config_path, scores_path, ipc, total, seed, out_path):
    """Select a subset from a scores file under the configured pruning rule."""
    rc = _config(config_path)
    table = load_scores(scores_path)
    sel = rc["select"]
    if (ipc is None) == (total is None):
        raise click.UsageError("pass exactly one of --ipc or --total")
    spec = SelectionSpec(
        metric=sel["metric"],
        direction=sel["direction"],
        ipc=ipc or 1,
        balanced=sel["balanced"],
        seed=SeedSpec(seed).child_seed("select"),
        tie_break=sel["tie_break"],
    )
    if ipc is not None:
        subset = select_balanced(table, spec)
    else:
        subset = select_unbalanced(table, spec, total)
    save_subset(subset, out_path)
    click.echo(f"wrote {len(subset)} sample ids to {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--subset", "subset_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def combine(config_path, data_dir, subset_path, out_dir):
    """Build composite images from a selected subset."""
    rc = _config(config_path)
    train = dataset_io.load_dataset_view(Path(data_dir) / "train")
    subset = load_subset(subset_path)
    c = rc["combine"]
    grid = GridSpec(k=c["grid"], cell_side=c["cell_side"])
    compressed = build_compressed_dataset(train, subset, grid, c["ipc_out"])
    save_compressed_dataset(compressed, out_dir)
    rep = storage_report(compressed)
    click.echo(
        f"wrote {rep.num_images} composites ({rep.file_bytes} bytes) to {out_dir}"
    )


@main.command("augment-preview")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--compressed", "compressed_dir", type=click.Path(exists=True), required=True)
@click.option("--count", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def augment_preview(config_path, compressed_dir, count, seed, out_dir):
    """Write before/after PPM pairs for a few augmented composites."""
    rc = _config(config_path)
    compressed = load_compressed_dataset(compressed_dir)
    pipeline = pipeline_from_config(rc, compressed.num_classes, rc["dataset"]["side"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = list(compressed.composites)[:count]
    augmented = augment_batch(items, pipeline, SeedSpec(seed), "preview")
    for comp, aug in zip(items, augmented):
        write_ppm(comp.image, out / f"before_class{comp.label}_{comp.sample_id}.ppm")
        write_ppm(aug.image, out / f"after_class{comp.label}_{comp.sample_id}.ppm")
    click.echo(f"wrote {2 * len(items)} PPM files to {out}")


@main.command("entropy-lab")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-crops", type=int, default=100, show_default=True)
@click.option("--r-values", default="0.08,0.5,0.8", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def entropy_lab_cmd(config_path, seed, n_crops, r_values, out_dir):
    """Run the crop/NLL/entropy experiments and write the four report tables."""
    rc = _config(config_path)
    train, _ = desk_datasets(rc)
    observer, strata = entropy_lab_inputs(train, rc, seed)
    r_list = [float(v) for v in r_values.split(",") if v]
    from .entropy_lab import run_entropy_lab

    paths = run_entropy_lab(observer, strata, r_list, n_crops, SeedSpec(seed), out_dir)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--compressed", "compressed_dir", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmd(config_path, compressed_dir, data_dir, seed, out_path):
    """Hard-label evaluation of a compressed dataset against the test split."""
    rc = _config(config_path)
    compressed = load_compressed_dataset(compressed_dir)
    test = dataset_io.load_dataset_view(Path(data_dir) / "test")
    e = rc["eval"]
    pipeline = pipeline_from_config(rc, compressed.num_classes, rc["dataset"]["side"])
    cfg = EvalConfig(
        pipeline=pipeline,
        epochs=e["epochs"],
        batch_size=e["batch_size"],
        learning_rate=e["learning_rate"],
        hidden_dim=e["hidden_dim"],
        seed=SeedSpec(seed).child_seed("eval"),
    )
    report = evaluate_hard_label(compressed, test, cfg)
    if out_path:
        report.write(out_path)
    click.echo(f"accuracy {report.accuracy:.4f}" + (" (diverged)" if report.diverged else ""))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def pca(config_path, seed, out_dir):
    """End-to-end pipeline: score, select, combine, evaluate."""
    rc = _config(config_path)
    train, test = desk_datasets(rc)
    cfg = pca_config_from_run_config(rc, seed)
    _, report = run_pca(train, test, cfg, out_dir=out_dir)
    (Path(out_dir) / "cost_report.csv").write_text(cost_report(report), encoding="ascii")
    click.echo(f"accuracy {report.accuracy:.4f}; artifacts in {out_dir}")


@main.command()
@click.argument("tag", type=click.Choice(EXPERIMENT_TAGS))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def tables(tag, config_path, seeds, out_dir):
    """Run an experiment grid and write its report table(s)."""
    rc = _config(config_path)
    seed_list = [int(s) for s in seeds.split(",") if s]
    paths = run_table_experiments(tag, rc, seed_list, out_dir)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
