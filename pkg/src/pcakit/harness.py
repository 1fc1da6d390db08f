"""End-to-end pipeline runner and experiment grids.

Runs prune -> combine -> augment -> hard-label evaluation on the desk-scale
synthetic dataset, with every stage individually toggleable, plus the table
experiment grids (pruning rules, crop ratio, regularization augmentation,
entropy lab) and per-stage cost accounting. Everything is deterministic per
(config, root seed).
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .augment import (
    CropSpec,
    MixSpec,
    PipelineConfig,
    augment_batch,
)
from .combining import (
    CompressedDataset,
    GridSpec,
    build_compressed_dataset,
    save_compressed_dataset,
    storage_report,
)
from .datasets import DatasetView, generate_synthetic_dataset, split_per_class
from .dynamics import FEATURE_CENTER, ScoreTable, ToyModel, TrainConfig, build_score_table, save_scores, train_with_dynamics
from .entropy_lab import run_entropy_lab
from .images import standardize_image
from .pruning import (
    STRATA_NAMES,
    SelectionSpec,
    SubsetIndices,
    build_difficulty_strata,
    save_subset,
    select_balanced,
    select_unbalanced,
)
from .runconfig import RunConfig
from .seeding import SeedSpec

EXPERIMENT_TAGS = ("pruning-rules", "crop-ratio", "reg-augment", "entropy-lab")

# Metadata-only record of the large-scale literature's standard evaluation
# setting; it cannot be executed by the desk harness.
REFERENCE_EVAL_SETTINGS = {
    "standard-imagenet": {
        "epochs": 300,
        "batch_size": 128,
        "learning_rate": 0.001,
        "optimizer": "adamw",
        "executable": False,
    }
}


@dataclass(frozen=True)
class EvalConfig:
    pipeline: PipelineConfig
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.05
    optimizer: str = "plain_sgd"
    seed: int = 0
    hidden_dim: int = 64
    preset: str = "standard-desk"

    def __post_init__(self) -> None:
        if self.optimizer != "plain_sgd":
            raise ValueError(
                f"only plain_sgd is executable at desk scale; {self.optimizer!r} exists "
                f"only as reference metadata (see REFERENCE_EVAL_SETTINGS)"
            )
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size, learning_rate must be positive")


@dataclass
class RunReport:
    config_hash: str
    subset_provenance: str
    accuracy: float
    stage_seconds: dict = field(default_factory=dict)
    stage_bytes: dict = field(default_factory=dict)
    total_seconds: float = 0.0
    storage: object = None
    diverged: bool = False

    def lines(self) -> list[str]:
        out = [
            f"# run-report config_hash={self.config_hash} provenance={self.subset_provenance}",
            "key,value",
            f"accuracy,{self.accuracy:.6f}",
            f"diverged,{str(self.diverged).lower()}",
            f"total_seconds,{self.total_seconds:.4f}",
        ]
        for stage, seconds in self.stage_seconds.items():
            out.append(f"seconds_{stage},{seconds:.4f}")
        for stage, nbytes in self.stage_bytes.items():
            out.append(f"bytes_{stage},{nbytes}")
        if self.storage is not None:
            out.append(f"storage_payload_bytes,{self.storage.payload_bytes}")
            out.append(f"storage_file_bytes,{self.storage.file_bytes}")
            out.append(f"storage_num_images,{self.storage.num_images}")
        return out

    def write(self, path) -> int:
        text = "\n".join(self.lines()) + "\n"
        Path(path).write_text(text, encoding="ascii")
        return len(text.encode("ascii"))


def _train_items(source) -> list:
    if isinstance(source, CompressedDataset):
        return list(source.composites)
    if isinstance(source, DatasetView):
        return list(source.samples)
    raise TypeError(f"cannot train on {type(source).__name__}")


def _source_ids(source) -> set:
    if isinstance(source, CompressedDataset):
        return {ref.source_sample_id for comp in source.composites for ref in comp.cells}
    return {s.sample_id for s in source.samples}


def _item_image(item):
    return item.image


def evaluate_hard_label(train_source, test_dataset: DatasetView, config: EvalConfig) -> RunReport:
    """Train a fresh toy model on the compressed dataset, report test top-1.

    Training uses the configured augmentation pipeline and cross-entropy on
    the (possibly mixed) label weights; test images pass through unaugmented.
    Divergence is flagged in the report rather than raised.
    """
    items = _train_items(train_source)
    num_classes = getattr(train_source, "num_classes", test_dataset.num_classes)
    if num_classes != test_dataset.num_classes:
        raise ValueError(
            f"class count mismatch: train {num_classes}, test {test_dataset.num_classes}"
        )
    if config.pipeline.num_classes != num_classes:
        raise ValueError("pipeline num_classes must match the datasets")
    overlap = _source_ids(train_source) & {s.sample_id for s in test_dataset.samples}
    if overlap:
        raise ValueError(f"test set overlaps training sources on ids {sorted(overlap)[:5]}")

    started = time.perf_counter()
    channels = _item_image(items[0]).channels
    if config.pipeline.crop is not None:
        side = config.pipeline.crop.out_side
    else:
        side = _item_image(items[0]).height
    input_dim = side * side * channels
    spec = SeedSpec(config.seed)
    model = ToyModel(input_dim, config.hidden_dim, num_classes, spec.stream("init"))

    n = len(items)
    diverged = False
    for epoch in range(config.epochs):
        order = spec.stream("shuffle", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = [items[i] for i in order[start : start + config.batch_size]]
            augmented = augment_batch(batch, config.pipeline, spec, f"aug-{epoch}")
            x = np.stack([a.image.pixels.reshape(-1) for a in augmented]).astype(np.float64) - FEATURE_CENTER
            w = np.stack([a.label_weights for a in augmented])
            loss = model.step(x, w, config.learning_rate)
            if not np.isfinite(loss):
                diverged = True
                break
        if diverged:
            break

    test_x = np.stack(
        [
            (
                s.image.pixels
                if s.image.height == side and s.image.width == side
                else standardize_image(s.image, side).pixels
            ).reshape(-1)
            for s in test_dataset.samples
        ]
    ).astype(np.float64) - FEATURE_CENTER  # same centering as dynamics.features
    predictions = np.argmax(model.logits(test_x), axis=1)
    accuracy = float(np.mean(predictions == test_dataset.labels()))
    elapsed = time.perf_counter() - started

    provenance = getattr(train_source, "provenance", "") or getattr(train_source, "name", "")
    return RunReport(
        config_hash=_hash_text(f"eval|{config!r}|{num_classes}|{side}"),
        subset_provenance=provenance,
        accuracy=accuracy,
        stage_seconds={"evaluate": elapsed},
        total_seconds=elapsed,
        diverged=diverged,
    )


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PcaConfig:
    """Everything run_pca needs besides the datasets and the root seed."""

    score: TrainConfig
    metric: str = "el2n"
    direction: str = "easy"
    tie_break: str = "sample_id"
    ipc_out: int = 10
    grid: GridSpec = GridSpec(k=2, cell_side=16)
    eval: EvalConfig = None  # type: ignore[assignment]
    root_seed: int = 0

    def selection_ipc(self) -> int:
        return self.ipc_out * self.grid.cells

    def describe(self) -> str:
        return (
            f"metric={self.metric} direction={self.direction} ipc_out={self.ipc_out} "
            f"k={self.grid.k} cell={self.grid.cell_side} root_seed={self.root_seed}"
        )


def _zero_score_table(dataset: DatasetView) -> ScoreTable:
    ids = np.array([s.sample_id for s in dataset.samples], dtype=np.int64)
    labels = dataset.labels()
    zeros = np.zeros(len(ids))
    return ScoreTable(ids, labels, zeros, zeros.astype(np.int64), zeros.copy())


def run_pca(
    train: DatasetView,
    test: DatasetView,
    config: PcaConfig,
    out_dir=None,
    table: ScoreTable | None = None,
) -> tuple[CompressedDataset, RunReport]:
    """Score -> select -> combine -> evaluate, with per-stage cost accounting.

    A precomputed score table skips the scoring stage (the ablation grids use
    this to share one dynamics run across settings). metric=random never
    trains a scoring model.
    """
    seeds = SeedSpec(config.root_seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    stage_seconds: dict[str, float] = {}
    stage_bytes: dict[str, int] = {}
    total_start = time.perf_counter()

    t0 = time.perf_counter()
    if table is None:
        if config.metric == "random":
            table = _zero_score_table(train)
        else:
            score_cfg = replace(config.score, seed=seeds.child_seed("score"))
            _, log = train_with_dynamics(train, score_cfg)
            table = build_score_table(log, score_cfg.early_window)
            if out is not None:
                save_scores(table, out / "scores.csv")
                stage_bytes["score"] = (out / "scores.csv").stat().st_size
    stage_seconds["score"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spec = SelectionSpec(
        metric=config.metric,
        direction=config.direction,
        ipc=config.selection_ipc(),
        seed=seeds.child_seed("select"),
        tie_break=config.tie_break,
    )
    subset = select_balanced(table, spec)
    if out is not None:
        save_subset(subset, out / "subset.txt")
        stage_bytes["select"] = (out / "subset.txt").stat().st_size
    stage_seconds["select"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    compressed = build_compressed_dataset(train, subset, config.grid, config.ipc_out)
    storage = storage_report(compressed)
    if out is not None:
        written = save_compressed_dataset(compressed, out / "compressed")
        manifest_bytes = written.pop("manifest.txt")
        stage_bytes["combine"] = sum(written.values())
        stage_bytes["combine_manifest"] = manifest_bytes
    stage_seconds["combine"] = time.perf_counter() - t0

    eval_cfg = replace(config.eval, seed=seeds.child_seed("eval"))
    eval_report = evaluate_hard_label(compressed, test, eval_cfg)
    stage_seconds["evaluate"] = eval_report.stage_seconds["evaluate"]

    report = RunReport(
        config_hash=_hash_text(f"pca|{config.describe()}|{eval_cfg!r}"),
        subset_provenance=subset.provenance,
        accuracy=eval_report.accuracy,
        stage_seconds=stage_seconds,
        stage_bytes=stage_bytes,
        storage=storage,
        diverged=eval_report.diverged,
    )
    report.total_seconds = time.perf_counter() - total_start
    if out is not None:
        report.write(out / "run_report.csv")
    return compressed, report


def desk_datasets(rc: RunConfig) -> tuple[DatasetView, DatasetView]:
    """The frozen desk-scale train/test split for a run configuration."""
    d = rc["dataset"]
    full = generate_synthetic_dataset(
        d["classes"], d["per_class"] + d["test_per_class"], d["side"], d["seed"]
    )
    return split_per_class(full, d["per_class"])


def pipeline_from_config(rc: RunConfig, num_classes: int, out_side: int) -> PipelineConfig:
    a = rc["augment"]
    crop = None
    if a["crop"]:
        crop = CropSpec(
            r_min=a["crop_min"],
            r_max=a["crop_max"],
            aspect_min=a["aspect_min"],
            aspect_max=a["aspect_max"],
            out_side=out_side,
        )
    mix = MixSpec(
        kind=a["mix"],
        mix_probability=a["mix_probability"],
        label_mixing=a["label_mixing"],
        cutout_fraction=a["cutout_fraction"],
    )
    return PipelineConfig(
        num_classes=num_classes,
        patch_mode=a["patch_mode"],
        crop=crop,
        flip_prob=a["flip_prob"],
        mix=mix,
    )


def pca_config_from_run_config(rc: RunConfig, root_seed: int) -> PcaConfig:
    d, s, sel, c, e = rc["dataset"], rc["score"], rc["select"], rc["combine"], rc["eval"]
    score = TrainConfig(
        epochs=s["epochs"],
        batch_size=s["batch_size"],
        learning_rate=s["learning_rate"],
        early_window=s["early_window"],
        hidden_dim=s["hidden_dim"],
    )
    grid = GridSpec(k=c["grid"], cell_side=c["cell_side"])
    pipeline = pipeline_from_config(rc, d["classes"], d["side"])
    eval_cfg = EvalConfig(
        pipeline=pipeline,
        epochs=e["epochs"],
        batch_size=e["batch_size"],
        learning_rate=e["learning_rate"],
        hidden_dim=e["hidden_dim"],
    )
    return PcaConfig(
        score=score,
        metric=sel["metric"],
        direction=sel["direction"],
        tie_break=sel["tie_break"],
        ipc_out=c["ipc_out"],
        grid=grid,
        eval=eval_cfg,
        root_seed=root_seed,
    )


def score_table_for(train: DatasetView, rc: RunConfig, root_seed: int) -> ScoreTable:
    s = rc["score"]
    cfg = TrainConfig(
        epochs=s["epochs"],
        batch_size=s["batch_size"],
        learning_rate=s["learning_rate"],
        early_window=s["early_window"],
        hidden_dim=s["hidden_dim"],
        seed=SeedSpec(root_seed).child_seed("score"),
    )
    _, log = train_with_dynamics(train, cfg)
    return build_score_table(log, cfg.early_window)


LADDER_STAGES = ("random", "prune", "combine", "augment")


def ablation_ladder(
    train: DatasetView,
    test: DatasetView,
    rc: RunConfig,
    root_seed: int,
    table: ScoreTable | None = None,
    include_shuffle: bool = False,
) -> dict[str, RunReport]:
    """The add-one-stage ladder: random, +prune, +combine, +augment.

    All rungs store the same pixel budget (ipc_out images per class at the
    dataset side). Optionally adds a patch-shuffle variant of the last rung.
    """
    base = pca_config_from_run_config(rc, root_seed)
    side = rc["dataset"]["side"]
    if side % base.grid.k:
        raise ValueError("dataset side must be divisible by grid k for the ladder")
    flat_grid = GridSpec(k=1, cell_side=side)
    if table is None and base.metric != "random":
        table = score_table_for(train, rc, root_seed)

    def with_pipeline(cfg: PcaConfig, patch_mode: str) -> PcaConfig:
        pipeline = replace(cfg.eval.pipeline, patch_mode=patch_mode, mix=MixSpec())
        return replace(cfg, eval=replace(cfg.eval, pipeline=pipeline))

    reports: dict[str, RunReport] = {}
    random_cfg = with_pipeline(
        replace(base, metric="random", grid=flat_grid), "none"
    )
    _, reports["random"] = run_pca(train, test, random_cfg)

    prune_cfg = with_pipeline(replace(base, grid=flat_grid), "none")
    _, reports["prune"] = run_pca(train, test, prune_cfg, table=table)

    combine_cfg = with_pipeline(base, "none")
    _, reports["combine"] = run_pca(train, test, combine_cfg, table=table)

    augment_cfg = with_pipeline(base, "extract")
    _, reports["augment"] = run_pca(train, test, augment_cfg, table=table)

    if include_shuffle:
        shuffle_cfg = with_pipeline(base, "shuffle")
        _, reports["augment-shuffle"] = run_pca(train, test, shuffle_cfg, table=table)
    return reports


def _write_table(path: Path, header_comment: str, columns: list[str], rows: list[list]) -> None:
    lines = [header_comment, ",".join(columns)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def run_table_experiments(
    tag: str,
    rc: RunConfig,
    seeds: list[int],
    out_dir,
    r_values=(0.08, 0.5, 1.0),
    mix_probabilities=(0.2, 0.5, 1.0),
    n_crops: int = 100,
) -> dict[str, Path]:
    """Run one experiment grid and write its report table(s).

    Tags: pruning-rules (metric x direction x balance grid), crop-ratio
    (training crop floor sweep), reg-augment (mixing strategies x mix
    probability), entropy-lab (the four crop-statistics tables).
    """
    if tag not in EXPERIMENT_TAGS:
        raise ValueError(f"unknown experiment tag {tag!r}; valid tags: {', '.join(EXPERIMENT_TAGS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = desk_datasets(rc)
    provenance = f"# tables tag={tag} seeds={','.join(str(s) for s in seeds)} dataset={train.name}"
    paths: dict[str, Path] = {}

    table_cache: dict[int, ScoreTable] = {}

    def cached_table(seed: int) -> ScoreTable:
        if seed not in table_cache:
            table_cache[seed] = score_table_for(train, rc, seed)
        return table_cache[seed]

    if tag == "pruning-rules":
        side = rc["dataset"]["side"]
        ipc = rc["combine"]["ipc_out"]
        flat = GridSpec(k=1, cell_side=side)
        rows = []
        for metric in ("el2n", "aum"):
            for direction in ("easy", "hard"):
                for balanced in (True, False):
                    accs = []
                    for seed in seeds:
                        base = pca_config_from_run_config(rc, seed)
                        table = cached_table(seed)
                        cfg = replace(
                            base,
                            metric=metric,
                            direction=direction,
                            grid=flat,
                            ipc_out=ipc,
                            eval=replace(
                                base.eval,
                                pipeline=replace(
                                    base.eval.pipeline, patch_mode="none", mix=MixSpec()
                                ),
                            ),
                        )
                        if balanced:
                            _, report = run_pca(train, test, cfg, table=table)
                        else:
                            sel = SelectionSpec(
                                metric=metric,
                                direction=direction,
                                ipc=ipc,
                                seed=SeedSpec(seed).child_seed("select"),
                            )
                            subset = select_unbalanced(table, sel, ipc * train.num_classes)
                            report = _evaluate_subset(train, test, subset, flat, cfg)
                        accs.append(report.accuracy)
                    label = f"{metric}-{direction}-{'balanced' if balanced else 'unbalanced'}"
                    rows.append([label] + [f"{a:.4f}" for a in accs] + [f"{np.mean(accs):.4f}"])
        columns = ["setting"] + [f"seed{s}" for s in seeds] + ["mean"]
        paths["pruning-rules"] = out / "pruning_rules.csv"
        _write_table(paths["pruning-rules"], provenance, columns, rows)

    elif tag == "crop-ratio":
        rows = []
        for r in r_values:
            accs = []
            for seed in seeds:
                base = pca_config_from_run_config(rc, seed)
                crop = replace(base.eval.pipeline.crop, r_min=float(r))
                pipeline = replace(base.eval.pipeline, crop=crop)
                cfg = replace(base, eval=replace(base.eval, pipeline=pipeline))
                _, report = run_pca(train, test, cfg, table=cached_table(seed))
                accs.append(report.accuracy)
            rows.append([f"{r:g}"] + [f"{a:.4f}" for a in accs] + [f"{np.mean(accs):.4f}"])
        columns = ["crop_r"] + [f"seed{s}" for s in seeds] + ["mean"]
        paths["crop-ratio"] = out / "crop_ratio.csv"
        _write_table(paths["crop-ratio"], provenance, columns, rows)

    elif tag == "reg-augment":
        settings = [("none", False)]
        for kind in ("cutmix", "mixup"):
            settings.append((kind, True))
            settings.append((kind, False))
        settings.append(("cutout", False))
        rows = []
        for kind, label_mixing in settings:
            for p in mix_probabilities if kind != "none" else (0.0,):
                accs = []
                for seed in seeds:
                    base = pca_config_from_run_config(rc, seed)
                    mix = MixSpec(kind=kind, mix_probability=float(p), label_mixing=label_mixing)
                    pipeline = replace(base.eval.pipeline, mix=mix)
                    cfg = replace(base, eval=replace(base.eval, pipeline=pipeline))
                    _, report = run_pca(train, test, cfg, table=cached_table(seed))
                    accs.append(report.accuracy)
                label = f"{kind}{'-labelmix' if label_mixing else ''}-p{p:g}"
                rows.append([label] + [f"{a:.4f}" for a in accs] + [f"{np.mean(accs):.4f}"])
        columns = ["setting"] + [f"seed{s}" for s in seeds] + ["mean"]
        paths["reg-augment"] = out / "reg_augment.csv"
        _write_table(paths["reg-augment"], provenance, columns, rows)

    else:  # entropy-lab
        root = seeds[0]
        observer, strata = entropy_lab_inputs(train, rc, root)
        r_list = [r for r in r_values if 0.0 < r < 1.0] or [0.08, 0.5, 0.8]
        lab_paths = run_entropy_lab(
            observer, strata, r_list, n_crops, SeedSpec(root), out
        )
        paths.update(lab_paths)
    return paths


def _evaluate_subset(
    train: DatasetView,
    test: DatasetView,
    subset: SubsetIndices,
    grid: GridSpec,
    cfg: PcaConfig,
) -> RunReport:
    """Evaluate an arbitrary (possibly unbalanced) subset as k=1 standardized images."""
    samples = tuple(train.by_id(i) for i in subset.sample_ids)
    view = DatasetView(samples, train.num_classes, name=f"{train.name}/manual-subset")
    eval_cfg = replace(cfg.eval, seed=SeedSpec(cfg.root_seed).child_seed("eval"))
    report = evaluate_hard_label(view, test, eval_cfg)
    report.subset_provenance = subset.provenance
    return report


def entropy_lab_inputs(
    train: DatasetView, rc: RunConfig, root_seed: int, strata_ipc: int = 10
) -> tuple[ToyModel, dict[str, DatasetView]]:
    """Observer model trained on the full desk set, plus the five strata views.

    Stratum size is an experiment parameter (ipc-10-style subsets by default),
    independent of the compression config.
    """
    s = rc["score"]
    observer_cfg = TrainConfig(
        epochs=s["epochs"],
        batch_size=s["batch_size"],
        learning_rate=s["learning_rate"],
        early_window=s["early_window"],
        hidden_dim=s["hidden_dim"],
        seed=SeedSpec(root_seed).child_seed("observer"),
    )
    observer, log = train_with_dynamics(train, observer_cfg)
    table = build_score_table(log, observer_cfg.early_window)
    subsets = build_difficulty_strata(table, strata_ipc, SeedSpec(root_seed).child_seed("strata"))
    strata = {name: train.subset(subsets[name].sample_ids, name) for name in STRATA_NAMES}
    return observer, strata


def cost_report(report: RunReport) -> str:
    """Comma-separated cost table: per-stage wall clock and bytes written."""
    lines = [
        f"# cost-report config_hash={report.config_hash}",
        "stage,seconds,bytes",
    ]
    stages = sorted(set(report.stage_seconds) | set(report.stage_bytes))
    for stage in stages:
        secs = report.stage_seconds.get(stage, 0.0)
        nbytes = report.stage_bytes.get(stage, 0)
        lines.append(f"{stage},{secs:.4f},{nbytes}")
    lines.append(f"total,{report.total_seconds:.4f},{sum(report.stage_bytes.values())}")
    return "\n".join(lines) + "\n"
