"""Desk-scale dataset compression toolkit: prune, combine, augment, measure."""

from .augment import (
    AugmentedSample,
    CropSpec,
    MixSpec,
    PipelineConfig,
    apply_pipeline,
    augment_batch,
    cutmix,
    cutout,
    horizontal_flip,
    mixup,
    patch_extract,
    patch_shuffle,
    random_resized_crop,
)
from .combining import (
    CompositeImage,
    CompressedDataset,
    GridSpec,
    build_compressed_dataset,
    combine,
    extract_cell,
    load_compressed_dataset,
    save_compressed_dataset,
    storage_report,
)
from .container import ContainerFormatError, load_tensor_container, save_tensor_container
from .datasets import DatasetView, LabeledSample, generate_synthetic_dataset, split_per_class
from .dynamics import (
    DynamicsLog,
    ScoreTable,
    ToyModel,
    TrainConfig,
    aum,
    build_score_table,
    el2n,
    forgetting,
    load_scores,
    save_scores,
    train_with_dynamics,
)
from .entropy_lab import (
    AnalysisRecord,
    CorrelationReport,
    IncrementRecord,
    crop_entropy_increase_prob,
    crop_nll_increase_prob,
    entropy_increment_single_vs_repeated,
    nll,
    nll_entropy_correlation,
    predictive_entropy,
    selective_min_nll_crop,
)
from .harness import (
    EvalConfig,
    PcaConfig,
    RunReport,
    ablation_ladder,
    cost_report,
    desk_datasets,
    evaluate_hard_label,
    run_pca,
    run_table_experiments,
)
from .images import RasterImage, standardize_image
from .pruning import (
    BalanceReport,
    CcsSpec,
    SelectionSpec,
    SubsetIndices,
    balance_report,
    build_difficulty_strata,
    ccs_select,
    load_subset,
    save_subset,
    select_balanced,
    select_unbalanced,
)
from .runconfig import RunConfig, default_run_config, load_run_config, parse_run_config
from .seeding import SeedSpec

__version__ = "0.1.0"
