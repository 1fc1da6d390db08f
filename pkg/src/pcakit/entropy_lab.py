"""Executable statistics on cropping, NLL, and predictive entropy.

A trained observer model scores the original and randomly cropped versions
of every sample; the lab measures how often cropping raises NLL or entropy,
how the increment scales with the crop ratio (single crop of ratio r versus
two repeated crops of ratio sqrt(r)), selective minimum-NLL cropping, and
the correlation between per-sample NLL and entropy changes across difficulty
strata. Crop geometry is the resized-crop sampler with aspect fixed to 1 and
scale range (r, 1.0).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import CropSpec, apply_crop_draw, sample_crop_geometry
from .datasets import DatasetView, LabeledSample, validate_prob_vector
from .dynamics import ToyModel
from .images import RasterImage, standardize_image
from .seeding import SeedSpec

PROB_FLOOR = 1e-12


def predictive_entropy(probs) -> float:
    """Shannon entropy of a predictive distribution, in nats; 0 log 0 = 0."""
    p = validate_prob_vector(probs)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def nll(model: ToyModel, dataset: DatasetView) -> float:
    """Mean negative log-probability of the true labels under the model."""
    if model.num_classes != dataset.num_classes:
        raise ValueError(
            f"model has {model.num_classes} classes, dataset has {dataset.num_classes}"
        )
    total = 0.0
    for s in dataset.samples:
        p = model.predict(s.image)
        total += -np.log(max(float(p[s.label]), PROB_FLOOR))
    return total / len(dataset)


def experiment_crop_spec(r: float, out_side: int) -> CropSpec:
    """Aspect-1 crop sampler with scale range (r, 1.0)."""
    return CropSpec(r_min=r, r_max=1.0, aspect_min=1.0, aspect_max=1.0, out_side=out_side)


def _prepare(model: ToyModel, image: RasterImage) -> RasterImage:
    side = int(round(np.sqrt(model.input_dim / image.channels)))
    if image.height != side or image.width != side:
        return standardize_image(image, side)
    return image


def _sample_nll_entropy(model: ToyModel, image: RasterImage, label: int) -> tuple[float, float]:
    p = model.predict(image)
    return -np.log(max(float(p[label]), PROB_FLOOR)), predictive_entropy(p)


@dataclass(frozen=True, eq=False)
class AnalysisRecord:
    """Base and per-crop NLL/entropy for one sample."""

    sample_id: int
    base_nll: float
    base_entropy: float
    crop_nll: np.ndarray
    crop_entropy: np.ndarray

    @property
    def delta_nll(self) -> np.ndarray:
        return self.crop_nll - self.base_nll

    @property
    def delta_entropy(self) -> np.ndarray:
        return self.crop_entropy - self.base_entropy


def analyze_crops(
    model: ToyModel,
    dataset: DatasetView,
    r: float,
    n_crops: int,
    seeds: SeedSpec,
    tag: str = "crop-analysis",
) -> list[AnalysisRecord]:
    """Score n_crops random aspect-1 crops of every sample against its base."""
    if n_crops < 1:
        raise ValueError("n_crops must be >= 1")
    records = []
    for s in dataset.samples:
        base = _prepare(model, s.image)
        spec = experiment_crop_spec(r, base.height)
        stream = seeds.stream(tag, s.sample_id)
        b_nll, b_ent = _sample_nll_entropy(model, base, s.label)
        c_nll = np.empty(n_crops)
        c_ent = np.empty(n_crops)
        for i in range(n_crops):
            draw = sample_crop_geometry(stream, base.height, base.width, spec)
            cropped = apply_crop_draw(base, draw, spec.out_side)
            c_nll[i], c_ent[i] = _sample_nll_entropy(model, cropped, s.label)
        records.append(AnalysisRecord(s.sample_id, b_nll, b_ent, c_nll, c_ent))
    return records


def selective_min_nll_crop(
    model: ToyModel,
    sample: LabeledSample,
    n_crops: int,
    crop_spec: CropSpec,
    stream: np.random.Generator,
    include_identity: bool = True,
) -> tuple[RasterImage, float]:
    """The crop (out of n_crops draws) minimizing -log p(y | crop).

    With include_identity the untouched standardized image competes too, so
    the returned NLL never exceeds the original's. Ties keep the earliest
    candidate, hence the identity when present.
    """
    if n_crops < 1:
        raise ValueError("n_crops must be >= 1")
    base = _prepare(model, sample.image)
    candidates: list[RasterImage] = [base] if include_identity else []
    for _ in range(n_crops):
        draw = sample_crop_geometry(stream, base.height, base.width, crop_spec)
        candidates.append(apply_crop_draw(base, draw, crop_spec.out_side))
    nlls = [
        -np.log(max(float(model.predict(img)[sample.label]), PROB_FLOOR)) for img in candidates
    ]
    best = int(np.argmin(nlls))
    return candidates[best], float(nlls[best])


def crop_nll_increase_prob(
    model: ToyModel,
    dataset: DatasetView,
    r: float,
    n_crops: int,
    seeds: SeedSpec,
) -> tuple[float, float]:
    """Mean and std across samples of the fraction of crops that raise NLL."""
    records = analyze_crops(model, dataset, r, n_crops, seeds, tag="nll-increase")
    fractions = np.array([np.mean(rec.delta_nll > 0.0) for rec in records])
    return float(fractions.mean()), float(fractions.std())


def crop_entropy_increase_prob(
    model: ToyModel,
    dataset: DatasetView,
    r: float,
    n_crops: int,
    seeds: SeedSpec,
) -> tuple[float, float]:
    """Mean and std across samples of the fraction of crops that raise entropy."""
    records = analyze_crops(model, dataset, r, n_crops, seeds, tag="entropy-increase")
    fractions = np.array([np.mean(rec.delta_entropy > 0.0) for rec in records])
    return float(fractions.mean()), float(fractions.std())


@dataclass(frozen=True)
class IncrementRecord:
    r: float
    single_mean_increment: float
    repeated_mean_increment: float
    prob_increase: float  # single-crop path

    def __post_init__(self) -> None:
        if not 0.0 < self.r <= 1.0:
            raise ValueError("crop ratio must lie in (0, 1]")


def entropy_increment_single_vs_repeated(
    model: ToyModel,
    dataset: DatasetView,
    r: float,
    n_crops: int,
    seeds: SeedSpec,
) -> IncrementRecord:
    """Entropy increment of one crop of ratio r versus two crops of ratio sqrt(r).

    The repeated path draws exactly two crop geometries per sample draw, the
    second applied to the first crop's output.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("repeated-crop comparison needs r in (0, 1)")
    sqrt_r = float(np.sqrt(r))
    single_deltas = []
    repeated_deltas = []
    for s in dataset.samples:
        base = _prepare(model, s.image)
        side = base.height
        spec_single = experiment_crop_spec(r, side)
        spec_rep = experiment_crop_spec(sqrt_r, side)
        _, base_ent = _sample_nll_entropy(model, base, s.label)
        st_single = seeds.stream("increment-single", s.sample_id)
        st_rep = seeds.stream("increment-repeated", s.sample_id)
        for _ in range(n_crops):
            draw = sample_crop_geometry(st_single, side, side, spec_single)
            cropped = apply_crop_draw(base, draw, side)
            single_deltas.append(predictive_entropy(model.predict(cropped)) - base_ent)
        for _ in range(n_crops):
            first = apply_crop_draw(
                base, sample_crop_geometry(st_rep, side, side, spec_rep), side
            )
            second = apply_crop_draw(
                first, sample_crop_geometry(st_rep, side, side, spec_rep), side
            )
            repeated_deltas.append(predictive_entropy(model.predict(second)) - base_ent)
    single = np.array(single_deltas)
    repeated = np.array(repeated_deltas)
    return IncrementRecord(
        r=r,
        single_mean_increment=float(single.mean()),
        repeated_mean_increment=float(repeated.mean()),
        prob_increase=float(np.mean(single > 0.0)),
    )


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; nan when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length vectors")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt((dx * dx).sum())
    sy = np.sqrt((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        return float("nan")
    return float((dx * dy).sum() / (sx * sy))


def concordant_fraction(x: np.ndarray, y: np.ndarray) -> float:
    """Share of pairs whose changes move in the same direction; zeros concordant."""
    sx = np.sign(x)
    sy = np.sign(y)
    return float(np.mean((sx == sy) | (sx == 0.0) | (sy == 0.0)))


@dataclass(frozen=True)
class CorrelationReport:
    stratum: str
    rho: float
    rho_defined: bool
    concordant: float
    dl_mean: float
    dl_std: float
    dh_mean: float
    dh_std: float
    n: int


def nll_entropy_correlation(
    model: ToyModel,
    strata: dict[str, DatasetView],
    r: float,
    n_crops: int,
    seeds: SeedSpec,
) -> list[CorrelationReport]:
    """Correlation of per-sample mean (delta NLL, delta entropy) per stratum."""
    reports = []
    for name, view in strata.items():
        if len(view) < 3:
            raise ValueError(f"stratum {name!r} has {len(view)} samples, need >= 3")
        records = analyze_crops(model, view, r, n_crops, seeds, tag=f"corr-{name}")
        dl = np.array([rec.delta_nll.mean() for rec in records])
        dh = np.array([rec.delta_entropy.mean() for rec in records])
        rho = pearson(dl, dh)
        reports.append(
            CorrelationReport(
                stratum=name,
                rho=rho,
                rho_defined=bool(np.isfinite(rho)),
                concordant=concordant_fraction(dl, dh),
                dl_mean=float(dl.mean()),
                dl_std=float(dl.std()),
                dh_mean=float(dh.mean()),
                dh_std=float(dh.std()),
                n=len(records),
            )
        )
    return reports


NLL_INCREASE_STRATA = ("random", "hard-balanced", "easy-balanced")
FULL_STRATA = ("easy-only", "easy-balanced", "random", "hard-balanced", "hard-only")


def run_entropy_lab(
    model: ToyModel,
    strata: dict[str, DatasetView],
    r_values,
    n_crops: int,
    seeds: SeedSpec,
    out_dir,
    correlation_r: float | None = None,
) -> dict[str, Path]:
    """Write the four crop-statistics report tables plus a run manifest.

    Tables: probability of NLL increase (three strata), correlation of NLL
    and entropy changes (five strata), probability of entropy increase
    (five strata), and entropy increments single vs repeated (five strata);
    rows are crop ratios, columns strata.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    r_values = [float(r) for r in r_values]
    paths: dict[str, Path] = {}

    def provenance() -> str:
        return (
            f"# entropy-lab seed={seeds.root_seed} n_crops={n_crops} "
            f"r_values={','.join(f'{r:g}' for r in r_values)}"
        )

    nll_strata = [s for s in NLL_INCREASE_STRATA if s in strata]
    lines = [provenance(), "crop_r," + ",".join(f"{s}_mean,{s}_std" for s in nll_strata)]
    for r in r_values:
        cells = []
        for name in nll_strata:
            mean, std = crop_nll_increase_prob(model, strata[name], r, n_crops, seeds)
            cells.append(f"{mean:.6f},{std:.6f}")
        lines.append(f"{r:g}," + ",".join(cells))
    paths["nll_increase"] = out / "nll_increase_probability.csv"
    paths["nll_increase"].write_text("\n".join(lines) + "\n", encoding="ascii")

    full = [s for s in FULL_STRATA if s in strata]
    lines = [provenance(), "crop_r," + ",".join(f"{s}_mean,{s}_std" for s in full)]
    for r in r_values:
        cells = []
        for name in full:
            mean, std = crop_entropy_increase_prob(model, strata[name], r, n_crops, seeds)
            cells.append(f"{mean:.6f},{std:.6f}")
        lines.append(f"{r:g}," + ",".join(cells))
    paths["entropy_increase"] = out / "entropy_increase_probability.csv"
    paths["entropy_increase"].write_text("\n".join(lines) + "\n", encoding="ascii")

    lines = [provenance(), "crop_r," + ",".join(f"{s}_single,{s}_repeated" for s in full)]
    for r in r_values:
        cells = []
        for name in full:
            rec = entropy_increment_single_vs_repeated(model, strata[name], r, n_crops, seeds)
            cells.append(f"{rec.single_mean_increment:.6f},{rec.repeated_mean_increment:.6f}")
        lines.append(f"{r:g}," + ",".join(cells))
    paths["entropy_increment"] = out / "entropy_increment_single_vs_repeated.csv"
    paths["entropy_increment"].write_text("\n".join(lines) + "\n", encoding="ascii")

    corr_r = correlation_r if correlation_r is not None else min(r_values)
    reports = nll_entropy_correlation(
        model, {name: strata[name] for name in full}, corr_r, n_crops, seeds
    )
    lines = [
        provenance() + f" correlation_r={corr_r:g}",
        "stratum,rho,concordant,dl_mean,dl_std,dh_mean,dh_std,n",
    ]
    for rep in reports:
        rho = f"{rep.rho:.6f}" if rep.rho_defined else "undefined"
        lines.append(
            f"{rep.stratum},{rho},{rep.concordant:.6f},{rep.dl_mean:.6f},"
            f"{rep.dl_std:.6f},{rep.dh_mean:.6f},{rep.dh_std:.6f},{rep.n}"
        )
    paths["correlation"] = out / "nll_entropy_correlation.csv"
    paths["correlation"].write_text("\n".join(lines) + "\n", encoding="ascii")

    manifest = [
        "# entropy-lab run manifest",
        f"seed = {seeds.root_seed}",
        f"n_crops = {n_crops}",
        f"r_values = {','.join(f'{r:g}' for r in r_values)}",
        f"correlation_r = {corr_r:g}",
    ]
    for name in full:
        manifest.append(f"stratum_{name} = {strata[name].content_hash()}")
    paths["manifest"] = out / "manifest.txt"
    paths["manifest"].write_text("\n".join(manifest) + "\n", encoding="ascii")
    return paths
