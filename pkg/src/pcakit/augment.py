"""Training-time augmentation engine.

Geometric stages (patch extraction or shuffling on composites, random
resized crop, horizontal flip) run per sample on its own random stream;
regularization mixing (cutout, mixup, cutmix) runs afterwards, with mixing
partners drawn from the same batch. Stream consumption order per sample is
fixed: patch choice, crop attempts (area, log-aspect, top, left each), flip
uniform, mix-probability uniform, partner index, then the mix op's own
draws. Identical (input, config, stream) always yields identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combining import CompositeImage, extract_cell
from .datasets import LabeledSample
from .images import RasterImage, crop, flip_horizontal, resize
from .seeding import SeedSpec

MIX_KINDS = ("none", "cutout", "mixup", "cutmix")
PATCH_MODES = ("none", "extract", "shuffle")


@dataclass(frozen=True)
class CropSpec:
    """Resized-crop sampling: area fraction uniform in [r_min, r_max], aspect
    log-uniform in [aspect_min, aspect_max], up to max_attempts before the
    centered largest-square fallback."""

    r_min: float = 0.08
    r_max: float = 1.0
    aspect_min: float = 3.0 / 4.0
    aspect_max: float = 4.0 / 3.0
    out_side: int = 32
    max_attempts: int = 10

    def __post_init__(self) -> None:
        if not 0.0 < self.r_min <= self.r_max <= 1.0:
            raise ValueError(f"need 0 < r_min <= r_max <= 1, got ({self.r_min}, {self.r_max})")
        if not 0.0 < self.aspect_min <= self.aspect_max:
            raise ValueError("aspect bounds must be positive and ordered")
        if self.out_side < 1 or self.max_attempts < 1:
            raise ValueError("out_side and max_attempts must be >= 1")


@dataclass(frozen=True)
class CropDraw:
    top: int
    left: int
    height: int
    width: int
    fallback: bool  # True when max_attempts were exhausted


@dataclass(frozen=True)
class MixSpec:
    kind: str = "none"
    mix_probability: float = 0.0
    label_mixing: bool = False
    cutout_fraction: float = 0.5
    beta_alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in MIX_KINDS:
            raise ValueError(f"mix kind must be one of {MIX_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.mix_probability <= 1.0:
            raise ValueError("mix_probability must lie in [0, 1]")
        if not 0.0 < self.cutout_fraction <= 1.0:
            raise ValueError("cutout_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class AugmentedSample:
    """Image plus label weights; one nonzero weight unless labels were mixed."""

    image: RasterImage
    label_weights: np.ndarray

    def __post_init__(self) -> None:
        w = self.label_weights
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("label_weights must be a probability vector")

    @property
    def hard_label(self) -> int:
        return int(np.argmax(self.label_weights))


def one_hot(label: int, num_classes: int) -> np.ndarray:
    w = np.zeros(num_classes)
    w[label] = 1.0
    return w


def sample_crop_geometry(stream: np.random.Generator, height: int, width: int, spec: CropSpec) -> CropDraw:
    """Draw a crop rectangle; falls back to the centered largest square."""
    area = height * width
    for _ in range(spec.max_attempts):
        a = stream.uniform(spec.r_min, spec.r_max)
        log_ratio = stream.uniform(np.log(spec.aspect_min), np.log(spec.aspect_max))
        ratio = np.exp(log_ratio)
        w = int(np.rint(np.sqrt(a * area * ratio)))
        h = int(np.rint(np.sqrt(a * area / ratio)))
        if 1 <= w <= width and 1 <= h <= height:
            top = int(stream.integers(0, height - h + 1))
            left = int(stream.integers(0, width - w + 1))
            return CropDraw(top, left, h, w, fallback=False)
    side = min(height, width)
    return CropDraw((height - side) // 2, (width - side) // 2, side, side, fallback=True)


def apply_crop_draw(image: RasterImage, draw: CropDraw, out_side: int, mode: str = "bilinear") -> RasterImage:
    region = crop(image, draw.top, draw.left, draw.height, draw.width)
    return RasterImage(resize(region.pixels, out_side, out_side, mode=mode))


def random_resized_crop(
    image: RasterImage,
    spec: CropSpec,
    stream: np.random.Generator,
    mode: str = "bilinear",
    return_draw: bool = False,
):
    draw = sample_crop_geometry(stream, image.height, image.width, spec)
    out = apply_crop_draw(image, draw, spec.out_side, mode=mode)
    return (out, draw) if return_draw else out


def patch_extract(composite: CompositeImage, stream: np.random.Generator) -> RasterImage:
    """One uniformly chosen cell; later crops are confined to it."""
    idx = int(stream.integers(0, composite.grid.cells))
    row, col = divmod(idx, composite.grid.k)
    return extract_cell(composite, row, col)


def patch_shuffle(composite: CompositeImage, stream: np.random.Generator) -> RasterImage:
    """Uniformly random permutation of the cells; full-size image."""
    k, cell = composite.grid.k, composite.grid.cell_side
    perm = stream.permutation(composite.grid.cells)
    out = np.empty_like(composite.image.pixels)
    for dst, src in enumerate(perm):
        dr, dc = divmod(dst, k)
        sr, sc = divmod(int(src), k)
        out[dr * cell : (dr + 1) * cell, dc * cell : (dc + 1) * cell] = composite.image.pixels[
            sr * cell : (sr + 1) * cell, sc * cell : (sc + 1) * cell
        ]
    return RasterImage(out)


def horizontal_flip(image: RasterImage, stream: np.random.Generator, prob: float = 0.5) -> RasterImage:
    if stream.random() < prob:
        return flip_horizontal(image)
    return image


def cutout(image: RasterImage, spec: MixSpec, stream: np.random.Generator) -> RasterImage:
    """Zero out a square of side cutout_fraction * image side at a uniform center."""
    side = min(image.height, image.width)
    s = max(1, int(np.rint(spec.cutout_fraction * side)))
    cy = int(stream.integers(0, image.height))
    cx = int(stream.integers(0, image.width))
    y1 = max(0, cy - s // 2)
    y2 = min(image.height, cy - s // 2 + s)
    x1 = max(0, cx - s // 2)
    x2 = min(image.width, cx - s // 2 + s)
    px = image.pixels.copy()
    px[y1:y2, x1:x2] = 0.0
    return RasterImage(px)


def mixup(a: AugmentedSample, b: AugmentedSample, spec: MixSpec, stream: np.random.Generator) -> AugmentedSample:
    """Convex pixel blend with lambda ~ Beta(alpha, alpha); alpha=1 is uniform."""
    if a.image.pixels.shape != b.image.pixels.shape:
        raise ValueError("mixup requires identically shaped images")
    lam = float(stream.beta(spec.beta_alpha, spec.beta_alpha))
    px = lam * a.image.pixels.astype(np.float64) + (1.0 - lam) * b.image.pixels.astype(np.float64)
    weights = lam * a.label_weights + (1.0 - lam) * b.label_weights if spec.label_mixing else a.label_weights.copy()
    return AugmentedSample(RasterImage(px.astype(np.float32)), weights)


def cutmix(a: AugmentedSample, b: AugmentedSample, spec: MixSpec, stream: np.random.Generator) -> AugmentedSample:
    """Paste a rectangle of b over a; lambda is rescaled to the pasted area."""
    if a.image.pixels.shape != b.image.pixels.shape:
        raise ValueError("cutmix requires identically shaped images")
    h, w = a.image.height, a.image.width
    lam = float(stream.beta(spec.beta_alpha, spec.beta_alpha))
    cut = np.sqrt(1.0 - lam)
    ch = int(np.rint(h * cut))
    cw = int(np.rint(w * cut))
    cy = int(stream.integers(0, h))
    cx = int(stream.integers(0, w))
    y1 = max(0, cy - ch // 2)
    y2 = min(h, cy - ch // 2 + ch)
    x1 = max(0, cx - cw // 2)
    x2 = min(w, cx - cw // 2 + cw)
    px = a.image.pixels.copy()
    pasted = 0
    if y2 > y1 and x2 > x1:
        px[y1:y2, x1:x2] = b.image.pixels[y1:y2, x1:x2]
        pasted = (y2 - y1) * (x2 - x1)
    lam_adjusted = 1.0 - pasted / (h * w)
    if spec.label_mixing:
        weights = lam_adjusted * a.label_weights + (1.0 - lam_adjusted) * b.label_weights
    else:
        weights = a.label_weights.copy()
    return AugmentedSample(RasterImage(px), weights)


@dataclass(frozen=True)
class PipelineConfig:
    """Ordered stages: patch stage -> resized crop -> flip -> maybe one mix op."""

    num_classes: int
    patch_mode: str = "none"
    crop: CropSpec | None = CropSpec()
    flip_prob: float = 0.5
    mix: MixSpec = MixSpec()
    interpolation: str = "bilinear"

    def __post_init__(self) -> None:
        if self.patch_mode not in PATCH_MODES:
            raise ValueError(f"patch_mode must be one of {PATCH_MODES}, got {self.patch_mode!r}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")


def _geometric(item, config: PipelineConfig, stream: np.random.Generator) -> AugmentedSample:
    if isinstance(item, CompositeImage):
        label = item.label
        if config.patch_mode == "extract":
            image = patch_extract(item, stream)
        elif config.patch_mode == "shuffle":
            image = patch_shuffle(item, stream)
        else:
            image = item.image
    elif isinstance(item, LabeledSample):
        label, image = item.label, item.image
    else:
        raise TypeError(f"cannot augment {type(item).__name__}")
    if config.crop is not None:
        image = random_resized_crop(image, config.crop, stream, mode=config.interpolation)
    if config.flip_prob > 0.0:
        image = horizontal_flip(image, stream, config.flip_prob)
    return AugmentedSample(image, one_hot(label, config.num_classes))


def apply_pipeline(
    item,
    config: PipelineConfig,
    stream: np.random.Generator,
    partner: AugmentedSample | None = None,
) -> AugmentedSample:
    """Full pipeline on one composite or labeled sample.

    Mixing (when configured) draws its probability gate first; mixup/cutmix
    then require a partner, cutout operates on the sample alone.
    """
    out = _geometric(item, config, stream)
    mix = config.mix
    if mix.kind == "none" or mix.mix_probability <= 0.0:
        return out
    if stream.random() >= mix.mix_probability:
        return out
    if mix.kind == "cutout":
        return AugmentedSample(cutout(out.image, mix, stream), out.label_weights)
    if partner is None:
        raise ValueError(f"{mix.kind} requires a partner sample")
    op = mixup if mix.kind == "mixup" else cutmix
    return op(out, partner, mix, stream)


def augment_batch(items, config: PipelineConfig, seeds: SeedSpec, tag: str) -> list:
    """Augment a batch with per-sample streams keyed by (tag, sample_id).

    Mixing partners are drawn uniformly from the batch excluding self, from
    the sample's own stream, after its probability gate; partners contribute
    their post-geometric form. Batches of one sample never mix.
    """
    items = list(items)
    streams = [seeds.stream(tag, item.sample_id) for item in items]
    bases = [_geometric(item, config, st) for item, st in zip(items, streams)]
    mix = config.mix
    if mix.kind == "none" or mix.mix_probability <= 0.0:
        return bases
    out = []
    for i, (base, st) in enumerate(zip(bases, streams)):
        if st.random() >= mix.mix_probability:
            out.append(base)
            continue
        if mix.kind == "cutout":
            out.append(AugmentedSample(cutout(base.image, mix, st), base.label_weights))
            continue
        if len(items) < 2:
            out.append(base)
            continue
        j = int(st.integers(0, len(items) - 1))
        if j >= i:
            j += 1
        op = mixup if mix.kind == "mixup" else cutmix
        out.append(op(base, bases[j], mix, st))
    return out


def disabled_pipeline(num_classes: int) -> PipelineConfig:
    """Identity pipeline: no patch stage, no crop, no flip, no mixing."""
    return PipelineConfig(num_classes=num_classes, patch_mode="none", crop=None, flip_prob=0.0, mix=MixSpec())


def pca_default_pipeline(num_classes: int, out_side: int) -> PipelineConfig:
    """Patch extraction, resized crop (0.08, 1.0), flip; no mixing."""
    return PipelineConfig(
        num_classes=num_classes,
        patch_mode="extract",
        crop=CropSpec(r_min=0.08, r_max=1.0, out_side=out_side),
        flip_prob=0.5,
        mix=MixSpec(),
    )
