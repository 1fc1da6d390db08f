"""Labeled samples, dataset views, and the synthetic desk-scale generator.

The generator produces procedurally textured classes whose samples span a
difficulty spectrum. Each class owns a few distinct low-frequency texture
modes (sinusoidal gratings plus a color anchor); a sample picks one mode,
jitters it geometrically, and degrades with its difficulty draw: pattern
contrast fades, an intruder class's texture blends in (the hardest samples
are nearly mislabeled), and pixel noise grows. Mode coverage is what makes
additional samples per class genuinely informative at high pruning ratios.
Everything is a pure function of (num_classes, per_class, side, seed).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .images import RasterImage
from .seeding import SeedSpec

# Per-sample index packing inside the generator's stream ids: class c, index j
# map to c * _CLASS_STRIDE + j, so pixels depend only on (seed, c, j) and a
# dataset is a per-class prefix of any larger dataset with the same seed.
_CLASS_STRIDE = 2**20

# Texture constants, frozen after tuning against the toy trainer. A class is
# a color anchor plus its own grating; every sample additionally blends in
# the grating of one of a few fixed confuser classes (its "mode"). A model
# that never trained on a (class, mode) pair genuinely confuses those test
# samples with the confuser class, so retaining more samples per class pays
# exactly when it widens mode coverage.
PATTERN_AMPLITUDE = 0.38
FREQ_RANGE = (0.5, 1.6)
MODES_PER_CLASS = 3
OWN_WEIGHT = 0.45
CONFUSER_WEIGHT = 0.55
CLASS_DIFFICULTY_SPAN = 0.45
SAMPLE_DIFFICULTY_SPAN = 0.55
CONTRAST_DECAY = 0.45
INTRUDER_SPAN = 0.9
INTRUDER_POWER = 1.6
NOISE_SIGMA_MIN = 0.02
NOISE_SIGMA_SPAN = 0.25
JITTER_PIXELS = 3.0


@dataclass(frozen=True)
class LabeledSample:
    image: RasterImage
    label: int
    sample_id: int

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")
        if self.sample_id < 0:
            raise ValueError(f"sample_id must be non-negative, got {self.sample_id}")


@dataclass(frozen=True)
class DatasetView:
    """Ordered, immutable collection of labeled samples."""

    samples: tuple[LabeledSample, ...]
    num_classes: int
    name: str = ""
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.samples) < 1:
            raise ValueError("dataset must contain at least one sample")
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample_ids must be unique within a DatasetView")
        for s in self.samples:
            if s.label >= self.num_classes:
                raise ValueError(
                    f"label {s.label} out of range for {self.num_classes} classes"
                )
        self._by_id.update({s.sample_id: s for s in self.samples})

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def by_id(self, sample_id: int) -> LabeledSample:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise KeyError(f"sample_id {sample_id} not in dataset {self.name!r}") from None

    def subset(self, sample_ids, name: str = "") -> "DatasetView":
        samples = tuple(self.by_id(i) for i in sample_ids)
        return DatasetView(samples, self.num_classes, name or f"{self.name}/subset")

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def pixels(self) -> np.ndarray:
        """Stacked (N, H, W, C) float32 array; requires uniform shapes."""
        return np.stack([s.image.pixels for s in self.samples])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for s in self.samples:
            h.update(s.sample_id.to_bytes(8, "little"))
            h.update(s.label.to_bytes(4, "little"))
            h.update(np.ascontiguousarray(s.image.pixels, dtype="<f4").tobytes())
        return h.hexdigest()


def validate_prob_vector(probs: np.ndarray, num_classes: int | None = None) -> np.ndarray:
    """Check the probability-vector invariants: entries >= 0, sum 1 within 1e-9."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"probability vector must be rank 1, got rank {p.ndim}")
    if num_classes is not None and p.shape[0] != num_classes:
        raise ValueError(f"expected {num_classes} entries, got {p.shape[0]}")
    if p.min() < 0:
        raise ValueError(f"negative probability {p.min()}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1 within 1e-9")
    return p


def _grating(rng: np.random.Generator, channels: int):
    freq = rng.uniform(FREQ_RANGE[0], FREQ_RANGE[1], size=2) * rng.choice([-1.0, 1.0], size=2)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    weights = rng.uniform(-1.0, 1.0, size=channels)
    weights = weights / max(np.abs(weights).max(), 1e-9)
    return freq, phase, weights


def _class_texture(rng: np.random.Generator, channels: int):
    """Color anchor and class grating."""
    color = rng.uniform(0.3, 0.7, size=channels)
    return color, _grating(rng, channels)


def _eval_grating(grating, side, dx, dy):
    freq, phase, weights = grating
    ys, xs = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    u = (xs + dx) / side
    v = (ys + dy) / side
    g = np.sin(2.0 * np.pi * (freq[0] * u + freq[1] * v) + phase)
    return g[:, :, None] * weights[None, None, :]


def _confuser(label: int, mode: int, num_classes: int) -> int:
    return (label + 1 + mode) % num_classes


def _render_sample(textures, label: int, mode: int, side, dx, dy):
    color, own = textures[label]
    _, confuser = textures[_confuser(label, mode, len(textures))]
    base = OWN_WEIGHT * _eval_grating(own, side, dx, dy)
    base += CONFUSER_WEIGHT * _eval_grating(confuser, side, dx, dy)
    return color[None, None, :] + PATTERN_AMPLITUDE * base


def generate_synthetic_dataset(
    num_classes: int, per_class: int, side: int, seed: int, name: str = ""
) -> DatasetView:
    """Deterministic procedural dataset with per-sample difficulty variation."""
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if per_class > _CLASS_STRIDE:
        raise ValueError(f"per_class must be <= {_CLASS_STRIDE}")
    spec = SeedSpec(seed)
    channels = 3
    textures = []
    offsets = []
    for c in range(num_classes):
        class_rng = spec.stream("synth-class", c)
        textures.append(_class_texture(class_rng, channels))
        offsets.append(class_rng.uniform(0.0, CLASS_DIFFICULTY_SPAN))
    samples = []
    for c in range(num_classes):
        for j in range(per_class):
            rng = spec.stream("synth-sample", c * _CLASS_STRIDE + j)
            difficulty = min(offsets[c] + rng.uniform(0.0, SAMPLE_DIFFICULTY_SPAN), 1.0)
            mode = int(rng.integers(0, MODES_PER_CLASS))
            dx, dy = rng.uniform(-JITTER_PIXELS, JITTER_PIXELS, size=2)
            intruder = (c + 1 + int(rng.integers(0, num_classes - 1))) % num_classes
            intruder_mode = int(rng.integers(0, MODES_PER_CLASS))
            own = _render_sample(textures, c, mode, side, dx, dy)
            other = _render_sample(textures, intruder, intruder_mode, side, dx, dy)
            blend = INTRUDER_SPAN * difficulty**INTRUDER_POWER
            mixed = (1.0 - blend) * own + blend * other
            contrast = 1.0 - CONTRAST_DECAY * difficulty
            mixed = 0.5 + contrast * (mixed - 0.5)
            sigma = NOISE_SIGMA_MIN + difficulty * NOISE_SIGMA_SPAN
            noisy = mixed + rng.normal(0.0, sigma, size=mixed.shape)
            pixels = np.clip(noisy, 0.0, 1.0).astype(np.float32)
            samples.append(
                LabeledSample(RasterImage(pixels), label=c, sample_id=c * per_class + j)
            )
    view_name = name or f"synthetic-c{num_classes}-n{per_class}-s{side}-seed{seed}"
    return DatasetView(tuple(samples), num_classes, view_name)


def split_per_class(view: DatasetView, train_per_class: int) -> tuple[DatasetView, DatasetView]:
    """Split a class-major synthetic view into (train, test) by per-class position.

    The first ``train_per_class`` samples of each class go to train; ids stay
    disjoint by construction, which is what downstream leakage checks rely on.
    """
    counts: dict[int, int] = {}
    train, test = [], []
    for s in view.samples:
        k = counts.get(s.label, 0)
        counts[s.label] = k + 1
        (train if k < train_per_class else test).append(s)
    if not train or not test:
        raise ValueError("split leaves an empty train or test set")
    return (
        DatasetView(tuple(train), view.num_classes, f"{view.name}/train"),
        DatasetView(tuple(test), view.num_classes, f"{view.name}/test"),
    )
