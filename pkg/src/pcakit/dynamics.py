"""Toy classifier with per-sample training-dynamics logging.

One hidden rectified layer, softmax head, plain mini-batch gradient descent
with no momentum. After every epoch the model is evaluated on the full
training set and the per-sample probabilities, margins, and correctness are
recorded; those records feed the three pruning metrics (el2n, forgetting,
aum) used by the selection stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import DatasetView
from .images import RasterImage
from .seeding import SeedSpec


FEATURE_CENTER = 0.5


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; names the offending epoch."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")
        self.epoch = epoch


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    seed: int = 0
    early_window: int = 10
    hidden_dim: int = 64

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 1 <= self.early_window <= self.epochs:
            raise ValueError(
                f"early_window must lie in [1, epochs={self.epochs}], got {self.early_window}"
            )
        if self.batch_size < 1 or self.learning_rate <= 0 or self.hidden_dim < 1:
            raise ValueError("batch_size, learning_rate, and hidden_dim must be positive")


class ToyModel:
    """One hidden rectified layer + softmax head over flattened pixels."""

    def __init__(self, input_dim: int, hidden_dim: int, num_classes: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.num_classes = num_classes
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / input_dim), size=(input_dim, hidden_dim))
        self.b1 = np.zeros(hidden_dim)
        self.w2 = rng.normal(0.0, np.sqrt(2.0 / hidden_dim), size=(hidden_dim, num_classes))
        self.b2 = np.zeros(num_classes)

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, item) -> np.ndarray:
        """Probability vector for one image or one flattened feature row."""
        x = features(item) if isinstance(item, RasterImage) else np.asarray(item, dtype=np.float64)
        return self.prob_matrix(x[None, :])[0]

    def step(self, x: np.ndarray, label_weights: np.ndarray, lr: float) -> float:
        """One gradient-descent step on mean cross-entropy; returns the batch loss."""
        n = x.shape[0]
        a = x @ self.w1 + self.b1
        h = np.maximum(a, 0.0)
        p = softmax(h @ self.w2 + self.b2)
        loss = float(-(label_weights * np.log(np.maximum(p, 1e-300))).sum() / n)
        dz = (p - label_weights) / n
        dw2 = h.T @ dz
        db2 = dz.sum(axis=0)
        dh = dz @ self.w2.T
        dh[a <= 0.0] = 0.0
        dw1 = x.T @ dh
        db1 = dh.sum(axis=0)
        self.w1 -= lr * dw1
        self.b1 -= lr * db1
        self.w2 -= lr * dw2
        self.b2 -= lr * db2
        return loss


def features(image_or_view) -> np.ndarray:
    """Flattened, centered float64 pixel features: (D,) for an image, (N, D) for a view.

    Pixels are shifted by -0.5 so inputs are zero-centered; this is part of
    the model definition, not a per-dataset statistic.
    """
    if isinstance(image_or_view, RasterImage):
        return image_or_view.pixels.reshape(-1).astype(np.float64) - FEATURE_CENTER
    return image_or_view.pixels().reshape(len(image_or_view), -1).astype(np.float64) - FEATURE_CENTER


@dataclass(frozen=True)
class DynamicsLog:
    """Per-sample, per-epoch records: probabilities, margins, correctness.

    Arrays are indexed (sample, epoch); the grid is complete by construction.
    """

    sample_ids: np.ndarray
    labels: np.ndarray
    probs: np.ndarray  # (N, E, C)
    margins: np.ndarray  # (N, E)
    correct: np.ndarray  # (N, E) bool
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        n, e, _ = self.probs.shape
        if self.margins.shape != (n, e) or self.correct.shape != (n, e):
            raise ValueError("margins/correct shape must match probs grid")
        self._index.update({int(s): i for i, s in enumerate(self.sample_ids)})

    @property
    def num_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def epochs(self) -> int:
        return self.probs.shape[1]

    def row(self, sample_id: int) -> int:
        try:
            return self._index[int(sample_id)]
        except KeyError:
            raise KeyError(f"sample_id {sample_id} not present in dynamics log") from None


def train_with_dynamics(dataset: DatasetView, config: TrainConfig) -> tuple[ToyModel, DynamicsLog]:
    """Train the toy model, logging evaluation-mode dynamics at every epoch end."""
    x = features(dataset)
    labels = dataset.labels()
    n, d = x.shape
    c = dataset.num_classes
    onehot = np.eye(c)[labels]
    spec = SeedSpec(config.seed)
    model = ToyModel(d, config.hidden_dim, c, spec.stream("init"))

    probs = np.empty((n, config.epochs, c))
    margins = np.empty((n, config.epochs))
    correct = np.empty((n, config.epochs), dtype=bool)
    rows = np.arange(n)
    for epoch in range(config.epochs):
        order = spec.stream("shuffle", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss = model.step(x[batch], onehot[batch], config.learning_rate)
            if not np.isfinite(loss):
                raise DivergenceError(epoch + 1)
        logits = model.logits(x)
        p = softmax(logits)
        true_logit = logits[rows, labels]
        masked = logits.copy()
        masked[rows, labels] = -np.inf
        probs[:, epoch] = p
        margins[:, epoch] = true_logit - masked.max(axis=1)
        correct[:, epoch] = np.argmax(p, axis=1) == labels

    log = DynamicsLog(
        sample_ids=np.array([s.sample_id for s in dataset.samples], dtype=np.int64),
        labels=labels,
        probs=probs,
        margins=margins,
        correct=correct,
    )
    return model, log


def el2n(log: DynamicsLog, sample_id: int, early_window: int) -> float:
    """Mean over the first early_window epochs of ||p - onehot(label)||_2."""
    if not 1 <= early_window <= log.epochs:
        raise ValueError(f"early_window must lie in [1, {log.epochs}], got {early_window}")
    i = log.row(sample_id)
    p = log.probs[i, :early_window].copy()
    p[:, log.labels[i]] -= 1.0
    return float(np.linalg.norm(p, axis=1).mean())


def forgetting(log: DynamicsLog, sample_id: int) -> int:
    """Number of correct -> incorrect transitions across consecutive epochs."""
    i = log.row(sample_id)
    c = log.correct[i]
    return int(np.sum(c[:-1] & ~c[1:]))


def aum(log: DynamicsLog, sample_id: int) -> float:
    """Mean over all logged epochs of (true-class logit - max other logit)."""
    i = log.row(sample_id)
    return float(log.margins[i].mean())


@dataclass(frozen=True)
class ScoreTable:
    """Per-sample pruning scores plus labels, one row per dataset sample."""

    sample_ids: np.ndarray
    labels: np.ndarray
    el2n: np.ndarray
    forgetting: np.ndarray
    aum: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.sample_ids)
        if len(set(int(s) for s in self.sample_ids)) != n:
            raise ValueError("duplicate sample_ids in score table")
        for arr in (self.labels, self.el2n, self.forgetting, self.aum):
            if len(arr) != n:
                raise ValueError("score table columns must have equal length")

    def __len__(self) -> int:
        return len(self.sample_ids)

    def metric(self, name: str) -> np.ndarray:
        if name not in ("el2n", "forgetting", "aum"):
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)


def build_score_table(log: DynamicsLog, early_window: int) -> ScoreTable:
    """All three metrics for every logged sample, in log order."""
    window = min(early_window, log.epochs)
    diff = log.probs[:, :window].copy()
    rows = np.arange(log.num_samples)
    diff[rows, :, log.labels] -= 1.0
    el2n_col = np.linalg.norm(diff, axis=2).mean(axis=1)
    forget_col = np.sum(log.correct[:, :-1] & ~log.correct[:, 1:], axis=1)
    aum_col = log.margins.mean(axis=1)
    return ScoreTable(
        sample_ids=log.sample_ids.copy(),
        labels=log.labels.copy(),
        el2n=el2n_col,
        forgetting=forget_col.astype(np.int64),
        aum=aum_col,
    )


SCORES_HEADER = "sample_id,label,el2n,forgetting,aum"


def save_scores(table: ScoreTable, path) -> None:
    """Comma-separated scores file; reals printed with 9 significant digits."""
    lines = [SCORES_HEADER]
    for i in range(len(table)):
        lines.append(
            f"{int(table.sample_ids[i])},{int(table.labels[i])},"
            f"{table.el2n[i]:.9g},{int(table.forgetting[i])},{table.aum[i]:.9g}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_scores(path) -> ScoreTable:
    """Read a scores file; externally computed scores in this format work too."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != SCORES_HEADER:
        raise ValueError(f"{path}: expected header {SCORES_HEADER!r}")
    ids, labels, e, f, a = [], [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 5:
            raise ValueError(f"{path}: malformed row {ln!r}")
        ids.append(int(parts[0]))
        labels.append(int(parts[1]))
        e.append(float(parts[2]))
        f.append(int(parts[3]))
        a.append(float(parts[4]))
    return ScoreTable(
        sample_ids=np.array(ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        el2n=np.array(e),
        forgetting=np.array(f, dtype=np.int64),
        aum=np.array(a),
    )
