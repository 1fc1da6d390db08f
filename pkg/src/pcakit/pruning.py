"""Subset selection: directional pruning rules, strict class balance,
random baseline, coverage-style stratified sampling, and balance diagnostics.

Easy/hard is metric-dependent: low el2n or few forgetting events is easy,
high accumulated margin (aum) is easy. Ties break on ascending sample_id by
default so selections are reproducible; a seeded random tie-break exists for
studying tie degeneracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ScoreTable
from .seeding import SeedSpec

METRICS = ("el2n", "forgetting", "aum", "random")
DIRECTIONS = ("easy", "hard")

# Metrics where ascending score means easier samples.
_ASCENDING_EASY = {"el2n": True, "forgetting": True, "aum": False}


class SelectionError(ValueError):
    pass


class InsufficientClassError(SelectionError):
    def __init__(self, label: int, have: int, need: int):
        super().__init__(f"class {label} has {have} rows, selection needs {need}")
        self.label = label


class QuotaError(SelectionError):
    def __init__(self, label: int, stratum: int, message: str):
        super().__init__(f"class {label}, stratum {stratum}: {message}")
        self.label = label
        self.stratum = stratum


@dataclass(frozen=True)
class SelectionSpec:
    metric: str = "el2n"
    direction: str = "easy"
    ipc: int = 1
    balanced: bool = True
    seed: int = 0
    tie_break: str = "sample_id"  # or "random"

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.ipc < 1:
            raise ValueError(f"ipc must be >= 1, got {self.ipc}")
        if self.tie_break not in ("sample_id", "random"):
            raise ValueError(f"tie_break must be sample_id or random, got {self.tie_break!r}")

    def provenance(self) -> str:
        return (
            f"metric={self.metric} direction={self.direction} ipc={self.ipc} "
            f"balanced={str(self.balanced).lower()} seed={self.seed} tie={self.tie_break}"
        )


@dataclass(frozen=True)
class CcsSpec:
    """Coverage-style selection: drop the hardest fraction, stratify, sample."""

    ipc: int
    metric: str = "aum"
    mislabeled_fraction: float = 0.3
    num_strata: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.metric not in ("el2n", "forgetting", "aum"):
            raise ValueError(f"ccs base metric must be a score metric, got {self.metric!r}")
        if not 0.0 <= self.mislabeled_fraction < 1.0:
            raise ValueError("mislabeled_fraction must lie in [0, 1)")
        if self.num_strata < 1 or self.ipc < 1:
            raise ValueError("num_strata and ipc must be >= 1")

    def provenance(self) -> str:
        return (
            f"metric=ccs-{self.metric} beta={self.mislabeled_fraction:g} "
            f"strata={self.num_strata} ipc={self.ipc} seed={self.seed}"
        )


@dataclass(frozen=True)
class SubsetIndices:
    """Ordered selected sample_ids plus the provenance that produced them."""

    sample_ids: tuple
    provenance: str = ""

    def __post_init__(self) -> None:
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("subset contains duplicate sample_ids")

    def __len__(self) -> int:
        return len(self.sample_ids)

    def __iter__(self):
        return iter(self.sample_ids)


def _order_key(table: ScoreTable, metric: str, direction: str) -> np.ndarray:
    """Values whose ascending order is the selection order (best first)."""
    scores = table.metric(metric).astype(np.float64)
    ascending_easy = _ASCENDING_EASY[metric]
    ascending = ascending_easy if direction == "easy" else not ascending_easy
    return scores if ascending else -scores


def _tie_values(table: ScoreTable, spec_seed: int, tie_break: str) -> np.ndarray:
    if tie_break == "sample_id":
        return table.sample_ids.astype(np.float64)
    spec = SeedSpec(spec_seed)
    return np.array(
        [spec.stream("select-tiebreak", int(s)).random() for s in table.sample_ids]
    )


def _class_rows(table: ScoreTable) -> dict[int, np.ndarray]:
    labels = table.labels
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def select_balanced(table: ScoreTable, spec: SelectionSpec) -> SubsetIndices:
    """Exactly ipc ids per class, best-first by the direction-ordered metric."""
    by_class = _class_rows(table)
    for label, rows in by_class.items():
        if len(rows) < spec.ipc:
            raise InsufficientClassError(label, len(rows), spec.ipc)
    chosen: list[int] = []
    if spec.metric == "random":
        seeds = SeedSpec(spec.seed)
        for label in sorted(by_class):
            ids = np.sort(table.sample_ids[by_class[label]])
            rng = seeds.stream("select-random", label)
            pick = rng.choice(ids, size=spec.ipc, replace=False)
            chosen.extend(int(i) for i in pick)
    else:
        key = _order_key(table, spec.metric, spec.direction)
        tie = _tie_values(table, spec.seed, spec.tie_break)
        for label in sorted(by_class):
            rows = by_class[label]
            order = rows[np.lexsort((tie[rows], key[rows]))]
            chosen.extend(int(i) for i in table.sample_ids[order[: spec.ipc]])
    return SubsetIndices(tuple(chosen), spec.provenance())


def select_unbalanced(table: ScoreTable, spec: SelectionSpec, total_count: int) -> SubsetIndices:
    """Global best total_count rows, class counts unconstrained."""
    if total_count > len(table):
        raise SelectionError(f"total_count {total_count} exceeds table size {len(table)}")
    if total_count < 1:
        raise SelectionError("total_count must be >= 1")
    if spec.metric == "random":
        ids = np.sort(table.sample_ids)
        rng = SeedSpec(spec.seed).stream("select-random-global")
        pick = rng.choice(ids, size=total_count, replace=False)
        chosen = [int(i) for i in pick]
    else:
        key = _order_key(table, spec.metric, spec.direction)
        tie = _tie_values(table, spec.seed, spec.tie_break)
        order = np.lexsort((tie, key))
        chosen = [int(i) for i in table.sample_ids[order[:total_count]]]
    prov = spec.provenance().replace("balanced=true", "balanced=false")
    return SubsetIndices(tuple(chosen), f"{prov} total={total_count}")


def ccs_select(table: ScoreTable, spec: CcsSpec) -> SubsetIndices:
    """Per class: drop the hardest fraction, then sample equal-width score strata.

    Stratum quotas are ceil/floor(ipc / num_strata) with earlier strata taking
    the extras; an empty stratum hands its quota to the next nonempty one.
    """
    by_class = _class_rows(table)
    key = _order_key(table, spec.metric, "easy")  # ascending = easier
    seeds = SeedSpec(spec.seed)
    base, extra = divmod(spec.ipc, spec.num_strata)
    quotas = [base + (1 if i < extra else 0) for i in range(spec.num_strata)]
    chosen: list[int] = []
    for label in sorted(by_class):
        rows = by_class[label]
        n_drop = int(np.floor(spec.mislabeled_fraction * len(rows)))
        order = rows[np.lexsort((table.sample_ids[rows], key[rows]))]
        kept = order[: len(rows) - n_drop] if n_drop else order
        if len(kept) < spec.ipc:
            raise InsufficientClassError(label, len(kept), spec.ipc)
        scores = key[kept]
        lo, hi = float(scores.min()), float(scores.max())
        if hi > lo:
            idx = np.minimum(
                ((scores - lo) / (hi - lo) * spec.num_strata).astype(np.int64),
                spec.num_strata - 1,
            )
        else:
            idx = np.full(len(kept), spec.num_strata - 1, dtype=np.int64)
        rng = seeds.stream("ccs-class", label)
        carry = 0
        for stratum in range(spec.num_strata):
            members = kept[idx == stratum]
            want = quotas[stratum] + carry
            if len(members) == 0:
                carry = want
                continue
            if want > len(members):
                raise QuotaError(label, stratum, f"quota {want} exceeds {len(members)} members")
            if want:
                ids = np.sort(table.sample_ids[members])
                pick = rng.choice(ids, size=want, replace=False)
                chosen.extend(int(i) for i in pick)
            carry = 0
        if carry:
            raise QuotaError(
                label, spec.num_strata - 1, f"{carry} unplaced draws after the last stratum"
            )
    return SubsetIndices(tuple(chosen), spec.provenance())


@dataclass(frozen=True)
class BalanceReport:
    """Per-class composition of a subset plus forgetting-tie degeneracy flags."""

    per_class_count: dict
    per_class_score: dict  # label -> (mean, min, max) of the reported metric
    metric: str
    zero_forgetting_total: int
    zero_forgetting_per_class: dict
    degenerate: bool
    degenerate_classes: tuple

    def counts_balanced(self) -> bool:
        values = set(self.per_class_count.values())
        return len(values) == 1


def balance_report(table: ScoreTable, subset: SubsetIndices, metric: str | None = None) -> BalanceReport:
    """Composition diagnostics; flags score-tie degeneracy for forgetting.

    Degeneracy: some class's zero-forgetting tie set is only partially
    included, so a seeded tie-break (or a different seed) could legitimately
    have picked a different subset.
    """
    if metric is None:
        metric = "el2n"
        for token in subset.provenance.split():
            if token.startswith("metric="):
                value = token.split("=", 1)[1].removeprefix("ccs-")
                if value in ("el2n", "forgetting", "aum"):
                    metric = value
    id_to_row = {int(s): i for i, s in enumerate(table.sample_ids)}
    rows = []
    for sid in subset.sample_ids:
        if int(sid) not in id_to_row:
            raise SelectionError(f"subset id {sid} not present in score table")
        rows.append(id_to_row[int(sid)])
    rows = np.array(rows, dtype=np.int64)

    scores = table.metric(metric).astype(np.float64)
    per_class_count: dict[int, int] = {}
    per_class_score: dict[int, tuple] = {}
    taken_zero: dict[int, int] = {}
    for label in np.unique(table.labels):
        label = int(label)
        mine = rows[table.labels[rows] == label]
        per_class_count[label] = len(mine)
        if len(mine):
            vals = scores[mine]
            per_class_score[label] = (float(vals.mean()), float(vals.min()), float(vals.max()))
            taken_zero[label] = int(np.sum(table.forgetting[mine] == 0))
        else:
            per_class_score[label] = (float("nan"),) * 3
            taken_zero[label] = 0

    zero_per_class = {
        int(c): int(np.sum((table.labels == c) & (table.forgetting == 0)))
        for c in np.unique(table.labels)
    }
    degenerate_classes = tuple(
        c for c in sorted(zero_per_class)
        if 0 < taken_zero[c] < zero_per_class[c]
    )
    return BalanceReport(
        per_class_count=per_class_count,
        per_class_score=per_class_score,
        metric=metric,
        zero_forgetting_total=int(np.sum(table.forgetting == 0)),
        zero_forgetting_per_class=zero_per_class,
        degenerate=bool(degenerate_classes),
        degenerate_classes=degenerate_classes,
    )


STRATA_NAMES = ("easy-only", "easy-balanced", "random", "hard-balanced", "hard-only")


def build_difficulty_strata(
    table: ScoreTable, ipc: int, seed: int, metric: str = "el2n"
) -> dict[str, SubsetIndices]:
    """The five standard difficulty strata, each ipc * num_classes samples.

    Unbalanced strata take the global extremes; balanced ones take per-class
    extremes; random is balanced uniform.
    """
    num_classes = len(np.unique(table.labels))
    total = ipc * num_classes
    return {
        "easy-only": select_unbalanced(
            table, SelectionSpec(metric=metric, direction="easy", ipc=ipc, seed=seed), total
        ),
        "easy-balanced": select_balanced(
            table, SelectionSpec(metric=metric, direction="easy", ipc=ipc, seed=seed)
        ),
        "random": select_balanced(
            table, SelectionSpec(metric="random", direction="easy", ipc=ipc, seed=seed)
        ),
        "hard-balanced": select_balanced(
            table, SelectionSpec(metric=metric, direction="hard", ipc=ipc, seed=seed)
        ),
        "hard-only": select_unbalanced(
            table, SelectionSpec(metric=metric, direction="hard", ipc=ipc, seed=seed), total
        ),
    }


def save_subset(subset: SubsetIndices, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# subset {subset.provenance}\n")
        for sid in subset.sample_ids:
            fh.write(f"{int(sid)}\n")


def load_subset(path) -> SubsetIndices:
    provenance = ""
    ids = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                provenance = line.lstrip("# ").removeprefix("subset ").strip()
                continue
            ids.append(int(line))
    if not ids:
        raise SelectionError(f"{path}: subset file contains no sample ids")
    return SubsetIndices(tuple(ids), provenance)
