import itertools

import numpy as np
import pytest

from pcakit.dynamics import ScoreTable
from pcakit.pruning import (
    CcsSpec,
    InsufficientClassError,
    QuotaError,
    SelectionError,
    SelectionSpec,
    balance_report,
    build_difficulty_strata,
    ccs_select,
    load_subset,
    save_subset,
    select_balanced,
    select_unbalanced,
)


def table_from(scores, labels, sample_ids=None, forgetting=None, aum=None):
    n = len(scores)
    ids = np.array(sample_ids if sample_ids is not None else range(n), dtype=np.int64)
    return ScoreTable(
        sample_ids=ids,
        labels=np.array(labels, dtype=np.int64),
        el2n=np.array(scores, dtype=np.float64),
        forgetting=np.array(forgetting if forgetting is not None else [0] * n, dtype=np.int64),
        aum=np.array(aum if aum is not None else scores, dtype=np.float64),
    )


def selection_order_key(metric, direction, score, sample_id):
    ascending = direction == "easy" if metric in ("el2n", "forgetting") else direction == "hard"
    return (score if ascending else -score, sample_id)


def brute_force_balanced(table, metric, direction, ipc):
    """Exhaustive per-class enumeration oracle."""
    chosen = []
    for label in sorted(set(int(v) for v in table.labels)):
        rows = [i for i in range(len(table)) if table.labels[i] == label]
        best = None
        for combo in itertools.combinations(rows, ipc):
            key = tuple(
                sorted(
                    selection_order_key(
                        metric, direction, table.metric(metric)[i], int(table.sample_ids[i])
                    )
                    for i in combo
                )
            )
            if best is None or key < best[0]:
                best = (key, combo)
        ordered = sorted(
            best[1],
            key=lambda i: selection_order_key(
                metric, direction, table.metric(metric)[i], int(table.sample_ids[i])
            ),
        )
        chosen.extend(int(table.sample_ids[i]) for i in ordered)
    return tuple(chosen)


def test_balanced_easy_el2n_example():
    table = table_from([0.1, 0.9, 0.2, 0.8], [0, 0, 1, 1])
    spec = SelectionSpec(metric="el2n", direction="easy", ipc=1)
    assert select_balanced(table, spec).sample_ids == (0, 2)


def test_balanced_hard_example():
    table = table_from([0.1, 0.9, 0.2, 0.8], [0, 0, 1, 1])
    spec = SelectionSpec(metric="el2n", direction="hard", ipc=1)
    assert select_balanced(table, spec).sample_ids == (1, 3)


def test_aum_direction_is_reversed():
    table = table_from([0.0] * 4, [0, 0, 1, 1], aum=[5.0, 1.0, 3.0, 9.0])
    spec = SelectionSpec(metric="aum", direction="easy", ipc=1)
    assert select_balanced(table, spec).sample_ids == (0, 3)  # high margin = easy
    spec = SelectionSpec(metric="aum", direction="hard", ipc=1)
    assert select_balanced(table, spec).sample_ids == (1, 2)


def test_balanced_matches_enumeration_oracle():
    rng = np.random.default_rng(0)
    scores = rng.random(20)
    labels = np.repeat(np.arange(4), 5)
    table = table_from(scores, labels, aum=rng.normal(size=20))
    for metric in ("el2n", "aum"):
        for direction in ("easy", "hard"):
            spec = SelectionSpec(metric=metric, direction=direction, ipc=2)
            got = select_balanced(table, spec).sample_ids
            assert got == brute_force_balanced(table, metric, direction, 2)


def test_balanced_insufficient_class_errors():
    table = table_from([0.1, 0.2, 0.3], [0, 0, 1])
    with pytest.raises(InsufficientClassError, match="class 1"):
        select_balanced(table, SelectionSpec(ipc=2))


def test_balanced_random_is_seeded_and_balanced():
    table = table_from(np.zeros(12), np.repeat([0, 1, 2], 4))
    spec = SelectionSpec(metric="random", ipc=2, seed=9)
    a = select_balanced(table, spec)
    b = select_balanced(table, spec)
    assert a.sample_ids == b.sample_ids
    labels = [int(table.labels[list(table.sample_ids).index(s)]) for s in a.sample_ids]
    assert sorted(labels) == [0, 0, 1, 1, 2, 2]
    c = select_balanced(table, SelectionSpec(metric="random", ipc=2, seed=10))
    assert c.sample_ids != a.sample_ids


def test_unbalanced_examples():
    table = table_from([0.1, 0.9, 0.2, 0.8], [0, 0, 1, 1])
    spec = SelectionSpec(metric="el2n", direction="easy")
    assert select_unbalanced(table, spec, 2).sample_ids == (0, 2)
    tied = table_from([0.5] * 4, [0, 0, 1, 1])
    assert select_unbalanced(tied, spec, 3).sample_ids == (0, 1, 2)


def test_unbalanced_matches_sort_take_oracle():
    rng = np.random.default_rng(1)
    scores = rng.random(50)
    labels = rng.integers(0, 4, size=50)
    table = table_from(scores, labels)
    got = select_unbalanced(table, SelectionSpec(metric="el2n", direction="easy"), 10)
    expected = tuple(int(i) for i in np.argsort(scores, kind="stable")[:10])
    assert got.sample_ids == expected


def test_unbalanced_count_validation():
    table = table_from([0.1], [0])
    with pytest.raises(SelectionError):
        select_unbalanced(table, SelectionSpec(), 2)


def test_selection_independent_of_row_order():
    rng = np.random.default_rng(2)
    scores = rng.random(30)
    labels = np.repeat(np.arange(3), 10)
    ids = np.arange(30)
    perm = rng.permutation(30)
    t1 = table_from(scores, labels, sample_ids=ids)
    t2 = table_from(scores[perm], labels[perm], sample_ids=ids[perm])
    spec = SelectionSpec(metric="el2n", direction="easy", ipc=3)
    assert select_balanced(t1, spec).sample_ids == select_balanced(t2, spec).sample_ids
    assert (
        select_unbalanced(t1, spec, 9).sample_ids == select_unbalanced(t2, spec, 9).sample_ids
    )


def test_random_tie_break_option_differs_by_seed():
    table = table_from(np.zeros(20), np.repeat([0, 1], 10))
    a = select_balanced(table, SelectionSpec(ipc=3, tie_break="random", seed=1))
    b = select_balanced(table, SelectionSpec(ipc=3, tie_break="random", seed=2))
    assert a.sample_ids != b.sample_ids


def test_ccs_degenerate_single_stratum_full_class():
    table = table_from([0.1, 0.2, 0.3, 0.4], [0, 0, 0, 0])
    spec = CcsSpec(ipc=4, metric="el2n", mislabeled_fraction=0.0, num_strata=1, seed=0)
    got = ccs_select(table, spec)
    assert sorted(got.sample_ids) == [0, 1, 2, 3]


def test_ccs_beta_excludes_hardest():
    table = table_from(np.arange(1, 11, dtype=float), [0] * 10)
    spec = CcsSpec(ipc=2, metric="el2n", mislabeled_fraction=0.3, num_strata=1, seed=3)
    for seed in range(5):
        got = ccs_select(table, CcsSpec(ipc=2, metric="el2n", mislabeled_fraction=0.3, num_strata=1, seed=seed))
        assert all(table.el2n[list(table.sample_ids).index(s)] <= 7 for s in got.sample_ids)


def ccs_quota_oracle(ipc, num_strata):
    base, extra = divmod(ipc, num_strata)
    return [base + (1 if i < extra else 0) for i in range(num_strata)]


def test_ccs_per_stratum_counts_match_quota_rule():
    rng = np.random.default_rng(4)
    spread = np.linspace(0.0, 1.0, 20)
    scores = np.concatenate([spread + rng.normal(0, 0.005, 20), spread + rng.normal(0, 0.005, 20)])
    labels = np.repeat([0, 1], 20)
    table = table_from(scores, labels, aum=scores)
    spec = CcsSpec(ipc=5, metric="aum", mislabeled_fraction=0.3, num_strata=5, seed=7)
    got = ccs_select(table, spec)
    assert len(got) == 10
    id_to_row = {int(s): i for i, s in enumerate(table.sample_ids)}
    for label in (0, 1):
        rows = [i for i in range(40) if table.labels[i] == label]
        # replicate the documented rule: drop hardest 30% by aum (low aum = hard)
        key = -table.aum  # ascending = easy
        order = sorted(rows, key=lambda i: (key[i], table.sample_ids[i]))
        kept = order[: len(rows) - 6]
        vals = key[kept]
        lo, hi = vals.min(), vals.max()
        idx = np.minimum(((vals - lo) / (hi - lo) * 5).astype(int), 4)
        strata_members = {s: set() for s in range(5)}
        for pos, row in enumerate(kept):
            strata_members[int(idx[pos])].add(int(table.sample_ids[row]))
        mine = [s for s in got.sample_ids if table.labels[id_to_row[s]] == label]
        counts = [len(set(mine) & strata_members[s]) for s in range(5)]
        assert sum(counts) == 5
        assert counts == ccs_quota_oracle(5, 5)  # no empty strata in this fixture


def test_ccs_empty_stratum_redistributes_forward():
    # scores gap: strata 1..3 empty, their quota lands on the last stratum
    scores = np.array([0.0, 0.01, 0.02, 0.03, 1.0, 1.01, 1.02, 1.03])
    table = table_from(scores, [0] * 8)
    spec = CcsSpec(ipc=4, metric="el2n", mislabeled_fraction=0.0, num_strata=4, seed=0)
    got = ccs_select(table, spec)
    assert len(got) == 4
    vals = sorted(float(scores[list(table.sample_ids).index(s)]) for s in got.sample_ids)
    assert sum(v < 0.5 for v in vals) == 1  # quota 1 from stratum 0
    assert sum(v > 0.5 for v in vals) == 3  # strata 1-2 quotas carried into stratum 3


def test_ccs_infeasible_quota_names_class_and_stratum():
    scores = np.array([0.0, 0.0, 0.0, 1.0])
    table = table_from(scores, [0] * 4)
    spec = CcsSpec(ipc=4, metric="el2n", mislabeled_fraction=0.0, num_strata=4, seed=0)
    with pytest.raises(QuotaError, match="class 0"):
        ccs_select(table, spec)


def test_ccs_insufficient_after_beta():
    table = table_from([0.1, 0.2, 0.3], [0] * 3)
    with pytest.raises(InsufficientClassError):
        ccs_select(table, CcsSpec(ipc=3, mislabeled_fraction=0.4, num_strata=1))


def test_ccs_equal_scores_all_rows_feasible():
    table = table_from(np.full(6, 0.5), [0] * 6)
    got = ccs_select(table, CcsSpec(ipc=4, metric="el2n", mislabeled_fraction=0.0, num_strata=3, seed=1))
    assert len(got) == 4


def test_balance_report_balanced_counts():
    table = table_from(np.arange(8, dtype=float), [0, 0, 1, 1, 2, 2, 3, 3])
    subset = select_balanced(table, SelectionSpec(ipc=2))
    report = balance_report(table, subset)
    assert report.per_class_count == {0: 2, 1: 2, 2: 2, 3: 2}
    assert report.counts_balanced()
    assert not report.degenerate


def test_balance_report_unbalanced_detects_imbalance():
    table = table_from([0.0, 0.1, 0.2, 0.9, 0.95, 0.99], [0, 0, 0, 1, 1, 1])
    subset = select_unbalanced(table, SelectionSpec(direction="easy"), 3)
    report = balance_report(table, subset)
    assert report.per_class_count[0] == 3 and report.per_class_count[1] == 0
    assert not report.counts_balanced()


def test_balance_report_forgetting_degeneracy_fires():
    # 60% zero forgetting; selection takes a strict subset of the tie set
    forget = [0] * 6 + [1, 2, 3, 4]
    table = table_from(np.zeros(10), [0] * 10, forgetting=forget)
    subset = select_balanced(table, SelectionSpec(metric="forgetting", direction="easy", ipc=5))
    report = balance_report(table, subset)
    assert report.zero_forgetting_total == 6
    assert report.zero_forgetting_per_class[0] == 6
    assert report.degenerate and report.degenerate_classes == (0,)


def test_balance_report_distinct_scores_no_degeneracy():
    forget = list(range(10))
    table = table_from(np.zeros(10), [0] * 10, forgetting=forget)
    subset = select_balanced(table, SelectionSpec(metric="forgetting", direction="easy", ipc=5))
    report = balance_report(table, subset)
    assert not report.degenerate


def test_degeneracy_warning_fires_exactly_when_tie_set_exceeds_count():
    for zeros in (2, 4, 7):
        forget = [0] * zeros + list(range(1, 11 - zeros))
        table = table_from(np.zeros(10), [0] * 10, forgetting=forget)
        subset = select_balanced(
            table, SelectionSpec(metric="forgetting", direction="easy", ipc=4)
        )
        report = balance_report(table, subset)
        assert report.degenerate == (zeros > 4)
        if report.degenerate:
            # two seeds of random tie-break really can produce different subsets
            a = select_balanced(
                table,
                SelectionSpec(metric="forgetting", direction="easy", ipc=4, tie_break="random", seed=1),
            )
            b = select_balanced(
                table,
                SelectionSpec(metric="forgetting", direction="easy", ipc=4, tie_break="random", seed=5),
            )
            assert set(a.sample_ids) != set(b.sample_ids)


def test_subset_file_round_trip(tmp_path):
    table = table_from([0.3, 0.1, 0.2, 0.4], [0, 0, 1, 1])
    subset = select_balanced(table, SelectionSpec(ipc=1, seed=3))
    path = tmp_path / "subset.txt"
    save_subset(subset, path)
    back = load_subset(path)
    assert back.sample_ids == subset.sample_ids
    assert back.provenance == subset.provenance
    with pytest.raises(SelectionError):
        load_subset(tmp_path.joinpath("empty.txt")) if (tmp_path / "empty.txt").write_text("# subset x\n") else None


def test_direction_correctness_invariant():
    rng = np.random.default_rng(6)
    table = table_from(rng.random(40), np.repeat(np.arange(4), 10))
    spec = SelectionSpec(metric="el2n", direction="easy", ipc=3)
    subset = select_balanced(table, spec)
    ids = set(subset.sample_ids)
    for label in range(4):
        rows = [i for i in range(40) if table.labels[i] == label]
        sel = [table.el2n[i] for i in rows if int(table.sample_ids[i]) in ids]
        uns = [table.el2n[i] for i in rows if int(table.sample_ids[i]) not in ids]
        assert max(sel) <= min(uns)


def test_strata_builder_shapes():
    rng = np.random.default_rng(7)
    table = table_from(rng.random(60), np.repeat(np.arange(3), 20), aum=rng.normal(size=60))
    strata = build_difficulty_strata(table, ipc=4, seed=0)
    assert set(strata) == {"easy-only", "easy-balanced", "random", "hard-balanced", "hard-only"}
    for subset in strata.values():
        assert len(subset) == 12
    # balanced strata have equal class counts; unbalanced need not
    report = balance_report(table, strata["easy-balanced"])
    assert report.counts_balanced()


def test_spec_validation():
    with pytest.raises(ValueError):
        SelectionSpec(metric="l2")
    with pytest.raises(ValueError):
        SelectionSpec(direction="up")
    with pytest.raises(ValueError):
        SelectionSpec(ipc=0)
    with pytest.raises(ValueError):
        CcsSpec(ipc=1, mislabeled_fraction=1.0)
    with pytest.raises(ValueError):
        CcsSpec(ipc=0)
