"""
Tests for Interaction Data Service
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from recsteal.services import data_core  # noqa: E402
from recsteal.services.errors import DataError  # noqa: E402
from tests.helpers import make_dataset  # noqa: E402


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_dedups_and_reindexes(tmp_path):
    """Duplicate rows collapse; indices follow first appearance."""
    path = _write(tmp_path, "log.csv", "u9,i7\nu9,i7\nu2,i7\n")
    ds = data_core.load_interactions(path)
    assert ds.num_users == 2
    assert ds.num_items == 1
    assert list(ds.items_of(0)) == [0]
    assert list(ds.items_of(1)) == [0]
    assert ds.user_ids == ("u9", "u2")
    assert ds.num_interactions == 2


def test_load_header_and_extra_columns(tmp_path):
    """Header rows are skipped and rating/timestamp columns ignored."""
    path = _write(tmp_path, "log.csv", "user_id,item_id,rating,timestamp\na,x,5,100\nb,y,3,101\n")
    ds = data_core.load_interactions(path)
    assert ds.num_users == 2 and ds.num_items == 2


def test_load_tsv_and_dat(tmp_path):
    """Tab and :: delimited files parse by extension."""
    tsv = data_core.load_interactions(_write(tmp_path, "u.data", "1\t10\t4\t0\n2\t10\t3\t0\n"))
    dat = data_core.load_interactions(_write(tmp_path, "ratings.dat", "1::10::4::0\n1::11::3::0\n"))
    assert tsv.num_users == 2 and tsv.num_items == 1
    assert dat.num_users == 1 and dat.num_items == 2


def test_load_empty_file(tmp_path):
    """An empty file has no interactions."""
    with pytest.raises(DataError, match="no interactions"):
        data_core.load_interactions(_write(tmp_path, "empty.csv", ""))


def test_load_malformed_row_reports_line(tmp_path):
    """Rows with fewer than two columns carry their line number."""
    path = _write(tmp_path, "bad.csv", "a,x\nb\n")
    with pytest.raises(DataError) as excinfo:
        data_core.load_interactions(path)
    assert excinfo.value.line_number == 2


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        data_core.load_interactions(str(tmp_path / "nope.csv"))


def test_dataset_rejects_out_of_range_items():
    with pytest.raises(DataError):
        make_dataset({0: [0, 5]}, num_items=3)


def test_filter_identity_at_one(tiny_dataset):
    """k=1 keeps everything."""
    filtered = data_core.filter_min_interactions(tiny_dataset, 1)
    assert filtered.num_interactions == tiny_dataset.num_interactions
    assert filtered.num_users == tiny_dataset.num_users


def _brute_force_filter(pairs, k):
    pairs = set(pairs)
    while True:
        users = {}
        items = {}
        for u, i in pairs:
            users[u] = users.get(u, 0) + 1
            items[i] = items.get(i, 0) + 1
        kept = {(u, i) for u, i in pairs if users[u] >= k and items[i] >= k}
        if kept == pairs:
            return kept
        pairs = kept


def test_filter_fixed_point_chain():
    """Dropping a rare item can push a user below k; both disappear."""
    ds = make_dataset({0: [0, 1], 1: [0, 1], 2: [1, 2], 3: [0, 3]}, num_items=4)
    filtered = data_core.filter_min_interactions(ds, 2)
    users, items = ds.pairs()
    expected = _brute_force_filter(zip(users.tolist(), items.tolist()), 2)
    f_users, f_items = filtered.pairs()
    got = {(filtered.user_ids[u], filtered.item_ids[i]) for u, i in zip(f_users, f_items)}
    assert got == {(ds.user_ids[u], ds.item_ids[i]) for u, i in expected}
    counts_u = np.bincount(f_users)
    counts_i = np.bincount(f_items)
    assert counts_u.min() >= 2 and counts_i.min() >= 2


def test_filter_empty_result_errors(tiny_dataset):
    with pytest.raises(DataError):
        data_core.filter_min_interactions(tiny_dataset, 10)


def test_split_partitions_users(small_synthetic):
    """Halves are user-disjoint, share the item space and cover every interaction."""
    for seed in range(100):
        target, aux = data_core.split_target_auxiliary(small_synthetic, seed)
        assert not set(target.users.tolist()) & set(aux.users.tolist())
        assert target.num_items == aux.num_items == small_synthetic.num_items
        assert target.num_interactions + aux.num_interactions == small_synthetic.num_interactions


def test_split_sizes_and_determinism():
    ds = make_dataset({u: [u % 3] for u in range(10)}, num_items=3)
    t1, a1 = data_core.split_target_auxiliary(ds, 4)
    t2, _ = data_core.split_target_auxiliary(ds, 4)
    assert t1.users.size == 5 and a1.users.size == 5
    assert np.array_equal(t1.users, t2.users)


def test_sample_available_counts():
    ds = make_dataset({u: [0] for u in range(1000)}, num_items=1)
    assert data_core.sample_available(ds, 0.1, 0).users.size == 100
    assert data_core.sample_available(ds, 1.0, 0) is ds
    subset = data_core.sample_available(ds, 0.05, 1)
    assert set(subset.users.tolist()) <= set(ds.users.tolist())
    with pytest.raises(DataError):
        data_core.sample_available(ds, 0.0, 0)


def test_restrict_item_overlap_counts(tiny_dataset):
    target_items = range(6)
    full = data_core.restrict_item_overlap(tiny_dataset, 1.0, target_items, 0)
    assert full.eligibility_mask().all()
    ds = make_dataset({0: [0]}, num_items=100)
    part = data_core.restrict_item_overlap(ds, 0.1, range(100), 3)
    again = data_core.restrict_item_overlap(ds, 0.1, range(100), 3)
    assert part.eligibility_mask().sum() == 10
    assert np.array_equal(part.eligibility_mask(), again.eligibility_mask())
    with pytest.raises(DataError):
        data_core.restrict_item_overlap(ds, 1.5, range(100), 3)


def test_holdout_split_rules(small_synthetic):
    """Per user floor(20%) held out, at least one, never everything."""
    train, held = data_core.holdout_split(small_synthetic, 0.2, 0)
    for user in small_synthetic.users:
        full = small_synthetic.items_of(user)
        h = held.items_of(user)
        assert h.size == max(1, int(np.floor(0.2 * full.size)))
        assert not set(h.tolist()) & set(train.items_of(user).tolist())
        assert set(h.tolist()) | set(train.items_of(user).tolist()) == set(full.tolist())


def test_build_split_knowledge_tiers(small_synthetic):
    split = data_core.build_split(small_synthetic, 2, available_fraction=0.2)
    target_users = set(split.target.users.tolist())
    assert set(split.available_target.users.tolist()) <= target_users
    assert not target_users & set(split.auxiliary.users.tolist())
    for user in split.available_target.users:
        assert set(split.available_target.items_of(user).tolist()) <= set(split.target.items_of(user).tolist())
        assert not set(split.eval_holdout.items_of(user).tolist()) & set(split.target_train.items_of(user).tolist())


def test_sample_negatives_forced_set():
    """Only {2, 3, 4} remain outside the user's items."""
    ds = make_dataset({0: [0, 1]}, num_items=5)
    sample = data_core.sample_negatives(ds, 0, 3, None, np.random.default_rng(0))
    assert sorted(sample.items) == [2, 3, 4]
    assert data_core.sample_negatives(ds, 0, 0, None, np.random.default_rng(0)).items == ()
    with pytest.raises(DataError):
        data_core.sample_negatives(ds, 0, 4, None, np.random.default_rng(0))


def test_sample_negatives_never_excluded():
    ds = make_dataset({0: [0, 1, 2]}, num_items=12)
    rng = np.random.default_rng(1)
    extra = {3, 7}
    for _ in range(10_000):
        sample = data_core.sample_negatives(ds, 0, 2, extra, rng)
        assert not set(sample.items) & {0, 1, 2, 3, 7}
        assert len(set(sample.items)) == 2


def test_sample_negatives_uniform():
    """Chi-square of 10^5 single draws over 8 candidates."""
    ds = make_dataset({0: [0, 1]}, num_items=10)
    rng = np.random.default_rng(2)
    draws = [data_core.sample_negatives(ds, 0, 1, None, rng).items[0] for _ in range(100_000)]
    counts = np.bincount(draws, minlength=10)[2:]
    expected = 100_000 / 8
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 99.9th percentile of chi-square with 7 degrees of freedom
    assert chi2 < 24.32
    assert counts.sum() == 100_000


def test_sample_negative_block_rows_distinct():
    rng = np.random.default_rng(0)
    block = data_core.sample_negative_block(np.arange(5, 15), 50, 4, rng)
    assert block.shape == (50, 4)
    assert all(len(set(row)) == 4 for row in block.tolist())
    assert block.min() >= 5 and block.max() < 15


def test_summarize(tiny_dataset):
    stats = data_core.summarize(tiny_dataset)
    assert stats.num_interactions == 11
    assert stats.min_user_interactions == 2
    assert stats.max_user_interactions == 3
    assert stats.sparsity == pytest.approx(1 - 11 / 24)


def test_write_then_load_keeps_raw_ids(tmp_path, tiny_dataset):
    path = str(tmp_path / "out.csv")
    data_core.write_interactions(tiny_dataset, path)
    loaded = data_core.load_interactions(path)
    assert loaded.num_interactions == tiny_dataset.num_interactions
    users, items = loaded.pairs()
    pairs = {(loaded.user_ids[u], loaded.item_ids[i]) for u, i in zip(users, items)}
    assert ("u0", "i2") in pairs and ("u3", "i5") in pairs
