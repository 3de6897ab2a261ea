"""
Tests for the query oracle and the popularity-mixing defense
"""
import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from recsteal.models.config_models import DefenseConfig  # noqa: E402
from recsteal.services.defense import defended_top_k, mix_popular, popularity_ranking  # noqa: E402
from recsteal.services.embed_models import EmbeddingModel, RecommendationList, recommend_top_k  # noqa: E402
from recsteal.services.errors import BudgetExhaustedError, DefenseError, ModelError  # noqa: E402
from recsteal.services.oracle import QueryOracle  # noqa: E402
from recsteal.services.query_audit import QueryAuditLogger, QueryEventType  # noqa: E402
from tests.helpers import make_dataset  # noqa: E402


class RecordingAudit(QueryAuditLogger):
    """Keeps every event in memory."""

    def __init__(self):
        super().__init__(log_file="", log_to_stdout=False)
        self.events = []

    def log_event(self, event_type, user, spent, budget, items=None, metadata=None):
        self.events.append((event_type, user, spent))
        return super().log_event(event_type, user, spent, budget, items, metadata)


@pytest.fixture
def target_setup():
    rng = np.random.default_rng(0)
    model = EmbeddingModel(kind="bpr", P=rng.normal(size=(6, 3)), Q=rng.normal(size=(40, 3)))
    interactions = make_dataset({u: [u, u + 6, (3 * u) % 40] for u in range(6)}, num_users=6, num_items=40)
    return model, interactions


def test_query_matches_top_k_without_training_items(target_setup):
    model, interactions = target_setup
    oracle = QueryOracle(model, interactions, k=5)
    for user in range(6):
        response = oracle.query(user)
        assert response == recommend_top_k(model, user, 5, interactions.items_of(user))
        assert not set(response.items) & set(interactions.items_of(user).tolist())


def test_cache_and_log(target_setup):
    """Repeat queries are free and do not grow the log."""
    model, interactions = target_setup
    audit = RecordingAudit()
    oracle = QueryOracle(model, interactions, k=5, audit=audit)
    first = oracle.query(2)
    oracle.query(4)
    assert oracle.query(2) is first
    assert oracle.spent == 2 and len(oracle.log) == 2
    assert [user for user, _ in oracle.log] == [2, 4]
    assert [e[0] for e in audit.events] == [
        QueryEventType.QUERY_SERVED, QueryEventType.QUERY_SERVED, QueryEventType.CACHE_HIT,
    ]
    assert oracle.remaining is None


def test_budget_exhaustion(target_setup):
    model, interactions = target_setup
    audit = RecordingAudit()
    oracle = QueryOracle(model, interactions, k=5, budget=2, audit=audit)
    oracle.query(0)
    oracle.query(1)
    assert oracle.remaining == 0
    with pytest.raises(BudgetExhaustedError) as excinfo:
        oracle.query(3)
    assert excinfo.value.budget == 2 and excinfo.value.user == 3
    oracle.query(1)
    assert oracle.spent == 2
    assert audit.events[2][0] is QueryEventType.BUDGET_EXHAUSTED


def test_zero_budget_refuses_everything(target_setup):
    model, interactions = target_setup
    oracle = QueryOracle(model, interactions, k=5, budget=0)
    with pytest.raises(BudgetExhaustedError):
        oracle.query(0)
    assert oracle.log == []


def test_oracle_argument_checks(target_setup):
    model, interactions = target_setup
    oracle = QueryOracle(model, interactions, k=5)
    with pytest.raises(ModelError):
        oracle.query(6)
    with pytest.raises(DefenseError):
        QueryOracle(model, interactions, k=5, defense=DefenseConfig(mix_count=6, pool_size=10))
    with pytest.raises(ModelError):
        QueryOracle(model, make_dataset({0: [1]}, num_users=6, num_items=39), k=5)


def test_defended_oracle_is_seeded(target_setup):
    model, interactions = target_setup
    defense = DefenseConfig(mix_count=2, pool_size=20, rng_seed=3)
    a = QueryOracle(model, interactions, k=5, defense=defense)
    b = QueryOracle(model, interactions, k=5, defense=defense)
    assert [a.query(u).items for u in range(6)] == [b.query(u).items for u in range(6)]


def test_defended_response_shape(target_setup):
    """d positions change; replacements come from the popular pool and avoid training items."""
    model, interactions = target_setup
    defense = DefenseConfig(mix_count=3, pool_size=15, rng_seed=1)
    oracle = QueryOracle(model, interactions, k=8, defense=defense)
    pool = set(popularity_ranking(interactions)[:15].tolist())
    for user in range(6):
        raw = recommend_top_k(model, user, 8, interactions.items_of(user)).items
        mixed = oracle.query(user).items
        changed = [i for i, (r, m) in enumerate(zip(raw, mixed)) if r != m]
        assert len(changed) == 3
        assert all(mixed[i] in pool and mixed[i] not in raw for i in changed)
        assert not set(mixed) & set(interactions.items_of(user).tolist())


def test_popularity_ranking_ties_by_index():
    ds = make_dataset({0: [3, 1], 1: [3, 2], 2: [1, 0]}, num_items=5)
    assert popularity_ranking(ds).tolist() == [1, 3, 0, 2, 4]


def test_mix_popular_edge_cases():
    rec = RecommendationList(user=0, items=(5, 6, 7))
    rng = np.random.default_rng(0)
    popular = np.array([5, 6, 7, 8, 9])
    assert mix_popular(rec, DefenseConfig(mix_count=0, pool_size=5), popular, None, rng) is rec
    mixed = mix_popular(rec, DefenseConfig(mix_count=2, pool_size=5), popular, None, rng)
    assert set(mixed.items) - {5, 6, 7} == {8, 9}
    with pytest.raises(DefenseError):
        mix_popular(rec, DefenseConfig(mix_count=2, pool_size=5), popular, [8], rng)
    with pytest.raises(DefenseError):
        mix_popular(rec, DefenseConfig(mix_count=4, pool_size=5), popular, None, rng)


def test_full_replacement():
    """d = K replaces every position."""
    rec = RecommendationList(user=0, items=(0, 1))
    mixed = mix_popular(rec, DefenseConfig(mix_count=2, pool_size=4), np.array([0, 2, 3, 1]), None,
                        np.random.default_rng(4))
    assert set(mixed.items) == {2, 3}


def test_defended_top_k_without_defense(target_setup):
    model, interactions = target_setup
    popular = popularity_ranking(interactions)
    raw = defended_top_k(model, 1, 4, interactions.items_of(1), None, popular, np.random.default_rng(0))
    assert raw == recommend_top_k(model, 1, 4, interactions.items_of(1))


def test_export_log_csv(tmp_path, target_setup):
    model, interactions = target_setup
    oracle = QueryOracle(model, interactions, k=3)
    oracle.query(4)
    oracle.query(0)
    path = tmp_path / "queries.csv"
    oracle.export_log_csv(str(path))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["query_index", "user_id", "item_ids"]
    assert rows[1][:2] == ["0", "u4"] and rows[2][:2] == ["1", "u0"]
    assert rows[1][2].split("|") == [f"i{i}" for i in oracle.log[0][1].items]


def test_oracle_serves_defended_top_k(target_setup):
    """The oracle's answers are exactly what defended_top_k builds with the same generator."""
    model, interactions = target_setup
    defense = DefenseConfig(mix_count=2, pool_size=20, rng_seed=9)
    oracle = QueryOracle(model, interactions, k=6, defense=defense)
    popular = popularity_ranking(interactions)
    rng = np.random.default_rng(defense.rng_seed)
    for user in (3, 0, 5):
        expected = defended_top_k(model, user, 6, interactions.items_of(user), defense, popular, rng)
        assert oracle.query(user) == expected


def test_defended_top_k_with_zero_mix(target_setup):
    model, interactions = target_setup
    raw = defended_top_k(model, 2, 5, interactions.items_of(2), DefenseConfig(mix_count=0), None, None)
    assert raw == recommend_top_k(model, 2, 5, interactions.items_of(2))


def test_popularity_ranking_matches_counting():
    rng = np.random.default_rng(17)
    for _ in range(20):
        num_items = int(rng.integers(5, 30))
        data = {
            u: rng.choice(num_items, size=int(rng.integers(1, num_items)), replace=False).tolist()
            for u in range(int(rng.integers(2, 12)))
        }
        ds = make_dataset(data, num_items=num_items)
        counts = [0] * num_items
        for items in data.values():
            for item in items:
                counts[item] += 1
        expected = sorted(range(num_items), key=lambda i: (-counts[i], i))
        assert popularity_ranking(ds).tolist() == expected


def test_mixed_lists_keep_their_shape():
    """Over many random lists: exactly d positions change, no duplicates, no excluded items."""
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        num_items = int(rng.integers(40, 80))
        k = int(rng.integers(1, 11))
        d = int(rng.integers(0, k + 1))
        chosen = rng.choice(num_items, size=k + 10, replace=False)
        items, exclusions = chosen[:k], chosen[k:k + int(rng.integers(0, 11))]
        popular = rng.permutation(num_items)
        rec = RecommendationList(user=0, items=tuple(int(i) for i in items))
        mixed = mix_popular(rec, DefenseConfig(mix_count=d, pool_size=num_items), popular, exclusions, rng)
        assert len(mixed.items) == k
        assert len(set(mixed.items)) == k
        assert sum(a != b for a, b in zip(rec.items, mixed.items)) == d
        assert not set(mixed.items) & set(exclusions.tolist())
