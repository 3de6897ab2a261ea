"""
Evaluation Metrics

Agreement between target and clone top-K lists, Recall@K of a model on
held-out interactions (optionally through the popularity-mixing
defense), and the analytic agreement of a random list.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..models.config_models import DefenseConfig
from .data_core import InteractionDataset
from .defense import defended_top_k, popularity_ranking
from .embed_models import RecommendationList, recommend_for_users
from .errors import MetricError

logger = logging.getLogger(__name__)

ListLike = Union[RecommendationList, Sequence[int]]


def _items(rec: ListLike) -> Sequence[int]:
    return rec.items if isinstance(rec, RecommendationList) else list(rec)


def agreement(rec_target: ListLike, rec_clone: ListLike) -> float:
    """|R_target ∩ R_clone| / K; order-insensitive."""
    target, clone = _items(rec_target), _items(rec_clone)
    if len(target) != len(clone):
        raise MetricError(f"List lengths differ: {len(target)} vs {len(clone)}")
    if not target:
        raise MetricError("Agreement of empty lists is undefined")
    return len(set(target) & set(clone)) / len(target)


def mean_agreement(
    target_model,
    clone,
    users: Sequence[int],
    k: int,
    exclusions: InteractionDataset,
) -> float:
    """
    Mean per-user agreement, both lists excluding the target's training
    interactions (`exclusions`).
    """
    users = [int(u) for u in users]
    if not users:
        raise MetricError("mean_agreement needs at least one user")
    target_lists = recommend_for_users(target_model, users, k, exclusions)
    clone_lists = recommend_for_users(clone, users, k, exclusions)
    return float(np.mean([agreement(t, c) for t, c in zip(target_lists, clone_lists)]))


def recall_at_k(
    model,
    holdout: InteractionDataset,
    k: int,
    train: InteractionDataset,
    defense: Optional[DefenseConfig] = None,
) -> float:
    """
    Mean over holdout users of |top-K ∩ held-out| / |held-out|.

    Lists exclude only the training interactions. With a defense the lists
    are mixed as the oracle would mix them, drawing from one generator
    seeded by defense.rng_seed in ascending user order.
    """
    users = [int(u) for u in holdout.users]
    if not users:
        raise MetricError("Holdout has no users")
    defended = defense is not None and defense.mix_count > 0
    popular = popularity_ranking(train) if defended else None
    rng = np.random.default_rng(defense.rng_seed) if defended else None
    lists = [defended_top_k(model, u, k, train.items_of(u), defense, popular, rng) for u in sorted(users)]
    recalls = []
    for rec in lists:
        held = holdout.items_of(rec.user)
        hits = np.intersect1d(np.asarray(rec.items, dtype=np.int64), held).size
        recalls.append(hits / held.size)
    return float(np.mean(recalls))


def random_agreement_baseline(k: int, num_items: int, mean_interactions: float) -> float:
    """Expected agreement of a uniformly random K-list: K / (num_items - mean |I_u|)."""
    candidates = num_items - mean_interactions
    if candidates <= 0:
        raise MetricError("No candidate items remain after exclusions")
    return min(1.0, k / candidates)
