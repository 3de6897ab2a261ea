"""
Popularity-Mixing Defense

Corrupts the lists an oracle hands out by swapping d of the K positions
for items drawn from the most popular items.
"""
import logging
from typing import Iterable, Optional

import numpy as np

from ..models.config_models import DefenseConfig
from .data_core import InteractionDataset
from .embed_models import RecommendationList, recommend_top_k
from .errors import DefenseError

logger = logging.getLogger(__name__)


def popularity_ranking(ds: InteractionDataset) -> np.ndarray:
    """Items by descending interaction count, ties by ascending item index."""
    counts = ds.item_counts()
    return np.lexsort((np.arange(ds.num_items), -counts))


def mix_popular(
    rec_list: RecommendationList,
    cfg: DefenseConfig,
    popular: np.ndarray,
    user_exclusions: Optional[Iterable[int]],
    rng: np.random.Generator,
) -> RecommendationList:
    """
    Replace cfg.mix_count list positions with popular items.

    Positions are drawn uniformly without replacement first, then the
    replacement items, uniformly without replacement from the top
    cfg.pool_size popular items that are neither in the list nor in the
    user's exclusions. Untouched items keep their positions.

    Raises:
        DefenseError: mix_count exceeds the list length or the eligible pool
    """
    d = cfg.mix_count
    if d == 0:
        return rec_list
    items = np.asarray(rec_list.items, dtype=np.int64)
    if d > items.size:
        raise DefenseError(f"mix_count {d} exceeds list length {items.size}")
    blocked = set(rec_list.items)
    if user_exclusions is not None:
        blocked.update(int(i) for i in user_exclusions)
    pool = np.array([int(i) for i in popular[:cfg.pool_size] if int(i) not in blocked], dtype=np.int64)
    if pool.size < d:
        raise DefenseError(
            f"Popularity pool exhausted for user {rec_list.user}: need {d}, have {pool.size}"
        )
    positions = rng.choice(items.size, size=d, replace=False)
    replacements = rng.choice(pool, size=d, replace=False)
    mixed = items.copy()
    mixed[positions] = replacements
    return RecommendationList(user=rec_list.user, items=tuple(int(i) for i in mixed))


def defended_top_k(
    model,
    user: int,
    k: int,
    exclude: Optional[Iterable[int]],
    cfg: Optional[DefenseConfig],
    popular: Optional[np.ndarray],
    rng: Optional[np.random.Generator],
) -> RecommendationList:
    """
    Top-K list as a defended oracle would return it, without any budget
    accounting. Both the oracle and defended Recall build their lists here.
    """
    exclude = None if exclude is None else list(exclude)
    raw = recommend_top_k(model, user, k, exclude)
    if cfg is None or cfg.mix_count == 0:
        return raw
    return mix_popular(raw, cfg, popular, exclude, rng)
