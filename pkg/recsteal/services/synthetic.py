"""
Synthetic Interaction Generator

Cluster-structured implicit-feedback data for desk-scale experiments and
tests. Users and items draw latent factors around shared cluster centres;
each user then samples items without replacement from a softmax over
affinity plus a Zipf-like log-popularity prior.
"""
import logging
from typing import Optional

import numpy as np

from ..models.config_models import SyntheticConfig
from .data_core import InteractionDataset

logger = logging.getLogger(__name__)


def generate_synthetic(cfg: Optional[SyntheticConfig] = None, **overrides) -> InteractionDataset:
    """
    Build a synthetic dataset.

    Args:
        cfg: Generator settings; defaults to SyntheticConfig()
        **overrides: Individual SyntheticConfig fields, e.g. num_users=50

    Returns:
        InteractionDataset with raw IDs "u<index>" and "i<index>"
    """
    cfg = (cfg or SyntheticConfig()).model_copy(update=overrides)
    cfg = SyntheticConfig.model_validate(cfg.model_dump())
    rng = np.random.default_rng(cfg.seed)

    centres = rng.normal(size=(cfg.num_clusters, cfg.latent_dim))
    user_cluster = rng.integers(0, cfg.num_clusters, size=cfg.num_users)
    item_cluster = rng.integers(0, cfg.num_clusters, size=cfg.num_items)
    users = centres[user_cluster] + 0.5 * rng.normal(size=(cfg.num_users, cfg.latent_dim))
    items = centres[item_cluster] + 0.5 * rng.normal(size=(cfg.num_items, cfg.latent_dim))

    # Zipf-like prior over a random item order
    popularity_rank = rng.permutation(cfg.num_items) + 1
    log_popularity = -np.log(popularity_rank.astype(np.float64))

    affinity = users @ items.T / np.sqrt(cfg.latent_dim)
    logits = cfg.affinity_scale * affinity + cfg.popularity_weight * log_popularity[None, :]
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)

    counts = rng.integers(cfg.min_user_interactions, cfg.max_user_interactions + 1, size=cfg.num_users)
    interactions = {}
    for user in range(cfg.num_users):
        probs = weights[user]
        # rng.choice needs at least `count` items with non-zero mass
        if np.count_nonzero(probs) < counts[user]:
            probs = (probs + 1e-12) / (probs + 1e-12).sum()
        interactions[user] = rng.choice(cfg.num_items, size=int(counts[user]), replace=False, p=probs)

    ds = InteractionDataset(
        num_users=cfg.num_users,
        num_items=cfg.num_items,
        interactions=interactions,
        user_ids=tuple(f"u{i}" for i in range(cfg.num_users)),
        item_ids=tuple(f"i{i}" for i in range(cfg.num_items)),
    )
    logger.info(
        f"Generated synthetic dataset: {ds.num_users} users, {ds.num_items} items, "
        f"{ds.num_interactions} interactions (seed {cfg.seed})"
    )
    return ds
