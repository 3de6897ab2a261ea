"""
Small builders shared by the tests.
"""
import numpy as np

from recsteal.services.data_core import InteractionDataset


def make_dataset(interactions, num_users=None, num_items=None) -> InteractionDataset:
    """Dataset with raw IDs u<index>/i<index> from a {user: [items]} dict."""
    num_users = num_users or (max(interactions) + 1)
    num_items = num_items or (max(max(items) for items in interactions.values()) + 1)
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        interactions={u: np.array(items, dtype=np.int64) for u, items in interactions.items()},
        user_ids=tuple(f"u{i}" for i in range(num_users)),
        item_ids=tuple(f"i{i}" for i in range(num_items)),
    )
