"""
Shared fixtures for recsteal tests.
"""
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from recsteal.models.config_models import TrainConfig  # noqa: E402
from recsteal.services.settings import RuntimeSettings  # noqa: E402
from recsteal.services.synthetic import generate_synthetic  # noqa: E402
from tests.helpers import make_dataset  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if RuntimeSettings.run_slow():
        return
    skip_slow = pytest.mark.skip(reason=f"set {RuntimeSettings.RUN_SLOW_ENV}=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_dataset():
    """4 users over 6 items."""
    return make_dataset({0: [0, 1, 2], 1: [1, 3], 2: [0, 4, 5], 3: [2, 3, 5]}, num_items=6)


@pytest.fixture(scope="session")
def small_synthetic():
    """60 users x 80 items of cluster-structured data."""
    return generate_synthetic(
        num_users=60, num_items=80, num_clusters=3, latent_dim=6,
        min_user_interactions=8, max_user_interactions=16, seed=3,
    )


@pytest.fixture
def fast_train():
    return TrainConfig(learning_rate=0.02, batch_size=64, embedding_dim=8, epochs=3, rng_seed=5)
