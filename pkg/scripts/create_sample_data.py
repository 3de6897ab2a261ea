"""
Sample Data Generator

Writes a cluster-structured synthetic interaction log as a raw-ID
user_id,item_id CSV that `recsteal ingest` and experiment configs can read.
"""
import os
import sys
import logging

import click

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from recsteal.models.config_models import SyntheticConfig  # noqa: E402
from recsteal.services.data_core import summarize, write_interactions  # noqa: E402
from recsteal.services.synthetic import generate_synthetic  # noqa: E402

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@click.command()
@click.option("--out", default="data/synthetic.csv", show_default=True, help="CSV to write")
@click.option("--users", default=500, show_default=True, help="Number of users")
@click.option("--items", default=800, show_default=True, help="Number of items")
@click.option("--clusters", default=8, show_default=True, help="Number of taste clusters")
@click.option("--seed", default=0, show_default=True, help="Generator seed")
def create_sample_data(out: str, users: int, items: int, clusters: int, seed: int):
    """Generate a synthetic dataset and write it to OUT."""
    cfg = SyntheticConfig(num_users=users, num_items=items, num_clusters=clusters, seed=seed)
    ds = generate_synthetic(cfg)
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    write_interactions(ds, out)
    stats = summarize(ds)
    logger.info("Sample data created successfully")
    print(f"✓ Wrote {stats.num_interactions} interactions to {out}")
    print(f"  - {stats.num_users} users, {stats.num_items} items, sparsity {stats.sparsity:.4f}")


if __name__ == "__main__":
    create_sample_data()
