"""
`train` command: fit a target or auxiliary model and checkpoint it.
"""
import logging
from typing import Optional

import click

from ..services.checkpoints import save_model
from ..services.data_core import restrict_item_overlap, sample_available
from ..services.experiment import derive_train_config
from ..services.trainer import train_model_with_summary
from .common import config_option, echo_json, load_with_base, resolve_seed, seed_option, split_for_seed

logger = logging.getLogger(__name__)


@click.command()
@config_option
@seed_option
@click.option("--role", type=click.Choice(["target", "auxiliary"]), default="target", show_default=True,
              help="target: target_kind on the target's training data; auxiliary: clone_kind on auxiliary data")
@click.option("--out", type=str, required=True, help="Checkpoint path (.npz)")
def train(config_path: Optional[str], seed: Optional[int], role: str, out: str):
    """Train a model on one seed's split and write a checkpoint."""
    cfg, base_dir = load_with_base(config_path)
    seed = resolve_seed(cfg, seed)
    split = split_for_seed(cfg, seed, base_dir)
    if role == "target":
        kind, data = cfg.target_kind, split.target_train
        train_cfg = derive_train_config(cfg.target_train, seed, 0)
    else:
        kind = cfg.clone_kind
        data = sample_available(split.auxiliary, cfg.aux_fraction, [seed, 3])
        data = restrict_item_overlap(data, cfg.overlap_ratio, split.target_train.items_present(), [seed, 4])
        train_cfg = derive_train_config(cfg.aux_train, seed, 1)

    model, summary = train_model_with_summary(kind, data, train_cfg)
    metadata = {
        "experiment_id": cfg.experiment_id,
        "role": role,
        "seed": seed,
        "num_users": model.num_users,
        "num_items": model.num_items,
        "training": summary.model_dump(),
    }
    if role == "auxiliary":
        metadata["aux_eligible"] = [int(i) for i in data.eligibility_mask().nonzero()[0]]
    written = save_model(model, out, metadata)
    echo_json({"checkpoint": written, **{k: v for k, v in metadata.items() if k != "aux_eligible"}})
