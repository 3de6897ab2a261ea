"""
Helpers shared by CLI commands.
"""
import os
import json
from typing import Any, Optional

import click

from ..models.config_models import ExperimentConfig
from ..services.config_loader import load_config
from ..services.data_core import DataSplit, build_split
from ..services.experiment import prepare_dataset


def config_option(func):
    return click.option(
        "--config", "config_path", type=str, default=None,
        help="Experiment config (JSON, or YAML for .yaml/.yml); defaults to the synthetic desk setup",
    )(func)


def seed_option(func):
    return click.option("--seed", type=int, default=None, help="Run seed (defaults to the config's first seed)")(func)


def load_with_base(config_path: Optional[str]):
    """Config plus the directory its relative dataset paths resolve against."""
    cfg = load_config(config_path)
    base_dir = os.path.dirname(os.path.abspath(config_path)) if config_path else None
    return cfg, base_dir


def resolve_seed(cfg: ExperimentConfig, seed: Optional[int]) -> int:
    return cfg.seeds[0] if seed is None else seed


def split_for_seed(cfg: ExperimentConfig, seed: int, base_dir: Optional[str]) -> DataSplit:
    ds = prepare_dataset(cfg, base_dir)
    split_seed = cfg.split_seed if cfg.split_seed is not None else seed
    return build_split(ds, split_seed, cfg.available_fraction, cfg.holdout_fraction)


def echo_json(payload: Any, out: Optional[str] = None) -> None:
    text = json.dumps(payload, indent=2, default=str)
    click.echo(text)
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
