"""
Experiment config loading: JSON, or YAML for .yaml/.yml files.
"""
import os
import json
import logging
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from ..models.config_models import ExperimentConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)


def read_config_document(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            if path.lower().endswith((".yaml", ".yml")):
                document = yaml.safe_load(f)
            else:
                document = json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return document


def load_config(path: Optional[str]) -> ExperimentConfig:
    """
    Validate a config file against ExperimentConfig; defaults when path is None.

    Raises:
        ConfigError: missing file, unparsable document or failed validation
    """
    if path is None:
        return ExperimentConfig()
    document = read_config_document(path)
    try:
        cfg = ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}") from e
    logger.info(f"Loaded experiment config '{cfg.experiment_id}' from {path}")
    return cfg
