"""
Model Checkpoints

Versioned .npz containers for EmbeddingModel and FusedCloneModel. Arrays
are stored as float64 without compression loss, so a save/load cycle is
bit-exact.
"""
import os
import json
import logging
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .embed_models import EmbeddingModel
from .errors import ModelError
from .fusion import AttentionParams, FusedCloneModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def save_model(
    model: Union[EmbeddingModel, FusedCloneModel],
    path: str,
    metadata: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Write `model` to `path` (".npz" is appended by numpy when missing).

    Returns:
        The path actually written
    """
    arrays: Dict[str, Any] = {
        "format_version": np.array(FORMAT_VERSION),
        "kind": np.array(model.kind.value),
        "P": model.P,
        "metadata": np.array(json.dumps(metadata or {}, sort_keys=True)),
    }
    if isinstance(model, FusedCloneModel):
        arrays.update(
            model_type=np.array("fused"),
            Q=model.Q_c,
            Q_a=model.Q_a,
            att_w=model.attention.w,
            att_b=np.array(model.attention.b),
            aux_eligible=model.aux_eligible,
        )
    else:
        arrays.update(model_type=np.array("embedding"), Q=model.Q)
    if model.head_w is not None:
        arrays.update(head_w=model.head_w, head_b=np.array(model.head_b))

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.savez(path, **arrays)
    written = path if path.endswith(".npz") else f"{path}.npz"
    logger.info(f"Saved {model.kind.value} checkpoint to {written}")
    return written


def load_model_with_metadata(path: str) -> Tuple[Union[EmbeddingModel, FusedCloneModel], Dict[str, Any]]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ModelError(f"Unsupported checkpoint format_version {version} in {path}")
        kind = str(data["kind"])
        model_type = str(data["model_type"])
        head_w = data["head_w"] if "head_w" in data else None
        head_b = float(data["head_b"]) if "head_b" in data else 0.0
        metadata = json.loads(str(data["metadata"]))
        if model_type == "embedding":
            model = EmbeddingModel(kind=kind, P=data["P"], Q=data["Q"], head_w=head_w, head_b=head_b)
        elif model_type == "fused":
            model = FusedCloneModel(
                kind=kind,
                P=data["P"],
                Q_c=data["Q"],
                Q_a=data["Q_a"],
                attention=AttentionParams(w=data["att_w"], b=float(data["att_b"])),
                aux_eligible=data["aux_eligible"],
                head_w=head_w,
                head_b=head_b,
            )
        else:
            raise ModelError(f"Unknown model_type '{model_type}' in {path}")
    return model, metadata


def load_model(path: str) -> Union[EmbeddingModel, FusedCloneModel]:
    """Read a checkpoint written by save_model."""
    model, _ = load_model_with_metadata(path)
    return model
