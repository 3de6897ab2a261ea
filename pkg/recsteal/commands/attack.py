"""
`attack` command: run one attack against a checkpointed target.
"""
import logging
from typing import Optional

import click
import numpy as np

from ..models.config_models import AttackMethod, AttackSpec, ModelKind, PairLoss, LossPair
from ..models.result_models import AttackSummary
from ..services.attacks import AttackContext, run_attack
from ..services.checkpoints import load_model, load_model_with_metadata, save_model
from ..services.data_core import restrict_item_overlap, sample_available
from ..services.embed_models import EmbeddingModel
from ..services.errors import ModelError
from ..services.experiment import derive_train_config, partition_attack_users
from ..services.metrics import mean_agreement, random_agreement_baseline
from ..services.oracle import QueryOracle
from ..services.query_audit import QueryAuditLogger
from ..services.trainer import train_model
from .common import config_option, echo_json, load_with_base, resolve_seed, seed_option, split_for_seed

logger = logging.getLogger(__name__)


@click.command()
@config_option
@seed_option
@click.option("--target", "target_path", type=str, required=True, help="Target model checkpoint from `train`")
@click.option("--method", type=click.Choice([m.value for m in AttackMethod]), required=True)
@click.option("--clone-kind", type=click.Choice([k.value for k in ModelKind]), default=None,
              help="Clone architecture (defaults to the config's clone_kind)")
@click.option("--aux", "aux_path", type=str, default=None,
              help="Auxiliary checkpoint from `train --role auxiliary`; trained on the fly when omitted")
@click.option("--ranking-loss", type=click.Choice([p.value for p in PairLoss]), default=None)
@click.option("--positive-loss", type=click.Choice([p.value for p in PairLoss]), default=None)
@click.option("--out", type=str, default=None, help="Write the clone checkpoint here")
@click.option("--query-log", type=str, default=None, help="Export the oracle query log as CSV")
def attack(
    config_path: Optional[str],
    seed: Optional[int],
    target_path: str,
    method: str,
    clone_kind: Optional[str],
    aux_path: Optional[str],
    ranking_loss: Optional[str],
    positive_loss: Optional[str],
    out: Optional[str],
    query_log: Optional[str],
):
    """Build a clone of the target with one attack and report its Agreement."""
    cfg, base_dir = load_with_base(config_path)
    seed = resolve_seed(cfg, seed)
    split = split_for_seed(cfg, seed, base_dir)
    target = load_model(target_path)
    if not isinstance(target, EmbeddingModel):
        raise ModelError(f"{target_path} is not a plain target model")
    if (target.num_users, target.num_items) != (split.target.num_users, split.target.num_items):
        raise ModelError(
            f"Target checkpoint covers {target.num_users}x{target.num_items}, "
            f"dataset has {split.target.num_users}x{split.target.num_items}"
        )

    kind = ModelKind(clone_kind or cfg.clone_kind)
    stealing_loss = None
    if ranking_loss or positive_loss:
        stealing_loss = LossPair(
            ranking=ranking_loss or PairLoss.BPR.value, positive=positive_loss or PairLoss.HINGE.value
        )
    spec = AttackSpec(method=method, clone_kind=kind, stealing_loss=stealing_loss)

    aux_model, mask = None, None
    if spec.method.uses_auxiliary:
        if aux_path:
            aux_model, metadata = load_model_with_metadata(aux_path)
            if not isinstance(aux_model, EmbeddingModel) or aux_model.kind is not kind:
                raise ModelError(f"Auxiliary checkpoint {aux_path} is not a {kind.value} model (clone kind must match)")
            mask = np.zeros(aux_model.num_items, dtype=bool)
            mask[metadata.get("aux_eligible", list(range(aux_model.num_items)))] = True
        else:
            aux = sample_available(split.auxiliary, cfg.aux_fraction, [seed, 3])
            aux = restrict_item_overlap(aux, cfg.overlap_ratio, split.target_train.items_present(), [seed, 4])
            aux_model = train_model(kind, aux, derive_train_config(cfg.aux_train, seed, 1))
            mask = aux.eligibility_mask()

    available = split.available_target
    query_users, eval_users = partition_attack_users(available, cfg, seed)
    oracle = QueryOracle(
        target, split.target_train, k=cfg.k, budget=cfg.query_budget, defense=cfg.defense,
        audit=QueryAuditLogger(context={"experiment_id": cfg.experiment_id, "seed": seed, "method": method}),
    )
    ctx = AttackContext(
        available=available,
        clone_train=derive_train_config(cfg.clone_train, seed, 2),
        finetune=derive_train_config(cfg.finetune, seed, 2),
        clone_kind=kind,
        aux_model=aux_model,
        aux_eligible=mask,
        oracle=oracle,
        query_users=query_users,
    )
    result = run_attack(spec, ctx)

    mean_known = float(np.mean([split.target_train.items_of(u).size for u in eval_users]))
    summary = AttackSummary(
        method=method,
        clone_kind=kind.value,
        k=cfg.k,
        users=int(eval_users.size),
        queried_users=int(len(query_users)),
        agreement=mean_agreement(target, result.model, eval_users, cfg.k, split.target_train),
        random_baseline=random_agreement_baseline(cfg.k, split.target_train.num_items, mean_known),
        queries_spent=result.queries_spent,
        seconds=result.seconds,
    )
    if out:
        save_model(result.model, out, {"method": method, "seed": seed, "experiment_id": cfg.experiment_id})
    if query_log:
        oracle.export_log_csv(query_log)
    echo_json(summary.model_dump())
