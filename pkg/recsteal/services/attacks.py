"""
Attack Engine

Builds clone models from whatever the attacker knows:

    ptd       available target interactions only
    pta       + auxiliary item embeddings fused through attention
    pta_pre   + auxiliary item embeddings as the clone's initial item matrix
    ptq       ptd, then fine-tuned on oracle lists with the stealing loss
    ptaq      pta, then fine-tuned on oracle lists
    ptaq_pre  pta_pre, then fine-tuned on oracle lists
    qsd       random init trained on oracle lists alone
"""
import time
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from ..models.config_models import AttackMethod, AttackSpec, ModelKind, StealingLossSpec, TrainConfig
from .data_core import InteractionDataset
from .embed_models import EmbeddingModel, PlainScorer, init_random
from .errors import AttackAbortedError, BudgetExhaustedError, ConfigError, ModelError
from .fusion import FusedCloneModel, FusedScorer, fuse_clone
from .oracle import QueryOracle
from .stealing import StealingObjective
from .trainer import fit, interaction_objective, train_model

logger = logging.getLogger(__name__)

CloneModel = Union[EmbeddingModel, FusedCloneModel]
ATTENTION_PARAMS = ("att_w", "att_b")


def _check_aux(Q_a: np.ndarray, num_items: int, d: int) -> None:
    if Q_a.shape != (num_items, d):
        raise ModelError(f"Auxiliary item matrix {Q_a.shape} does not match item space ({num_items}, {d})")


def _trainable(params, train_attention: bool):
    if train_attention:
        return None
    return [name for name in params if name not in ATTENTION_PARAMS]


def train_ptd(available: InteractionDataset, cfg: TrainConfig, clone_kind=ModelKind.BPR) -> EmbeddingModel:
    """Train the clone on the attacker's share of target data, as the target itself was trained."""
    return train_model(clone_kind, available, cfg)


def train_pta(
    available: InteractionDataset,
    Q_a: np.ndarray,
    mask: Optional[np.ndarray],
    cfg: TrainConfig,
    clone_kind=ModelKind.BPR,
    train_attention: bool = True,
) -> FusedCloneModel:
    """
    Train P, Q_c and the attention weights on available target data with
    fused scoring; Q_a stays frozen.

    Raises:
        ModelError: Q_a does not cover the item space at the configured dimension
    """
    clone_kind = ModelKind(clone_kind)
    _check_aux(Q_a, available.num_items, cfg.embedding_dim)
    if mask is None:
        mask = np.ones(available.num_items, dtype=bool)
    base = init_random(clone_kind, available.num_users, available.num_items, cfg.embedding_dim, cfg.rng_seed)
    model = fuse_clone(base, Q_a, mask)
    objective = interaction_objective(clone_kind, FusedScorer(model.Q_a, model.aux_eligible), available, cfg)
    params = model.parameters()
    params, _ = fit(params, objective, cfg, f"pta-{clone_kind.value}", _trainable(params, train_attention))
    return model.with_parameters(params)


def train_pta_pretrain(
    available: InteractionDataset, Q_a: np.ndarray, cfg: TrainConfig, clone_kind=ModelKind.BPR
) -> EmbeddingModel:
    """PTD training with the clone item matrix initialized to a copy of Q_a."""
    clone_kind = ModelKind(clone_kind)
    _check_aux(Q_a, available.num_items, cfg.embedding_dim)
    base = init_random(clone_kind, available.num_users, available.num_items, cfg.embedding_dim, cfg.rng_seed)
    params = base.parameters()
    params["Q"] = np.array(Q_a, dtype=np.float64, copy=True)
    objective = interaction_objective(clone_kind, PlainScorer(), available, cfg)
    params, _ = fit(params, objective, cfg, f"pta_pre-{clone_kind.value}")
    return base.with_parameters(params)


def _collect_lists(oracle: QueryOracle, users: Sequence[int]) -> Dict[int, Sequence[int]]:
    lists = {}
    for position, user in enumerate(users):
        try:
            lists[int(user)] = oracle.query(user).items
        except BudgetExhaustedError as e:
            raise AttackAbortedError(
                f"Query budget exhausted after {position} of {len(users)} users",
                progress={
                    "queried": position,
                    "requested": len(users),
                    "spent": oracle.spent,
                    "budget": e.budget,
                },
            ) from e
    return lists


def finetune_with_queries(
    model: CloneModel,
    oracle: QueryOracle,
    users: Sequence[int],
    spec: StealingLossSpec,
    cfg: TrainConfig,
    known_interactions: Optional[InteractionDataset] = None,
    train_attention: bool = True,
) -> CloneModel:
    """
    Query each user once, then minimize the stealing loss against the
    returned lists for cfg.epochs passes.

    Args:
        known_interactions: Interactions the attacker knows for these users;
            excluded from negative sampling alongside each list

    Raises:
        AttackAbortedError: the oracle budget ran out; `progress` says how far it got
    """
    lists = _collect_lists(oracle, users)
    if isinstance(model, FusedCloneModel):
        scorer = FusedScorer(model.Q_a, model.aux_eligible)
    else:
        scorer = PlainScorer()
    objective = StealingObjective(scorer, lists, spec, model.num_items, known_interactions)
    params = model.parameters()
    params, _ = fit(
        params, objective, cfg, "finetune", _trainable(params, train_attention), rng_seed=[cfg.rng_seed, 2]
    )
    return model.with_parameters(params)


def train_qsd_adapted(
    oracle: QueryOracle,
    users: Sequence[int],
    spec: StealingLossSpec,
    cfg: TrainConfig,
    clone_kind=ModelKind.BPR,
) -> EmbeddingModel:
    """Random-init clone trained only on oracle lists; no interaction data, no fusion."""
    clone = init_random(clone_kind, oracle.num_users, oracle.num_items, cfg.embedding_dim, cfg.rng_seed)
    return finetune_with_queries(clone, oracle, users, spec, cfg, known_interactions=None)


@dataclass
class AttackContext:
    """
    What one attacker has to work with.

    Attributes:
        available: attacker's share of the target's training data
        clone_train: config for interaction-based clone training
        finetune: config for query fine-tuning
        clone_kind: default clone architecture
        aux_model: model trained on auxiliary data (same architecture as the clone)
        aux_eligible: overlap mask over items whose auxiliary embedding is usable
        oracle: query access to the target
        query_users: users to query; every available user when None
        cache: pre-trained clones shared between methods of the same run
    """
    available: InteractionDataset
    clone_train: TrainConfig
    finetune: TrainConfig
    clone_kind: ModelKind = ModelKind.BPR
    aux_model: Optional[EmbeddingModel] = None
    aux_eligible: Optional[np.ndarray] = None
    oracle: Optional[QueryOracle] = None
    query_users: Optional[Sequence[int]] = None
    cache: Dict[Any, CloneModel] = field(default_factory=dict)


@dataclass
class AttackResult:
    method: AttackMethod
    model: CloneModel
    queries_spent: int
    seconds: float


def _pretrained(method: AttackMethod, spec: AttackSpec, ctx: AttackContext, kind: ModelKind) -> CloneModel:
    key = (method, kind, spec.train_attention)
    if key in ctx.cache:
        return ctx.cache[key]
    if method is AttackMethod.PTD:
        model = train_ptd(ctx.available, ctx.clone_train, kind)
    else:
        if ctx.aux_model is None:
            raise ConfigError(f"Attack '{spec.method.value}' needs an auxiliary model")
        if method is AttackMethod.PTA:
            model = train_pta(
                ctx.available, ctx.aux_model.Q, ctx.aux_eligible, ctx.clone_train, kind, spec.train_attention
            )
        else:
            model = train_pta_pretrain(ctx.available, ctx.aux_model.Q, ctx.clone_train, kind)
    ctx.cache[key] = model
    return model


# Query-based methods and the interaction-trained clone they fine-tune
_PRETRAIN_OF = {
    AttackMethod.PTD: AttackMethod.PTD,
    AttackMethod.PTA: AttackMethod.PTA,
    AttackMethod.PTA_PRE: AttackMethod.PTA_PRE,
    AttackMethod.PTQ: AttackMethod.PTD,
    AttackMethod.PTAQ: AttackMethod.PTA,
    AttackMethod.PTAQ_PRE: AttackMethod.PTA_PRE,
}


def run_attack(spec: AttackSpec, ctx: AttackContext) -> AttackResult:
    """
    Execute one attack descriptor.

    Raises:
        ConfigError: the method needs an auxiliary model or oracle the context lacks
        AttackAbortedError: the oracle budget ran out
    """
    started = time.perf_counter()
    kind = ModelKind(spec.clone_kind or ctx.clone_kind)
    method = spec.method
    spent_before = ctx.oracle.spent if ctx.oracle is not None else 0
    if method.uses_queries and ctx.oracle is None:
        raise ConfigError(f"Attack '{method.value}' needs query access")

    finetune_cfg = ctx.finetune
    if spec.epochs is not None:
        finetune_cfg = finetune_cfg.model_copy(update={"epochs": spec.epochs})
    users = ctx.query_users if ctx.query_users is not None else ctx.available.users

    logger.info(f"Running attack {method.value} (clone {kind.value})")
    if method is AttackMethod.QSD:
        model = train_qsd_adapted(ctx.oracle, users, spec.loss_spec(), finetune_cfg, kind)
    else:
        model = _pretrained(_PRETRAIN_OF[method], spec, ctx, kind)
        if method.uses_queries:
            model = finetune_with_queries(
                model,
                ctx.oracle,
                users,
                spec.loss_spec(),
                finetune_cfg,
                known_interactions=ctx.available,
                train_attention=spec.train_attention,
            )
    spent = (ctx.oracle.spent if ctx.oracle is not None else 0) - spent_before
    seconds = round(time.perf_counter() - started, 3)
    logger.info(f"Attack {method.value} finished in {seconds}s ({spent} new queries)")
    return AttackResult(method=method, model=model, queries_spent=spent, seconds=seconds)
