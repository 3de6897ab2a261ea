"""
Training Loops

Shared mini-batch Adam loop plus the interaction objectives used to fit
target, auxiliary and clone models: pairwise BPR for ModelKind.BPR and
pointwise logistic loss with sampled negatives for LMF and GMF.

An objective yields shuffled batches and turns a batch into a mean loss
and dense gradients through a scorer (PlainScorer or FusedScorer), so the
same loop trains plain and attention-fused models.
"""
import time
import logging
from typing import Any, Iterable, Iterator, Optional, Tuple

import numpy as np

from ..models.config_models import ModelKind, PairLoss, TrainConfig
from ..models.result_models import TrainingSummary
from .data_core import InteractionDataset, sample_training_negatives
from .embed_models import EmbeddingModel, Params, PlainScorer, init_random
from .errors import DataError, TrainingDivergedError
from .losses import loss_logistic, loss_logistic_grad, pair_loss, pair_loss_grad
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


class PairwiseObjective:
    """Mean BPR loss over (user, positive, sampled negative) triplets."""
    name = "pairwise"

    def __init__(self, scorer, ds: InteractionDataset, negatives_per_positive: int = 1):
        if ds.num_interactions == 0:
            raise DataError("Cannot train on a dataset with no interactions")
        users, items = ds.pairs()
        self.scorer = scorer
        self.mask = ds.interaction_mask
        self.users = np.repeat(users, negatives_per_positive)
        self.items = np.repeat(items, negatives_per_positive)

    @property
    def num_rows(self) -> int:
        return self.users.size

    def batches(self, rng: np.random.Generator, batch_size: int) -> Iterator[Tuple[np.ndarray, ...]]:
        order = rng.permutation(self.num_rows)
        for start in range(0, order.size, batch_size):
            rows = order[start:start + batch_size]
            users = self.users[rows]
            negatives = sample_training_negatives(self.mask, users, 1, rng)[:, 0]
            yield users, self.items[rows], negatives

    def loss_and_grads(self, params: Params, batch) -> Tuple[float, Params]:
        users, positives, negatives = batch
        n = users.size
        scores, cache = self.scorer.forward(
            params, np.concatenate([users, users]), np.concatenate([positives, negatives])
        )
        diff = scores[:n] - scores[n:]
        loss = float(np.mean(pair_loss(PairLoss.BPR, diff, 0.0)))
        g = pair_loss_grad(PairLoss.BPR, diff, 0.0) / n
        return loss, self.scorer.backward(params, cache, np.concatenate([g, -g]))


class PointwiseObjective:
    """Mean logistic loss over positives (label 1) and sampled negatives (label 0)."""
    name = "pointwise"

    def __init__(self, scorer, ds: InteractionDataset, negatives_per_positive: int = 4):
        if ds.num_interactions == 0:
            raise DataError("Cannot train on a dataset with no interactions")
        self.scorer = scorer
        self.mask = ds.interaction_mask
        self.users, self.items = ds.pairs()
        self.negatives = negatives_per_positive

    @property
    def num_rows(self) -> int:
        return self.users.size

    def batches(self, rng: np.random.Generator, batch_size: int):
        order = rng.permutation(self.num_rows)
        for start in range(0, order.size, batch_size):
            rows = order[start:start + batch_size]
            users = self.users[rows]
            negatives = sample_training_negatives(self.mask, users, self.negatives, rng)
            yield users, self.items[rows], negatives

    def loss_and_grads(self, params: Params, batch) -> Tuple[float, Params]:
        users, positives, negatives = batch
        neg_users = np.repeat(users, self.negatives)
        all_users = np.concatenate([users, neg_users])
        all_items = np.concatenate([positives, negatives.reshape(-1)])
        labels = np.concatenate([np.ones(users.size), np.zeros(neg_users.size)])
        scores, cache = self.scorer.forward(params, all_users, all_items)
        loss = float(np.mean(loss_logistic(scores, labels)))
        g = loss_logistic_grad(scores, labels) / labels.size
        return loss, self.scorer.backward(params, cache, g)


def interaction_objective(kind, scorer, ds: InteractionDataset, cfg: TrainConfig):
    """The kind's own training objective over `ds`."""
    kind = ModelKind(kind)
    if kind.pointwise:
        return PointwiseObjective(scorer, ds, cfg.negatives_for(kind))
    return PairwiseObjective(scorer, ds, cfg.negatives_for(kind))


def fit(
    params: Params,
    objective,
    cfg: TrainConfig,
    kind: str,
    trainable: Optional[Iterable[str]] = None,
    rng_seed: Any = None,
) -> Tuple[Params, TrainingSummary]:
    """
    Run Adam over shuffled mini-batches until cfg.epochs or early stop.

    Args:
        params: Parameter arrays, updated in place
        objective: Supplies batches(rng, batch_size) and loss_and_grads(params, batch)
        trainable: Parameter names that may move; all of them when omitted
        rng_seed: Sampling seed; defaults to [cfg.rng_seed, 1]

    Raises:
        TrainingDivergedError: a batch loss is not finite
    """
    started = time.perf_counter()
    rng = np.random.default_rng([cfg.rng_seed, 1] if rng_seed is None else rng_seed)
    trainable = set(params) if trainable is None else set(trainable)
    state = AdamState()
    history = []
    last_finite: Optional[float] = None
    converged = False

    for epoch in range(1, cfg.epochs + 1):
        total, rows = 0.0, 0
        for batch_index, batch in enumerate(objective.batches(rng, cfg.batch_size)):
            loss, grads = objective.loss_and_grads(params, batch)
            if cfg.l2_reg > 0:
                for name in sorted(trainable):
                    loss += 0.5 * cfg.l2_reg * float(np.sum(params[name] ** 2))
                    grads[name] = grads[name] + cfg.l2_reg * params[name]
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch_index, last_finite)
            last_finite = loss
            adam_step(state, params, {name: grads[name] for name in grads if name in trainable}, cfg.learning_rate)
            size = len(batch[0])
            total += loss * size
            rows += size
        mean_loss = total / rows if rows else 0.0
        history.append(mean_loss)
        logger.info(f"[{kind}/{objective.name}] epoch {epoch}: mean loss {mean_loss:.6f}")
        if len(history) > 1 and abs(history[-1] - history[-2]) < cfg.tolerance:
            converged = True
            break

    summary = TrainingSummary(
        kind=str(kind),
        objective=objective.name,
        epochs_run=len(history),
        final_loss=history[-1] if history else None,
        converged=converged,
        loss_history=history,
        seconds=round(time.perf_counter() - started, 3),
    )
    logger.info(summary.model_dump_json())
    return params, summary


def train_model_with_summary(kind, ds: InteractionDataset, cfg: TrainConfig) -> Tuple[EmbeddingModel, TrainingSummary]:
    kind = ModelKind(kind)
    model = init_random(kind, ds.num_users, ds.num_items, cfg.embedding_dim, cfg.rng_seed)
    objective = interaction_objective(kind, PlainScorer(), ds, cfg)
    params, summary = fit(model.parameters(), objective, cfg, kind.value)
    return model.with_parameters(params), summary


def train_model(kind, ds: InteractionDataset, cfg: TrainConfig) -> EmbeddingModel:
    """
    Fit a BPR, LMF or GMF model on `ds`, deterministically under cfg.rng_seed.

    Raises:
        DataError: empty dataset
        TrainingDivergedError: non-finite loss
    """
    model, _ = train_model_with_summary(kind, ds, cfg)
    return model
