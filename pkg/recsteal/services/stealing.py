"""
Stealing Loss

Loss that teaches a clone to reproduce a target's recommendation lists.
For a user's target list R = [j_1, ..., j_K]:

    ranking term   sum over consecutive pairs of ranking_loss(r_j - r_j')
    positive term  sum over list items j and sampled negatives k of
                   positive_loss(r_j - r_k)

Negatives come from outside the user's known interactions and the list
itself, so a recommended item is never its own negative.
"""
import logging
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..models.config_models import StealingLossSpec
from .data_core import InteractionDataset, NegativeSample, sample_negative_block
from .embed_models import Params, RecommendationList, score_items
from .errors import DataError, ModelError
from .losses import pair_loss, pair_loss_grad

logger = logging.getLogger(__name__)


def stealing_loss(
    model,
    user: int,
    rec_list: RecommendationList,
    spec: StealingLossSpec,
    negatives: Sequence[NegativeSample],
) -> float:
    """
    L_S = L_r + L_p for one user.

    Args:
        model: EmbeddingModel or FusedCloneModel
        negatives: one NegativeSample per list position

    Raises:
        ModelError: empty list, or negatives not aligned with the list
    """
    items = np.asarray(rec_list.items, dtype=np.int64)
    if items.size == 0:
        raise ModelError("Stealing loss needs a non-empty recommendation list")
    if len(negatives) != items.size:
        raise ModelError(f"Expected {items.size} negative samples, got {len(negatives)}")
    scores = score_items(model, user)
    ranking = pair_loss(spec.ranking_loss, scores[items[:-1]] - scores[items[1:]], spec.margin)
    positive = 0.0
    for item, sample in zip(items, negatives):
        negs = np.asarray(sample.items, dtype=np.int64)
        positive += float(np.sum(pair_loss(spec.positive_loss, scores[item] - scores[negs], spec.margin)))
    return float(np.sum(ranking)) + positive


class StealingObjective:
    """
    Mini-batched stealing loss over users with cached target lists.

    Batches hold max(1, batch_size // terms_per_user) users; the batch loss
    is the per-user stealing loss averaged over the batch.
    """
    name = "stealing"

    def __init__(
        self,
        scorer,
        lists: Mapping[int, Sequence[int]],
        spec: StealingLossSpec,
        num_items: int,
        known_interactions: Optional[InteractionDataset] = None,
    ):
        if not lists:
            raise DataError("No recommendation lists to learn from")
        self.scorer = scorer
        self.spec = spec
        self.users = np.array(sorted(lists), dtype=np.int64)
        self.lists: Dict[int, np.ndarray] = {}
        self.candidates: Dict[int, np.ndarray] = {}
        for user in self.users:
            items = np.asarray(lists[user], dtype=np.int64)
            if items.size == 0:
                raise ModelError(f"Empty recommendation list for user {user}")
            excluded = np.zeros(num_items, dtype=bool)
            excluded[items] = True
            if known_interactions is not None:
                excluded[known_interactions.items_of(user)] = True
            self.lists[int(user)] = items
            self.candidates[int(user)] = np.flatnonzero(~excluded)
        longest = max(items.size for items in self.lists.values())
        self.terms_per_user = max(1, (longest - 1) + longest * spec.negatives_per_list_item)

    @property
    def num_rows(self) -> int:
        return self.users.size

    def batches(self, rng: np.random.Generator, batch_size: int):
        per_batch = max(1, batch_size // self.terms_per_user)
        order = rng.permutation(self.users)
        n = self.spec.negatives_per_list_item
        for start in range(0, order.size, per_batch):
            users = order[start:start + per_batch]
            negatives = [
                sample_negative_block(self.candidates[int(u)], self.lists[int(u)].size, n, rng)
                for u in users
            ]
            yield users, negatives

    def _rows(self, batch):
        users, negatives = batch
        rank_u, rank_hi, rank_lo = [], [], []
        pos_u, pos_hi, pos_lo = [], [], []
        n = self.spec.negatives_per_list_item
        for user, negs in zip(users, negatives):
            items = self.lists[int(user)]
            rank_u.append(np.full(items.size - 1, user, dtype=np.int64))
            rank_hi.append(items[:-1])
            rank_lo.append(items[1:])
            pos_u.append(np.full(items.size * n, user, dtype=np.int64))
            pos_hi.append(np.repeat(items, n))
            pos_lo.append(negs.reshape(-1))
        cat = np.concatenate
        return (
            cat(rank_u), cat(rank_hi), cat(rank_lo),
            cat(pos_u), cat(pos_hi), cat(pos_lo),
        )

    def loss_and_grads(self, params: Params, batch):
        rank_u, rank_hi, rank_lo, pos_u, pos_hi, pos_lo = self._rows(batch)
        n_rank, n_pos = rank_u.size, pos_u.size
        m = n_rank + n_pos
        scores, cache = self.scorer.forward(
            params,
            np.concatenate([rank_u, pos_u, rank_u, pos_u]),
            np.concatenate([rank_hi, pos_hi, rank_lo, pos_lo]),
        )
        diff = scores[:m] - scores[m:]
        spec = self.spec
        batch_users = len(batch[0])
        loss = (
            float(np.sum(pair_loss(spec.ranking_loss, diff[:n_rank], spec.margin)))
            + float(np.sum(pair_loss(spec.positive_loss, diff[n_rank:], spec.margin)))
        ) / batch_users
        g = np.concatenate([
            pair_loss_grad(spec.ranking_loss, diff[:n_rank], spec.margin),
            pair_loss_grad(spec.positive_loss, diff[n_rank:], spec.margin),
        ]) / batch_users
        return loss, self.scorer.backward(params, cache, np.concatenate([g, -g]))

    def active_set(self, params: Params, batch) -> np.ndarray:
        """Hinge branches plus any ReLU branches of the scorer."""
        rank_u, rank_hi, rank_lo, pos_u, pos_hi, pos_lo = self._rows(batch)
        users = np.concatenate([rank_u, pos_u, rank_u, pos_u])
        items = np.concatenate([rank_hi, pos_hi, rank_lo, pos_lo])
        scores, _ = self.scorer.forward(params, users, items)
        m = rank_u.size + pos_u.size
        parts: List[np.ndarray] = [self.spec.margin - (scores[:m] - scores[m:]) > 0]
        if hasattr(self.scorer, "active_set"):
            parts.append(self.scorer.active_set(params, users, items))
        return np.concatenate(parts)
