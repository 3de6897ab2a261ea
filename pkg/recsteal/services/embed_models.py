"""
Embedding Recommenders

BPR, LMF and GMF models over a user matrix P and an item matrix Q, plus
scoring and top-K recommendation with interacted-item exclusion.

BPR and LMF score with the inner product p_u . q_i; GMF applies a learned
linear head over the Hadamard product, w_o . (p_u * q_i) + b_o.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.config_models import ModelKind
from .errors import ModelError

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


def _frozen_copy(array, name: str) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(out)):
        raise ModelError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


def _dot_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise inner products of two equally shaped matrices."""
    return np.einsum("ij,ij->i", a, b)


@dataclass(frozen=True)
class RecommendationList:
    """Ordered top-K items for one user, best first."""
    user: int
    items: Tuple[int, ...]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ModelError(f"Recommendation list for user {self.user} contains duplicates")

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    """
    A trained (or freshly initialized) embedding recommender.

    Attributes:
        kind: bpr, lmf or gmf
        P: user embeddings, num_users x d
        Q: item embeddings, num_items x d
        head_w: GMF output weights (length d), present iff kind is gmf
        head_b: GMF output bias
    """
    kind: ModelKind
    P: np.ndarray
    Q: np.ndarray
    head_w: Optional[np.ndarray] = None
    head_b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "P", _frozen_copy(self.P, "P"))
        object.__setattr__(self, "Q", _frozen_copy(self.Q, "Q"))
        if self.P.ndim != 2 or self.Q.ndim != 2 or self.P.shape[1] != self.Q.shape[1]:
            raise ModelError(f"Embedding shapes disagree: P {self.P.shape}, Q {self.Q.shape}")
        if self.kind is ModelKind.GMF:
            if self.head_w is None:
                raise ModelError("GMF models need an output head")
            object.__setattr__(self, "head_w", _frozen_copy(self.head_w, "head_w"))
            if self.head_w.shape != (self.dim,):
                raise ModelError(f"GMF head has shape {self.head_w.shape}, expected ({self.dim},)")
            if not np.isfinite(self.head_b):
                raise ModelError("head_b is not finite")
            object.__setattr__(self, "head_b", float(self.head_b))
        elif self.head_w is not None:
            raise ModelError(f"{self.kind.value} models have no output head")

    @property
    def num_users(self) -> int:
        return self.P.shape[0]

    @property
    def num_items(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    def parameters(self) -> Params:
        """Writable copies of every trainable array."""
        params = {"P": self.P.copy(), "Q": self.Q.copy()}
        if self.head_w is not None:
            params["head_w"] = self.head_w.copy()
            params["head_b"] = np.array([self.head_b])
        return params

    def with_parameters(self, params: Params) -> "EmbeddingModel":
        return EmbeddingModel(
            kind=self.kind,
            P=params["P"],
            Q=params["Q"],
            head_w=params.get("head_w"),
            head_b=float(params["head_b"][0]) if "head_b" in params else 0.0,
        )

    def score_matrix(self, users: Sequence[int]) -> np.ndarray:
        """Scores of every item for each of `users` (len(users) x num_items)."""
        users = np.asarray(users, dtype=np.int64)
        if self.head_w is None:
            return self.P[users] @ self.Q.T
        return (self.P[users] * self.head_w) @ self.Q.T + self.head_b


class PlainScorer:
    """
    Batched scoring with analytic gradients for EmbeddingModel parameters.

    forward returns scores for aligned (user, item) rows; backward maps the
    per-row upstream gradient onto dense gradients for every parameter.
    """

    def forward(self, params: Params, users: np.ndarray, items: np.ndarray):
        p = params["P"][users]
        q = params["Q"][items]
        if "head_w" in params:
            h = p * q
            scores = h @ params["head_w"] + params["head_b"][0]
        else:
            h = None
            scores = _dot_rows(p, q)
        return scores, {"users": users, "items": items, "p": p, "q": q, "h": h}

    def backward(self, params: Params, cache, upstream: np.ndarray) -> Params:
        p, q = cache["p"], cache["q"]
        grads = {name: np.zeros_like(value) for name, value in params.items()}
        if "head_w" in params:
            head_w = params["head_w"]
            d_p = q * head_w
            d_q = p * head_w
            grads["head_w"] = upstream @ cache["h"]
            grads["head_b"] = np.array([upstream.sum()])
        else:
            d_p, d_q = q, p
        np.add.at(grads["P"], cache["users"], upstream[:, None] * d_p)
        np.add.at(grads["Q"], cache["items"], upstream[:, None] * d_q)
        return grads


def _check_user(model, user: int) -> int:
    user = int(user)
    if not 0 <= user < model.num_users:
        raise ModelError(f"User index {user} outside [0, {model.num_users})")
    return user


def score(model: EmbeddingModel, user: int, item: int) -> float:
    """Predicted rating of `user` for `item`."""
    user = _check_user(model, user)
    item = int(item)
    if not 0 <= item < model.num_items:
        raise ModelError(f"Item index {item} outside [0, {model.num_items})")
    return float(score_items(model, user)[item])


def score_items(model, user: int) -> np.ndarray:
    """Scores of every item for one user; works for plain and fused models."""
    user = _check_user(model, user)
    return model.score_matrix([user])[0]


def top_k_from_scores(scores: np.ndarray, k: int, exclude: Optional[Iterable[int]] = None) -> np.ndarray:
    """
    Indices of the k best-scored items outside `exclude`, best first, ties
    broken by ascending item index.
    """
    num_items = scores.shape[0]
    allowed = np.ones(num_items, dtype=bool)
    if exclude is not None:
        excluded = np.fromiter((int(i) for i in exclude), dtype=np.int64)
        if excluded.size and (excluded.min() < 0 or excluded.max() >= num_items):
            raise ModelError(f"Excluded item index outside [0, {num_items})")
        allowed[excluded] = False
    candidates = np.flatnonzero(allowed)
    if k < 1 or k > candidates.size:
        raise ModelError(f"k={k} must be in [1, {candidates.size}] (items outside the exclusion set)")
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order[:k]]


def recommend_top_k(model, user: int, k: int, exclude: Optional[Iterable[int]] = None) -> RecommendationList:
    """The k highest-scored items for `user` that are not in `exclude`."""
    items = top_k_from_scores(score_items(model, user), k, exclude)
    return RecommendationList(user=int(user), items=tuple(int(i) for i in items))


def recommend_for_users(
    model,
    users: Sequence[int],
    k: int,
    exclusions,
    chunk_size: int = 256,
) -> List[RecommendationList]:
    """
    Top-K lists for many users, scored in chunks.

    Args:
        exclusions: InteractionDataset whose per-user items are excluded
    """
    users = [_check_user(model, u) for u in users]
    lists: List[RecommendationList] = []
    for start in range(0, len(users), chunk_size):
        chunk = users[start:start + chunk_size]
        scores = model.score_matrix(chunk)
        for row, user in enumerate(chunk):
            items = top_k_from_scores(scores[row], k, exclusions.items_of(user))
            lists.append(RecommendationList(user=user, items=tuple(int(i) for i in items)))
    return lists


def init_random(kind, num_users: int, num_items: int, d: int, rng_seed) -> EmbeddingModel:
    """Entries i.i.d. uniform in [-0.5/d, 0.5/d]; GMF heads start as the identity (w_o = 1, b_o = 0)."""
    if num_users < 1 or num_items < 1 or d < 1:
        raise ModelError(f"Dimensions must be positive (users={num_users}, items={num_items}, d={d})")
    kind = ModelKind(kind)
    rng = np.random.default_rng(rng_seed)
    bound = 0.5 / d
    P = rng.uniform(-bound, bound, size=(num_users, d))
    Q = rng.uniform(-bound, bound, size=(num_items, d))
    head_w = np.ones(d) if kind is ModelKind.GMF else None
    return EmbeddingModel(kind=kind, P=P, Q=Q, head_w=head_w, head_b=0.0)
