"""
Attention Fusion

Clone models that blend their own item embeddings q_c with frozen
auxiliary item embeddings q_a. For user embedding p:

    alpha = w . ReLU(p * q_c) + b        beta = w . ReLU(p * q_a) + b
    (alpha', beta') = softmax(alpha, beta)
    q_f = alpha' q_c + beta' q_a         r = p . q_f

Items outside the auxiliary overlap skip fusion and score as p . q_c.
GMF clones apply their output head over p * q_f instead of the inner product.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..models.config_models import ModelKind
from .embed_models import EmbeddingModel, Params, _check_user, _dot_rows, _frozen_copy
from .errors import ModelError

logger = logging.getLogger(__name__)

# Upper bound on users x items x d floats held at once by score_matrix
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Single-layer attention weights (w, b)."""
    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen_copy(self.w, "attention w"))
        if not np.isfinite(self.b):
            raise ModelError("attention b is not finite")
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def zeros(cls, d: int) -> "AttentionParams":
        """w = 0, b = 0, so alpha' = beta' = 0.5 everywhere."""
        return cls(w=np.zeros(d), b=0.0)


def _softmax2(alpha, beta):
    top = np.maximum(alpha, beta)
    ea = np.exp(alpha - top)
    eb = np.exp(beta - top)
    total = ea + eb
    return ea / total, eb / total


def attention_coefficients(p, q_c, q_a, att: AttentionParams) -> Tuple[float, float]:
    """(alpha', beta') for one user/item embedding triple; they sum to 1."""
    p, q_c, q_a = (np.asarray(v, dtype=np.float64) for v in (p, q_c, q_a))
    alpha = float(np.maximum(p * q_c, 0.0) @ att.w + att.b)
    beta = float(np.maximum(p * q_a, 0.0) @ att.w + att.b)
    a, b = _softmax2(alpha, beta)
    return float(a), float(b)


@dataclass(frozen=True, eq=False)
class FusedCloneModel:
    """
    Clone whose item representation fuses trainable and auxiliary embeddings.

    Attributes:
        kind: clone scorer family (bpr, lmf or gmf)
        P: user embeddings
        Q_c: clone item embeddings (trainable)
        Q_a: auxiliary item embeddings (never modified)
        attention: attention weights
        aux_eligible: items whose auxiliary embedding may be used
        head_w, head_b: GMF output head
    """
    kind: ModelKind
    P: np.ndarray
    Q_c: np.ndarray
    Q_a: np.ndarray
    attention: AttentionParams
    aux_eligible: np.ndarray
    head_w: Optional[np.ndarray] = None
    head_b: float = 0.0

    def __post_init__(self):
        # Validate the plain part through EmbeddingModel's checks
        EmbeddingModel(kind=self.kind, P=self.P, Q=self.Q_c, head_w=self.head_w, head_b=self.head_b)
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "P", _frozen_copy(self.P, "P"))
        object.__setattr__(self, "Q_c", _frozen_copy(self.Q_c, "Q_c"))
        object.__setattr__(self, "Q_a", _frozen_copy(self.Q_a, "Q_a"))
        if self.head_w is not None:
            object.__setattr__(self, "head_w", _frozen_copy(self.head_w, "head_w"))
        object.__setattr__(self, "head_b", float(self.head_b))
        if self.Q_a.shape != self.Q_c.shape:
            raise ModelError(f"Auxiliary item matrix {self.Q_a.shape} does not match clone {self.Q_c.shape}")
        if self.attention.w.shape != (self.dim,):
            raise ModelError(f"Attention w has shape {self.attention.w.shape}, expected ({self.dim},)")
        mask = np.array(self.aux_eligible, dtype=bool, copy=True)
        if mask.shape != (self.num_items,):
            raise ModelError("Eligibility mask must cover the item space")
        mask.setflags(write=False)
        object.__setattr__(self, "aux_eligible", mask)

    @property
    def num_users(self) -> int:
        return self.P.shape[0]

    @property
    def num_items(self) -> int:
        return self.Q_c.shape[0]

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    def parameters(self) -> Params:
        params = {
            "P": self.P.copy(),
            "Q": self.Q_c.copy(),
            "att_w": self.attention.w.copy(),
            "att_b": np.array([self.attention.b]),
        }
        if self.head_w is not None:
            params["head_w"] = self.head_w.copy()
            params["head_b"] = np.array([self.head_b])
        return params

    def with_parameters(self, params: Params) -> "FusedCloneModel":
        return FusedCloneModel(
            kind=self.kind,
            P=params["P"],
            Q_c=params["Q"],
            Q_a=self.Q_a,
            attention=AttentionParams(w=params["att_w"], b=float(params["att_b"][0])),
            aux_eligible=self.aux_eligible,
            head_w=params.get("head_w"),
            head_b=float(params["head_b"][0]) if "head_b" in params else 0.0,
        )

    def score_matrix(self, users: Sequence[int]) -> np.ndarray:
        """Scores of every item for each of `users`, attention evaluated in user chunks."""
        users = np.asarray(users, dtype=np.int64)
        if users.size == 0:
            return np.empty((0, self.num_items))
        step = max(1, _CHUNK_ELEMENTS // (self.num_items * self.dim))
        return np.vstack([self._chunk_scores(users[start:start + step]) for start in range(0, users.size, step)])

    def _chunk_scores(self, users: np.ndarray) -> np.ndarray:
        P = self.P[users]
        w, b = self.attention.w, self.attention.b
        # (users, items, d) products feed the ReLU attention
        alpha = np.maximum(P[:, None, :] * self.Q_c[None, :, :], 0.0) @ w + b
        beta = np.maximum(P[:, None, :] * self.Q_a[None, :, :], 0.0) @ w + b
        a, c = _softmax2(alpha, beta)
        u_eff = P if self.head_w is None else P * self.head_w
        plain = u_eff @ self.Q_c.T
        fused = a * plain + c * (u_eff @ self.Q_a.T)
        if self.head_w is not None:
            plain, fused = plain + self.head_b, fused + self.head_b
        return np.where(self.aux_eligible[None, :], fused, plain)


def fused_score(model: FusedCloneModel, user: int, item: int) -> float:
    """r = p . q_f for overlap-eligible items, p . q_c otherwise."""
    user = _check_user(model, user)
    item = int(item)
    if not 0 <= item < model.num_items:
        raise ModelError(f"Item index {item} outside [0, {model.num_items})")
    p, q_c, q_a = model.P[user], model.Q_c[item], model.Q_a[item]
    if model.aux_eligible[item]:
        a, c = attention_coefficients(p, q_c, q_a, model.attention)
        q = a * q_c + c * q_a
    else:
        q = q_c
    if model.head_w is None:
        return float(p @ q)
    return float((p * q) @ model.head_w + model.head_b)


class FusedScorer:
    """
    Batched fused scoring with analytic gradients for P, Q_c, attention
    (w, b) and the optional GMF head. Q_a is held here, outside the
    trainable parameter set.

    Rows whose item is not eligible are computed exactly as PlainScorer
    computes them, so an all-ineligible mask reproduces plain training.
    """

    def __init__(self, Q_a: np.ndarray, aux_eligible: np.ndarray):
        self.Q_a = Q_a
        self.aux_eligible = np.asarray(aux_eligible, dtype=bool)

    def forward(self, params: Params, users: np.ndarray, items: np.ndarray):
        p = params["P"][users]
        qc = params["Q"][items]
        qa = self.Q_a[items]
        eligible = self.aux_eligible[items]
        w, b = params["att_w"], params["att_b"][0]
        pre_c, pre_a = p * qc, p * qa
        hc, ha = np.maximum(pre_c, 0.0), np.maximum(pre_a, 0.0)
        a, c = _softmax2(hc @ w + b, ha @ w + b)
        qf = a[:, None] * qc + c[:, None] * qa
        if "head_w" in params:
            h_plain = p * qc
            h_fused = p * qf
            h = np.where(eligible[:, None], h_fused, h_plain)
            scores = h @ params["head_w"] + params["head_b"][0]
        else:
            h = None
            scores = np.where(eligible, _dot_rows(p, qf), _dot_rows(p, qc))
        cache = {
            "users": users, "items": items, "eligible": eligible,
            "p": p, "qc": qc, "qa": qa, "qf": qf, "hc": hc, "ha": ha,
            "pre_c": pre_c, "pre_a": pre_a, "a": a, "c": c, "h": h,
        }
        return scores, cache

    def backward(self, params: Params, cache, upstream: np.ndarray) -> Params:
        p, qc, qa, qf = cache["p"], cache["qc"], cache["qa"], cache["qf"]
        eligible = cache["eligible"][:, None]
        w = params["att_w"]
        grads = {name: np.zeros_like(value) for name, value in params.items()}

        head_w = params.get("head_w")
        u_eff = p * head_w if head_w is not None else p
        # d r / d alpha; d r / d beta is its negation
        g_alpha = cache["a"] * cache["c"] * _dot_rows(u_eff, qc - qa)
        mask_c = (cache["pre_c"] > 0).astype(np.float64)
        mask_a = (cache["pre_a"] > 0).astype(np.float64)

        fused_dp = (qf * head_w if head_w is not None else qf) + g_alpha[:, None] * (
            w * mask_c * qc - w * mask_a * qa
        )
        fused_dq = cache["a"][:, None] * u_eff + g_alpha[:, None] * (w * mask_c * p)
        plain_dp = qc * head_w if head_w is not None else qc
        plain_dq = p * head_w if head_w is not None else p
        d_p = np.where(eligible, fused_dp, plain_dp)
        d_q = np.where(eligible, fused_dq, plain_dq)

        if head_w is not None:
            grads["head_w"] = upstream @ cache["h"]
            grads["head_b"] = np.array([upstream.sum()])
        np.add.at(grads["P"], cache["users"], upstream[:, None] * d_p)
        np.add.at(grads["Q"], cache["items"], upstream[:, None] * d_q)
        g_att = np.where(cache["eligible"], upstream * g_alpha, 0.0)
        grads["att_w"] = g_att @ (cache["hc"] - cache["ha"])
        return grads

    def active_set(self, params: Params, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        """ReLU branch pattern, for finite-difference kink detection."""
        p = params["P"][users]
        return np.concatenate([
            (p * params["Q"][items] > 0).ravel(),
            (p * self.Q_a[items] > 0).ravel(),
        ])


def fuse_clone(model: EmbeddingModel, Q_a: np.ndarray, aux_eligible: np.ndarray) -> FusedCloneModel:
    """Wrap a plain clone with frozen auxiliary embeddings and fresh attention."""
    if Q_a.shape != model.Q.shape:
        raise ModelError(f"Auxiliary item matrix {Q_a.shape} does not match clone item matrix {model.Q.shape}")
    return FusedCloneModel(
        kind=model.kind,
        P=model.P,
        Q_c=model.Q,
        Q_a=Q_a,
        attention=AttentionParams.zeros(model.dim),
        aux_eligible=aux_eligible,
        head_w=model.head_w,
        head_b=model.head_b,
    )
