"""
Query Oracle

Black-box access to a target recommender: a user index goes in, the
target's (optionally defended) top-K list comes out. The budget counts
distinct users; repeat queries are answered from a cache for free.
"""
import csv
import logging
import threading
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..models.config_models import DefenseConfig
from .data_core import InteractionDataset
from .defense import defended_top_k, popularity_ranking
from .embed_models import EmbeddingModel, RecommendationList
from .errors import BudgetExhaustedError, DefenseError, ModelError
from .query_audit import QueryAuditLogger, QueryEventType

logger = logging.getLogger(__name__)


class QueryOracle:
    """
    Budget-limited query interface to a target model.

    One query is in flight at a time; a lock serializes callers.
    """

    def __init__(
        self,
        target: EmbeddingModel,
        interactions: InteractionDataset,
        k: int = 50,
        budget: Optional[int] = None,
        defense: Optional[DefenseConfig] = None,
        audit: Optional[QueryAuditLogger] = None,
    ):
        """
        Args:
            target: Model answering queries
            interactions: The target's training interactions (excluded from lists,
                and the basis of the popularity ranking)
            k: List length K
            budget: Maximum distinct users queried; unlimited when None
            defense: Popularity-mixing defense applied per query
            audit: Audit sink; a default QueryAuditLogger when omitted
        """
        if interactions.num_items != target.num_items or interactions.num_users != target.num_users:
            raise ModelError("Oracle interactions do not share the target model's index spaces")
        if budget is not None and budget < 0:
            raise ModelError(f"Query budget must be >= 0 (got {budget})")
        if defense is not None and defense.mix_count > k:
            raise DefenseError(f"mix_count {defense.mix_count} exceeds K={k}")
        self._target = target
        self._interactions = interactions
        self.k = k
        self.budget = budget
        self.defense = defense
        self.audit = audit or QueryAuditLogger()
        self._popular = popularity_ranking(interactions) if defense is not None else None
        self._rng = np.random.default_rng(defense.rng_seed) if defense is not None else None
        self._cache: Dict[int, RecommendationList] = {}
        self._log: List[Tuple[int, RecommendationList]] = []
        self._lock = threading.Lock()

    @property
    def num_users(self) -> int:
        return self._target.num_users

    @property
    def num_items(self) -> int:
        return self._target.num_items

    @property
    def spent(self) -> int:
        return len(self._log)

    @property
    def remaining(self) -> Optional[int]:
        return None if self.budget is None else self.budget - self.spent

    @property
    def log(self) -> List[Tuple[int, RecommendationList]]:
        return list(self._log)

    def query(self, user: int) -> RecommendationList:
        """
        The target's top-K list for `user`.

        Raises:
            BudgetExhaustedError: a new user would exceed the budget
            ModelError: user index out of range
        """
        user = int(user)
        if not 0 <= user < self.num_users:
            raise ModelError(f"User index {user} outside [0, {self.num_users})")
        with self._lock:
            cached = self._cache.get(user)
            if cached is not None:
                self.audit.log_event(QueryEventType.CACHE_HIT, user, self.spent, self.budget, cached.items)
                return cached
            if self.budget is not None and self.spent >= self.budget:
                self.audit.log_event(QueryEventType.BUDGET_EXHAUSTED, user, self.spent, self.budget)
                raise BudgetExhaustedError(self.budget, user)

            exclude = self._interactions.items_of(user)
            response = defended_top_k(self._target, user, self.k, exclude, self.defense, self._popular, self._rng)
            if self.defense is not None and self.defense.mix_count > 0:
                self.audit.log_event(
                    QueryEventType.DEFENSE_APPLIED, user, self.spent, self.budget, response.items,
                    metadata={"mix_count": self.defense.mix_count},
                )
            self._cache[user] = response
            self._log.append((user, response))
            self.audit.log_event(QueryEventType.QUERY_SERVED, user, self.spent, self.budget, response.items)
            return response

    def export_log_csv(self, path: str) -> None:
        """Write query_index,user_id,item_ids (pipe-separated raw IDs)."""
        user_ids, item_ids = self._interactions.user_ids, self._interactions.item_ids
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["query_index", "user_id", "item_ids"])
            for index, (user, response) in enumerate(self._log):
                writer.writerow([index, user_ids[user], "|".join(item_ids[i] for i in response.items)])
        logger.info(f"Exported {len(self._log)} oracle queries to {path}")
