"""
Result models.

Records emitted by training, attacks and experiment runs.
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class DatasetSummary(BaseModel):
    """Headline statistics reported by `ingest`."""
    num_users: int
    num_items: int
    active_users: int = Field(..., description="Users with at least one interaction")
    num_interactions: int
    sparsity: float
    min_user_interactions: int
    mean_user_interactions: float
    max_user_interactions: int


class TrainingSummary(BaseModel):
    """Machine-readable summary written when a training run completes."""
    kind: str
    objective: str = Field(..., description="pairwise, pointwise or stealing")
    epochs_run: int
    final_loss: Optional[float] = None
    converged: bool = False
    loss_history: List[float] = Field(default_factory=list)
    seconds: float = 0.0


class AttackSummary(BaseModel):
    """Outcome of one attack run by the `attack` subcommand."""
    method: str
    clone_kind: str
    k: int
    users: int = Field(..., description="Held-out users Agreement was scored on")
    queried_users: int = Field(..., description="Users the attack was allowed to query")
    agreement: float = Field(..., ge=0, le=1)
    random_baseline: float
    queries_spent: int
    seconds: float


# Fixed CSV layout of `run` output; `seconds` is appended only with --timings.
CSV_COLUMNS = [
    "experiment_id",
    "seed",
    "method",
    "target_kind",
    "clone_kind",
    "k",
    "available_fraction",
    "aux_fraction",
    "overlap_ratio",
    "query_fraction",
    "mix_count",
    "ranking_loss",
    "positive_loss",
    "agreement",
    "random_baseline",
    "recall_raw",
    "recall_defended",
    "queries_spent",
    "status",
    "error",
]


class ResultRow(BaseModel):
    """One (seed, method, sweep point) measurement."""
    experiment_id: str
    seed: int
    method: str
    target_kind: str
    clone_kind: str
    k: int
    available_fraction: float
    aux_fraction: float
    overlap_ratio: float
    query_fraction: float
    mix_count: int = 0
    ranking_loss: str = ""
    positive_loss: str = ""
    agreement: Optional[float] = Field(None, ge=0, le=1)
    random_baseline: Optional[float] = None
    recall_raw: Optional[float] = Field(None, ge=0, le=1)
    recall_defended: Optional[float] = Field(None, ge=0, le=1)
    queries_spent: int = 0
    status: str = "ok"
    error: str = ""
    seconds: float = 0.0

    def csv_record(self, timings: bool = False) -> Dict[str, object]:
        columns = CSV_COLUMNS + (["seconds"] if timings else [])
        data = self.model_dump()
        return {name: ("" if data[name] is None else data[name]) for name in columns}
