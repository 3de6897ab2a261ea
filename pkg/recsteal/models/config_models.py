"""
Configuration models.

Pydantic models for training, attack, defense and experiment configuration.
Experiment config files (JSON, or YAML) validate against ExperimentConfig.
"""
import itertools
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelKind(str, Enum):
    """Recommender architectures."""
    BPR = "bpr"
    LMF = "lmf"
    GMF = "gmf"

    @property
    def pointwise(self) -> bool:
        return self is not ModelKind.BPR


class PairLoss(str, Enum):
    """Pairwise losses usable inside the stealing loss."""
    BPR = "bpr"
    HINGE = "hinge"


class AttackMethod(str, Enum):
    """Clone-building strategies."""
    PTD = "ptd"
    PTA = "pta"
    PTQ = "ptq"
    PTAQ = "ptaq"
    QSD = "qsd"
    PTA_PRE = "pta_pre"
    PTAQ_PRE = "ptaq_pre"

    @property
    def uses_queries(self) -> bool:
        return self in (AttackMethod.PTQ, AttackMethod.PTAQ, AttackMethod.QSD, AttackMethod.PTAQ_PRE)

    @property
    def uses_auxiliary(self) -> bool:
        return self in (AttackMethod.PTA, AttackMethod.PTAQ, AttackMethod.PTA_PRE, AttackMethod.PTAQ_PRE)


def _lower(value: Any) -> Any:
    return value.lower() if isinstance(value, str) else value


class TrainConfig(BaseModel):
    """Optimization settings for one training phase."""
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.001, ge=0, description="Adam learning rate")
    batch_size: int = Field(2048, ge=1, description="Rows per mini-batch")
    embedding_dim: int = Field(64, ge=1, description="Embedding length d")
    epochs: int = Field(50, ge=0, description="Maximum epochs")
    negatives_per_positive: Optional[int] = Field(
        None, ge=1, description="Sampled negatives per positive; defaults to 1 (BPR) or 4 (LMF/GMF)"
    )
    margin: float = Field(0.5, ge=0, description="Hinge margin m")
    l2_reg: float = Field(0.0, ge=0, description="L2 penalty on trainable parameters")
    tolerance: float = Field(1e-5, ge=0, description="Early stop when the epoch loss changes less than this")
    rng_seed: int = Field(0, description="Seed for initialization and sampling")

    def negatives_for(self, kind: ModelKind) -> int:
        if self.negatives_per_positive is not None:
            return self.negatives_per_positive
        return 4 if ModelKind(kind).pointwise else 1


class DefenseConfig(BaseModel):
    """Popularity-mixing defense applied to oracle responses."""
    model_config = ConfigDict(extra="forbid")

    mix_count: int = Field(..., ge=0, description="Number d of list positions replaced")
    pool_size: int = Field(100, ge=1, description="Size of the most-popular item pool")
    rng_seed: int = Field(0, description="Seed for the per-query replacement draws")

    @model_validator(mode="after")
    def check_pool(self):
        if self.pool_size < self.mix_count:
            raise ValueError(f"pool_size ({self.pool_size}) must be >= mix_count ({self.mix_count})")
        return self


class LossPair(BaseModel):
    """Ranking and positive-item loss choices, e.g. BPR+Hinge."""
    model_config = ConfigDict(extra="forbid")

    ranking: PairLoss = PairLoss.BPR
    positive: PairLoss = PairLoss.HINGE

    @field_validator("ranking", "positive", mode="before")
    @classmethod
    def lower_case(cls, value):
        return _lower(value)

    @property
    def label(self) -> str:
        return f"{self.ranking.value}+{self.positive.value}"


class StealingLossSpec(BaseModel):
    """Full stealing-loss configuration."""
    model_config = ConfigDict(extra="forbid")

    ranking_loss: PairLoss = PairLoss.BPR
    positive_loss: PairLoss = PairLoss.HINGE
    margin: float = Field(0.5, ge=0)
    negatives_per_list_item: int = Field(4, ge=1, description="|n_j|")


class AttackSpec(BaseModel):
    """Attack descriptor as it appears in an experiment config."""
    model_config = ConfigDict(extra="forbid")

    method: AttackMethod
    clone_kind: Optional[ModelKind] = Field(None, description="Overrides the experiment clone_kind")
    stealing_loss: Optional[LossPair] = Field(
        None, description="Defaults to Hinge+Hinge for qsd, BPR+Hinge otherwise"
    )
    margin: float = Field(0.5, ge=0)
    negatives_per_list_item: int = Field(4, ge=1)
    epochs: Optional[int] = Field(None, ge=0, description="Overrides the fine-tune epoch count")
    train_attention: bool = Field(True, description="Train attention (w, b) alongside P and Q_c")

    @field_validator("method", "clone_kind", mode="before")
    @classmethod
    def lower_case(cls, value):
        return _lower(value)

    def loss_pair(self) -> LossPair:
        if self.stealing_loss is not None:
            return self.stealing_loss
        if self.method is AttackMethod.QSD:
            return LossPair(ranking=PairLoss.HINGE, positive=PairLoss.HINGE)
        return LossPair()

    def loss_spec(self) -> StealingLossSpec:
        pair = self.loss_pair()
        return StealingLossSpec(
            ranking_loss=pair.ranking,
            positive_loss=pair.positive,
            margin=self.margin,
            negatives_per_list_item=self.negatives_per_list_item,
        )


class SyntheticConfig(BaseModel):
    """Cluster-structured synthetic dataset used when no path is given."""
    model_config = ConfigDict(extra="forbid")

    num_users: int = Field(500, ge=2)
    num_items: int = Field(800, ge=2)
    num_clusters: int = Field(8, ge=1)
    latent_dim: int = Field(16, ge=1)
    min_user_interactions: int = Field(20, ge=1)
    max_user_interactions: int = Field(60, ge=1)
    popularity_weight: float = Field(1.0, ge=0, description="Weight of the log-popularity prior")
    affinity_scale: float = Field(3.0, gt=0, description="Sharpness of the cluster affinity")
    seed: int = 0

    @model_validator(mode="after")
    def check_range(self):
        if self.max_user_interactions < self.min_user_interactions:
            raise ValueError("max_user_interactions must be >= min_user_interactions")
        if self.max_user_interactions >= self.num_items:
            raise ValueError("max_user_interactions must be < num_items")
        return self


class DatasetConfig(BaseModel):
    """Where the interaction log comes from."""
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = Field(None, description="Interaction file; synthetic data when omitted")
    format: Optional[str] = Field(None, description="csv, tsv or dat; inferred from the extension")
    delimiter: Optional[str] = None
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)


SWEEP_AXES = (
    "k",
    "available_fraction",
    "aux_fraction",
    "overlap_ratio",
    "query_fraction",
    "mix_count",
    "target_kind",
    "clone_kind",
    "loss_combo",
)


class SweepConfig(BaseModel):
    """Axes swept as a cartesian product; unset axes keep the base value."""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    k: Optional[List[int]] = None
    available_fraction: Optional[List[float]] = None
    aux_fraction: Optional[List[float]] = None
    overlap_ratio: Optional[List[float]] = None
    query_fraction: Optional[List[float]] = None
    mix_count: Optional[List[int]] = None
    target_kind: Optional[List[ModelKind]] = None
    clone_kind: Optional[List[ModelKind]] = None
    loss_combo: Optional[List[LossPair]] = None

    @model_validator(mode="after")
    def check_axes(self):
        given = [name for name in SWEEP_AXES if getattr(self, name) is not None]
        for name in given:
            if not getattr(self, name):
                raise ValueError(f"Sweep axis '{name}' is empty")
        if self.enabled and not given:
            raise ValueError("Sweep is enabled but no axis is given")
        return self

    def points(self) -> List[Dict[str, Any]]:
        """Every combination of the given axes, in declaration order."""
        if not self.enabled:
            return [{}]
        names = [name for name in SWEEP_AXES if getattr(self, name) is not None]
        return [
            dict(zip(names, combo))
            for combo in itertools.product(*(getattr(self, name) for name in names))
        ]


def _default_attacks() -> List[AttackSpec]:
    return [
        AttackSpec(method=method)
        for method in (AttackMethod.QSD, AttackMethod.PTD, AttackMethod.PTQ, AttackMethod.PTA, AttackMethod.PTAQ)
    ]


class ExperimentConfig(BaseModel):
    """Everything one `run` needs."""
    model_config = ConfigDict(extra="forbid")

    experiment_id: str = "experiment"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    min_interactions: int = Field(5, ge=1)
    split_seed: Optional[int] = Field(None, description="Fixed split seed; each run seed is used when omitted")
    available_fraction: float = Field(0.1, gt=0, le=1)
    holdout_fraction: float = Field(0.2, ge=0, lt=1)
    aux_fraction: float = Field(1.0, gt=0, le=1)
    overlap_ratio: float = Field(1.0, gt=0, le=1)
    query_fraction: float = Field(1.0, gt=0, le=1)
    eval_fraction: float = Field(
        0.5, ge=0, lt=1,
        description="Share of available users never queried and used to score Agreement; 0 scores every available user",
    )
    query_budget: Optional[int] = Field(None, ge=0, description="Distinct-user query budget; unlimited when omitted")
    target_kind: ModelKind = ModelKind.BPR
    clone_kind: ModelKind = ModelKind.BPR
    k: int = Field(50, ge=1, description="Recommendation list length K")
    attacks: List[AttackSpec] = Field(default_factory=_default_attacks)
    target_train: TrainConfig = Field(default_factory=TrainConfig)
    aux_train: TrainConfig = Field(default_factory=TrainConfig)
    clone_train: TrainConfig = Field(default_factory=TrainConfig)
    finetune: TrainConfig = Field(default_factory=TrainConfig)
    defense: Optional[DefenseConfig] = None
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])

    @field_validator("target_kind", "clone_kind", mode="before")
    @classmethod
    def lower_case(cls, value):
        return _lower(value)

    @field_validator("attacks", "seeds")
    @classmethod
    def non_empty(cls, value):
        if not value:
            raise ValueError("must not be empty")
        return value

    @model_validator(mode="after")
    def check_consistency(self):
        if self.defense is not None and self.defense.mix_count > self.k:
            raise ValueError(f"defense.mix_count ({self.defense.mix_count}) must be <= k ({self.k})")
        dims = {self.aux_train.embedding_dim, self.clone_train.embedding_dim, self.finetune.embedding_dim}
        if len(dims) > 1:
            raise ValueError("aux_train, clone_train and finetune must share one embedding_dim")
        return self

    def at_point(self, point: Dict[str, Any]) -> "ExperimentConfig":
        """This config with one sweep point's values substituted."""
        update: Dict[str, Any] = {}
        for name, value in point.items():
            if name == "mix_count":
                base = self.defense or DefenseConfig(mix_count=0)
                update["defense"] = base.model_copy(update={"mix_count": value})
            elif name == "loss_combo":
                update["attacks"] = [
                    attack.model_copy(update={"stealing_loss": value}) if attack.method.uses_queries else attack
                    for attack in self.attacks
                ]
            else:
                update[name] = value
        update["sweep"] = SweepConfig()
        return ExperimentConfig.model_validate(self.model_copy(update=update).model_dump())
