"""
Experiment Runner

Config-driven pipeline: for every seed and sweep point, split the data,
train the target and auxiliary models, run each attack against a fresh
oracle and measure Agreement and Recall. Seeds run in parallel (capped by
RECSTEAL_THREADS); rows come back in a fixed order regardless.
"""
import os
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..models.config_models import DatasetConfig, ExperimentConfig, ModelKind, TrainConfig
from ..models.result_models import ResultRow
from .attacks import AttackContext, run_attack
from .data_core import (
    DataSplit,
    InteractionDataset,
    build_split,
    filter_min_interactions,
    load_interactions,
    restrict_item_overlap,
    sample_available,
)
from .embed_models import EmbeddingModel
from .errors import ConfigError
from .metrics import mean_agreement, random_agreement_baseline, recall_at_k
from .oracle import QueryOracle
from .query_audit import QueryAuditLogger
from .settings import RuntimeSettings
from .synthetic import generate_synthetic
from .trainer import train_model

logger = logging.getLogger(__name__)


def load_dataset(cfg: DatasetConfig, base_dir: Optional[str] = None) -> InteractionDataset:
    """Read the configured file, or generate synthetic data when no path is set."""
    if cfg.path is None:
        return generate_synthetic(cfg.synthetic)
    path = cfg.path
    if base_dir and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    return load_interactions(path, cfg.format, cfg.delimiter)


def prepare_dataset(cfg: ExperimentConfig, base_dir: Optional[str] = None) -> InteractionDataset:
    return filter_min_interactions(load_dataset(cfg.dataset, base_dir), cfg.min_interactions)


def derive_train_config(train: TrainConfig, seed: int, stream: int) -> TrainConfig:
    """Per-seed copy of a training config with an independent rng_seed."""
    state = np.random.SeedSequence([train.rng_seed, seed, stream]).generate_state(1)[0]
    return train.model_copy(update={"rng_seed": int(state)})


def _sample_query_users(users: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    if fraction >= 1:
        return users
    count = max(1, int(math.ceil(round(fraction * users.size, 9))))
    rng = np.random.default_rng([seed, 5])
    return np.sort(rng.choice(users, size=count, replace=False))


def partition_attack_users(
    available: InteractionDataset, cfg: ExperimentConfig, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split the available users into (query users, evaluation users).

    Evaluation users are never sent to the oracle, so Agreement measures how
    well the clone generalizes rather than how well it memorized returned
    lists. Query users are drawn by query_fraction from the rest. With
    eval_fraction 0, or fewer than two available users, every available user
    is scored and the query pool is the whole set.
    """
    users = available.users
    if cfg.eval_fraction <= 0 or users.size < 2:
        return _sample_query_users(users, cfg.query_fraction, seed), users
    count = min(users.size - 1, max(1, int(math.ceil(round(cfg.eval_fraction * users.size, 9)))))
    rng = np.random.default_rng([seed, 6])
    eval_users = np.sort(rng.choice(users, size=count, replace=False))
    pool = np.setdiff1d(users, eval_users)
    return _sample_query_users(pool, cfg.query_fraction, seed), eval_users


class SeedRun:
    """
    Everything computed for one seed, memoized across sweep points so a
    sweep over K or mix_count does not retrain models.
    """

    def __init__(self, base: ExperimentConfig, dataset: InteractionDataset, seed: int):
        self.base = base
        self.dataset = dataset
        self.seed = seed
        self._splits: Dict[Tuple, DataSplit] = {}
        self._targets: Dict[Tuple, EmbeddingModel] = {}
        self._aux: Dict[Tuple, Tuple[EmbeddingModel, np.ndarray]] = {}
        self._recall: Dict[Tuple, Tuple[float, float]] = {}

    def split(self, cfg: ExperimentConfig) -> Tuple[Tuple, DataSplit]:
        split_seed = cfg.split_seed if cfg.split_seed is not None else self.seed
        key = (split_seed, cfg.available_fraction, cfg.holdout_fraction)
        if key not in self._splits:
            self._splits[key] = build_split(self.dataset, split_seed, cfg.available_fraction, cfg.holdout_fraction)
        return key, self._splits[key]

    def target(self, cfg: ExperimentConfig) -> EmbeddingModel:
        split_key, split = self.split(cfg)
        key = (split_key, cfg.target_kind)
        if key not in self._targets:
            logger.info(f"[seed {self.seed}] training {cfg.target_kind.value} target")
            train_cfg = derive_train_config(cfg.target_train, self.seed, 0)
            self._targets[key] = train_model(cfg.target_kind, split.target_train, train_cfg)
        return self._targets[key]

    def auxiliary(self, cfg: ExperimentConfig, kind: ModelKind) -> Tuple[EmbeddingModel, np.ndarray]:
        split_key, split = self.split(cfg)
        key = (split_key, cfg.aux_fraction, cfg.overlap_ratio, kind)
        if key not in self._aux:
            aux = sample_available(split.auxiliary, cfg.aux_fraction, [self.seed, 3])
            aux = restrict_item_overlap(aux, cfg.overlap_ratio, split.target_train.items_present(), [self.seed, 4])
            logger.info(f"[seed {self.seed}] training {kind.value} auxiliary model on {aux.users.size} users")
            train_cfg = derive_train_config(cfg.aux_train, self.seed, 1)
            self._aux[key] = (train_model(kind, aux, train_cfg), aux.eligibility_mask())
        return self._aux[key]

    def recall(self, cfg: ExperimentConfig) -> Tuple[float, float]:
        split_key, split = self.split(cfg)
        mix = cfg.defense.mix_count if cfg.defense else 0
        key = (split_key, cfg.target_kind, cfg.k, mix)
        if key not in self._recall:
            target = self.target(cfg)
            if split.eval_holdout.num_interactions == 0:
                self._recall[key] = (None, None)
            else:
                raw = recall_at_k(target, split.eval_holdout, cfg.k, split.target_train)
                defended = recall_at_k(target, split.eval_holdout, cfg.k, split.target_train, cfg.defense)
                self._recall[key] = (raw, defended)
        return self._recall[key]

    def rows_for_point(self, point_index: int, cfg: ExperimentConfig) -> List[Tuple[Tuple, ResultRow]]:
        _, split = self.split(cfg)
        target = self.target(cfg)
        recall_raw, recall_defended = self.recall(cfg)
        available = split.available_target
        query_users, eval_users = partition_attack_users(available, cfg, self.seed)
        mean_known = float(np.mean([split.target_train.items_of(u).size for u in eval_users]))
        baseline = random_agreement_baseline(cfg.k, split.target_train.num_items, mean_known)

        rows = []
        clone_train = derive_train_config(cfg.clone_train, self.seed, 2)
        finetune = derive_train_config(cfg.finetune, self.seed, 2)
        contexts: Dict[ModelKind, AttackContext] = {}
        for attack_index, spec in enumerate(cfg.attacks):
            kind = ModelKind(spec.clone_kind or cfg.clone_kind)
            pair = spec.loss_pair() if spec.method.uses_queries else None
            row = dict(
                experiment_id=cfg.experiment_id,
                seed=self.seed,
                method=spec.method.value,
                target_kind=cfg.target_kind.value,
                clone_kind=kind.value,
                k=cfg.k,
                available_fraction=cfg.available_fraction,
                aux_fraction=cfg.aux_fraction,
                overlap_ratio=cfg.overlap_ratio,
                query_fraction=cfg.query_fraction,
                mix_count=cfg.defense.mix_count if cfg.defense else 0,
                ranking_loss=pair.ranking.value if pair else "",
                positive_loss=pair.positive.value if pair else "",
                random_baseline=baseline,
                recall_raw=recall_raw,
                recall_defended=recall_defended,
            )
            try:
                if kind not in contexts:
                    aux_model, mask = self.auxiliary(cfg, kind) if any(
                        a.method.uses_auxiliary and ModelKind(a.clone_kind or cfg.clone_kind) is kind
                        for a in cfg.attacks
                    ) else (None, None)
                    contexts[kind] = AttackContext(
                        available=available,
                        clone_train=clone_train,
                        finetune=finetune,
                        clone_kind=kind,
                        aux_model=aux_model,
                        aux_eligible=mask,
                        query_users=query_users,
                    )
                ctx = contexts[kind]
                ctx.oracle = QueryOracle(
                    target,
                    split.target_train,
                    k=cfg.k,
                    budget=cfg.query_budget,
                    defense=cfg.defense,
                    audit=QueryAuditLogger(context={
                        "experiment_id": cfg.experiment_id,
                        "seed": self.seed,
                        "method": spec.method.value,
                    }),
                )
                result = run_attack(spec, ctx)
                agr = mean_agreement(target, result.model, eval_users, cfg.k, split.target_train)
                row.update(agreement=agr, queries_spent=result.queries_spent, seconds=result.seconds)
                logger.info(
                    f"[seed {self.seed}] {spec.method.value} ({kind.value}) K={cfg.k}: agreement {agr:.4f}"
                )
            except Exception as e:
                logger.error(f"[seed {self.seed}] {spec.method.value} failed: {e}")
                row.update(status="error", error=f"{type(e).__name__}: {e}")
            rows.append(((self.seed, point_index, attack_index), ResultRow(**row)))
        return rows


def _run_seed(cfg: ExperimentConfig, dataset: InteractionDataset, seed: int, points) -> List[Tuple[Tuple, ResultRow]]:
    run = SeedRun(cfg, dataset, seed)
    rows = []
    for point_index, point in enumerate(points):
        point_cfg = cfg.at_point(point)
        try:
            rows.extend(run.rows_for_point(point_index, point_cfg))
        except Exception as e:
            logger.error(f"[seed {seed}] sweep point {point} failed: {e}")
            rows.append(((seed, point_index, -1), ResultRow(
                experiment_id=cfg.experiment_id,
                seed=seed,
                method="*",
                target_kind=point_cfg.target_kind.value,
                clone_kind=point_cfg.clone_kind.value,
                k=point_cfg.k,
                available_fraction=point_cfg.available_fraction,
                aux_fraction=point_cfg.aux_fraction,
                overlap_ratio=point_cfg.overlap_ratio,
                query_fraction=point_cfg.query_fraction,
                mix_count=point_cfg.defense.mix_count if point_cfg.defense else 0,
                status="error",
                error=f"{type(e).__name__}: {e}",
            )))
    return rows


def run_experiment(
    cfg: ExperimentConfig,
    dataset: Optional[InteractionDataset] = None,
    progress: bool = False,
    base_dir: Optional[str] = None,
) -> List[ResultRow]:
    """
    Execute every (seed, sweep point, attack) combination.

    Args:
        dataset: Pre-loaded (already filtered) data; loaded from cfg.dataset when omitted
        progress: Show a progress bar over seeds
        base_dir: Directory relative dataset paths resolve against

    Returns:
        Rows ordered by seed position, sweep point, then attack order
    """
    if dataset is None:
        try:
            dataset = prepare_dataset(cfg, base_dir)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from e
    points = cfg.sweep.points()
    threads = min(RuntimeSettings.threads(), len(cfg.seeds))
    logger.info(
        f"Experiment '{cfg.experiment_id}': {len(cfg.seeds)} seeds x {len(points)} sweep points x "
        f"{len(cfg.attacks)} attacks on {threads} thread(s)"
    )

    results: List[Any] = [None] * len(cfg.seeds)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(_run_seed, cfg, dataset, seed, points): i for i, seed in enumerate(cfg.seeds)}
        for future in tqdm(futures, total=len(futures), desc="seeds", disable=not progress):
            results[futures[future]] = future.result()

    ordered: List[ResultRow] = []
    for seed_rows in results:
        for _, row in sorted(seed_rows, key=lambda item: item[0][1:]):
            ordered.append(row)
    return ordered
