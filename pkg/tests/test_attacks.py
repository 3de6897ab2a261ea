"""
Tests for the attack engine
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from recsteal.models.config_models import AttackSpec, StealingLossSpec, TrainConfig  # noqa: E402
from recsteal.services.attacks import (  # noqa: E402
    AttackContext,
    finetune_with_queries,
    run_attack,
    train_pta,
    train_pta_pretrain,
    train_ptd,
    train_qsd_adapted,
)
from recsteal.services.data_core import build_split  # noqa: E402
from recsteal.services.embed_models import EmbeddingModel  # noqa: E402
from recsteal.services.errors import AttackAbortedError, ConfigError, ModelError  # noqa: E402
from recsteal.services.fusion import FusedCloneModel  # noqa: E402
from recsteal.services.metrics import mean_agreement, random_agreement_baseline  # noqa: E402
from recsteal.services.oracle import QueryOracle  # noqa: E402
from recsteal.services.trainer import train_model  # noqa: E402

K = 10
CLONE = TrainConfig(learning_rate=0.02, batch_size=128, embedding_dim=8, epochs=4, rng_seed=11)
FINETUNE = TrainConfig(learning_rate=0.02, batch_size=256, embedding_dim=8, epochs=3, rng_seed=12)


@pytest.fixture(scope="module")
def scenario(small_synthetic):
    split = build_split(small_synthetic, 0, available_fraction=0.5)
    target = train_model("bpr", split.target_train, TrainConfig(learning_rate=0.02, batch_size=128,
                                                                  embedding_dim=8, epochs=10, rng_seed=1))
    aux = train_model("bpr", split.auxiliary, TrainConfig(learning_rate=0.02, batch_size=128,
                                                           embedding_dim=8, epochs=5, rng_seed=2))
    return split, target, aux


def _oracle(split, target, **kwargs):
    return QueryOracle(target, split.target_train, k=K, **kwargs)


def _context(split, target, aux, mask=None, **kwargs):
    return AttackContext(
        available=split.available_target,
        clone_train=CLONE,
        finetune=FINETUNE,
        aux_model=aux,
        aux_eligible=mask,
        oracle=_oracle(split, target),
        **kwargs,
    )


def test_pta_without_overlap_equals_ptd(scenario):
    """An all-false eligibility mask makes the fused clone train exactly like PTD."""
    split, _, aux = scenario
    mask = np.zeros(split.available_target.num_items, dtype=bool)
    ptd = train_ptd(split.available_target, CLONE, "bpr")
    pta = train_pta(split.available_target, aux.Q, mask, CLONE, "bpr")
    assert np.array_equal(pta.P, ptd.P)
    assert np.array_equal(pta.Q_c, ptd.Q)


def test_ptaq_without_overlap_equals_ptq(scenario):
    split, target, aux = scenario
    mask = np.zeros(split.available_target.num_items, dtype=bool)
    ptq = run_attack(AttackSpec(method="ptq"), _context(split, target, aux, mask))
    ptaq = run_attack(AttackSpec(method="ptaq"), _context(split, target, aux, mask))
    assert np.array_equal(ptaq.model.P, ptq.model.P)
    assert np.array_equal(ptaq.model.Q_c, ptq.model.Q)
    assert ptaq.queries_spent == ptq.queries_spent == split.available_target.users.size


def test_auxiliary_embeddings_stay_frozen(scenario):
    split, target, aux = scenario
    result = run_attack(AttackSpec(method="ptaq"), _context(split, target, aux))
    assert isinstance(result.model, FusedCloneModel)
    assert np.array_equal(result.model.Q_a, aux.Q)
    assert result.model.attention.w.any()


def test_frozen_attention_option(scenario):
    split, _, aux = scenario
    pta = train_pta(split.available_target, aux.Q, None, CLONE, "bpr", train_attention=False)
    assert not pta.attention.w.any() and pta.attention.b == 0.0


def test_zero_learning_rate_finetune_is_identity(scenario):
    split, target, _ = scenario
    clone = train_ptd(split.available_target, CLONE, "bpr")
    still = FINETUNE.model_copy(update={"learning_rate": 0.0})
    tuned = finetune_with_queries(clone, _oracle(split, target), split.available_target.users[:5],
                                  StealingLossSpec(), still)
    assert np.array_equal(tuned.P, clone.P) and np.array_equal(tuned.Q, clone.Q)


def test_pretrain_initializes_from_auxiliary(scenario):
    split, _, aux = scenario
    still = CLONE.model_copy(update={"learning_rate": 0.0})
    clone = train_pta_pretrain(split.available_target, aux.Q, still, "bpr")
    assert isinstance(clone, EmbeddingModel)
    assert np.array_equal(clone.Q, aux.Q)


def test_budget_abort_reports_progress(scenario):
    split, target, _ = scenario
    clone = train_ptd(split.available_target, CLONE, "bpr")
    oracle = _oracle(split, target, budget=3)
    users = split.available_target.users[:6]
    with pytest.raises(AttackAbortedError) as excinfo:
        finetune_with_queries(clone, oracle, users, StealingLossSpec(), FINETUNE)
    assert excinfo.value.progress == {"queried": 3, "requested": 6, "spent": 3, "budget": 3}


def test_qsd_learns_from_lists_alone(scenario):
    """A random-init clone trained on target lists agrees far above chance on the queried users."""
    split, target, _ = scenario
    users = split.available_target.users
    cfg = TrainConfig(learning_rate=0.05, batch_size=256, embedding_dim=8, epochs=80, rng_seed=3)
    clone = train_qsd_adapted(_oracle(split, target), users, StealingLossSpec(), cfg, "bpr")
    mean_known = np.mean([split.target_train.items_of(u).size for u in users])
    baseline = random_agreement_baseline(K, split.target_train.num_items, mean_known)
    assert mean_agreement(target, clone, users, K, split.target_train) > 2 * baseline


def test_query_users_subset(scenario):
    split, target, aux = scenario
    chosen = split.available_target.users[:4]
    result = run_attack(AttackSpec(method="ptq", epochs=1), _context(split, target, aux, query_users=chosen))
    assert result.queries_spent == 4


def test_pretrained_clone_is_shared(scenario):
    """PTD and PTQ in one context reuse one interaction-trained clone."""
    split, target, aux = scenario
    ctx = _context(split, target, aux)
    ptd = run_attack(AttackSpec(method="ptd"), ctx)
    run_attack(AttackSpec(method="ptq", epochs=0), ctx)
    assert len(ctx.cache) == 1
    assert ptd.queries_spent == 0


def test_missing_requirements(scenario):
    split, target, aux = scenario
    with pytest.raises(ConfigError):
        run_attack(AttackSpec(method="pta"), _context(split, target, None))
    no_oracle = _context(split, target, aux)
    no_oracle.oracle = None
    with pytest.raises(ConfigError):
        run_attack(AttackSpec(method="ptq"), no_oracle)


def test_auxiliary_dimension_must_match(scenario):
    split, _, aux = scenario
    with pytest.raises(ModelError):
        train_pta(split.available_target, aux.Q[:, :4], None, CLONE, "bpr")


def test_ptaq_pre_finetunes_the_pre_clone(scenario):
    """PTAQ(Pre) reuses the PTA(Pre) clone and spends one query per chosen user."""
    split, target, aux = scenario
    chosen = split.available_target.users[:4]
    ctx = _context(split, target, aux, query_users=chosen)
    pre = run_attack(AttackSpec(method="pta_pre"), ctx)
    tuned = run_attack(AttackSpec(method="ptaq_pre", epochs=1), ctx)
    assert len(ctx.cache) == 1
    assert pre.queries_spent == 0 and tuned.queries_spent == 4
    assert isinstance(tuned.model, EmbeddingModel)
    assert tuned.model.Q.shape == pre.model.Q.shape
