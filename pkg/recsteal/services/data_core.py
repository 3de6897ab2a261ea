"""
Interaction Data Service

Loads implicit-feedback logs (user,item[,rating,timestamp] rows), filters
them, and produces the target / auxiliary / available splits the attacks
work from. All datasets share one global user index space and one global
item index space; a subset simply carries fewer users.
"""
import csv
import math
import os
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.result_models import DatasetSummary
from .errors import DataError

logger = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int]]

FORMAT_DELIMITERS = {"csv": ",", "tsv": "\t", "dat": "::"}
EXTENSION_FORMATS = {".csv": "csv", ".tsv": "tsv", ".txt": "tsv", ".data": "tsv", ".dat": "dat"}
HEADER_TOKENS = {"user", "user_id", "userid", "uid", "user id", "customer_id", "customer"}


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _ratio_count(fraction: float, total: int) -> int:
    """ceil(fraction * total) without float noise pushing exact products up."""
    return int(math.ceil(round(fraction * total, 9)))


@dataclass(frozen=True)
class NegativeSample:
    """Items sampled as negatives for one user."""
    user: int
    items: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """
    Implicit-feedback log over a global user/item index space.

    Attributes:
        num_users: size of the user index space
        num_items: size of the item index space
        interactions: user index -> sorted, duplicate-free item indices
        user_ids: raw user ID for each user index
        item_ids: raw item ID for each item index
        item_eligibility: optional mask of items whose auxiliary
            embeddings may be used (set by restrict_item_overlap)
    """
    num_users: int
    num_items: int
    interactions: Mapping[int, np.ndarray]
    user_ids: Tuple[str, ...]
    item_ids: Tuple[str, ...]
    item_eligibility: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.user_ids) != self.num_users or len(self.item_ids) != self.num_items:
            raise DataError("ID maps do not match the index space sizes")
        frozen: Dict[int, np.ndarray] = {}
        for user in sorted(self.interactions):
            raw = self.interactions[user]
            if isinstance(raw, np.ndarray):
                items = raw.astype(np.int64, copy=False)
            else:
                items = np.fromiter((int(i) for i in raw), dtype=np.int64)
            if not 0 <= user < self.num_users:
                raise DataError(f"User index {user} outside [0, {self.num_users})")
            if items.size == 0:
                continue
            items = np.unique(items)
            if items[0] < 0 or items[-1] >= self.num_items:
                raise DataError(f"User {user} has an item index outside [0, {self.num_items})")
            frozen[int(user)] = _freeze(items)
        object.__setattr__(self, "interactions", MappingProxyType(frozen))
        if self.item_eligibility is not None:
            mask = np.asarray(self.item_eligibility, dtype=bool).copy()
            if mask.shape != (self.num_items,):
                raise DataError("Item eligibility mask must cover the item index space")
            object.__setattr__(self, "item_eligibility", _freeze(mask))

    @cached_property
    def users(self) -> np.ndarray:
        return _freeze(np.fromiter(self.interactions.keys(), dtype=np.int64))

    @cached_property
    def num_interactions(self) -> int:
        return int(sum(items.size for items in self.interactions.values()))

    @cached_property
    def user_index(self) -> Dict[str, int]:
        return {raw: idx for idx, raw in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> Dict[str, int]:
        return {raw: idx for idx, raw in enumerate(self.item_ids)}

    def items_of(self, user: int) -> np.ndarray:
        items = self.interactions.get(int(user))
        if items is None:
            return _freeze(np.empty(0, dtype=np.int64))
        return items

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """All (user, item) pairs as two aligned arrays, ordered by user then item."""
        return self._pairs

    @cached_property
    def _pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self.interactions:
            empty = _freeze(np.empty(0, dtype=np.int64))
            return empty, empty
        users = np.concatenate([
            np.full(items.size, user, dtype=np.int64) for user, items in self.interactions.items()
        ])
        items = np.concatenate(list(self.interactions.values()))
        return _freeze(users), _freeze(items)

    @cached_property
    def interaction_mask(self) -> np.ndarray:
        """Dense num_users x num_items boolean matrix of interactions."""
        mask = np.zeros((self.num_users, self.num_items), dtype=bool)
        users, items = self.pairs()
        mask[users, items] = True
        return _freeze(mask)

    def item_counts(self) -> np.ndarray:
        _, items = self.pairs()
        return np.bincount(items, minlength=self.num_items)

    def items_present(self) -> np.ndarray:
        _, items = self.pairs()
        return np.unique(items)

    def eligibility_mask(self) -> np.ndarray:
        if self.item_eligibility is None:
            return np.ones(self.num_items, dtype=bool)
        return self.item_eligibility

    def derive(self, interactions: Mapping[int, Iterable[int]]) -> "InteractionDataset":
        """New dataset over the same index spaces and ID maps."""
        return replace(self, interactions=dict(interactions))

    def restrict_users(self, users: Iterable[int]) -> "InteractionDataset":
        keep = {int(u) for u in users}
        return self.derive({u: items for u, items in self.interactions.items() if u in keep})


@dataclass(frozen=True)
class DataSplit:
    """
    The knowledge tiers of one experiment run.

    target is the full target dataset; target_train is what the target
    model is fit on (target minus eval_holdout); available_target is the
    attacker's fraction of target_train.
    """
    target: InteractionDataset
    target_train: InteractionDataset
    auxiliary: InteractionDataset
    available_target: InteractionDataset
    eval_holdout: InteractionDataset


def _group_pairs(users: np.ndarray, items: np.ndarray) -> Dict[int, np.ndarray]:
    if users.size == 0:
        return {}
    order = np.lexsort((items, users))
    users, items = users[order], items[order]
    cuts = np.flatnonzero(np.diff(users)) + 1
    return {
        int(chunk_users[0]): chunk_items
        for chunk_users, chunk_items in zip(np.split(users, cuts), np.split(items, cuts))
    }


def _infer_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    return EXTENSION_FORMATS.get(ext, "csv")


def _iter_rows(path: str, delimiter: str) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line_number, cells) for every non-blank row."""
    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        if len(delimiter) > 1:
            for line_number, line in enumerate(f, start=1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                yield line_number, line.split(delimiter)
        else:
            reader = csv.reader(f, delimiter=delimiter)
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                yield reader.line_num, row


def load_interactions(
    path: str,
    fmt: Optional[str] = None,
    delimiter: Optional[str] = None,
) -> InteractionDataset:
    """
    Load a user,item[,rating,timestamp] log into a densely indexed dataset.

    Indices follow first appearance. Duplicate (user, item) rows collapse
    into one interaction; extra columns are ignored.

    Args:
        path: File to read
        fmt: "csv", "tsv" or "dat"; inferred from the extension when omitted
        delimiter: Explicit delimiter overriding the format's default

    Raises:
        FileNotFoundError: path does not exist
        DataError: malformed row (with line number) or no interactions
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Interaction file not found: {path}")
    fmt = (fmt or _infer_format(path)).lower()
    if delimiter is None:
        if fmt not in FORMAT_DELIMITERS:
            raise DataError(f"Unknown format '{fmt}' (expected one of {sorted(FORMAT_DELIMITERS)})")
        delimiter = FORMAT_DELIMITERS[fmt]

    user_index: Dict[str, int] = {}
    item_index: Dict[str, int] = {}
    seen = set()
    first = True
    for line_number, row in _iter_rows(path, delimiter):
        cells = [cell.strip() for cell in row]
        if first:
            first = False
            if cells and cells[0].lower() in HEADER_TOKENS:
                continue
        if len(cells) < 2 or not cells[0] or not cells[1]:
            raise DataError("Malformed row: expected user_id and item_id columns", line_number)
        user = user_index.setdefault(cells[0], len(user_index))
        item = item_index.setdefault(cells[1], len(item_index))
        seen.add((user, item))

    if not seen:
        raise DataError(f"no interactions in {path}")

    pairs = np.array(sorted(seen), dtype=np.int64)
    ds = InteractionDataset(
        num_users=len(user_index),
        num_items=len(item_index),
        interactions=_group_pairs(pairs[:, 0], pairs[:, 1]),
        user_ids=tuple(user_index),
        item_ids=tuple(item_index),
    )
    logger.info(
        f"Loaded {ds.num_interactions} interactions "
        f"({ds.num_users} users, {ds.num_items} items) from {path}"
    )
    return ds


def write_interactions(ds: InteractionDataset, path: str) -> None:
    """Write the dataset as a raw-ID user_id,item_id CSV."""
    users, items = ds.pairs()
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["user_id", "item_id"])
        for user, item in zip(users, items):
            writer.writerow([ds.user_ids[user], ds.item_ids[item]])


def filter_min_interactions(ds: InteractionDataset, k: int) -> InteractionDataset:
    """
    Drop users and items with fewer than k interactions, repeating until
    no more drop out, then re-densify both index spaces.
    """
    if k < 1:
        raise DataError(f"min_interactions must be >= 1 (got {k})")
    users, items = ds.pairs()
    keep = np.ones(users.size, dtype=bool)
    rounds = 0
    while True:
        rounds += 1
        user_counts = np.bincount(users[keep], minlength=ds.num_users)
        item_counts = np.bincount(items[keep], minlength=ds.num_items)
        next_keep = keep & (user_counts[users] >= k) & (item_counts[items] >= k)
        if next_keep.sum() == keep.sum():
            break
        keep = next_keep

    if not keep.any():
        raise DataError(f"Filtering with min_interactions={k} left no interactions")

    kept_users, user_codes = np.unique(users[keep], return_inverse=True)
    kept_items, item_codes = np.unique(items[keep], return_inverse=True)
    filtered = InteractionDataset(
        num_users=kept_users.size,
        num_items=kept_items.size,
        interactions=_group_pairs(user_codes.astype(np.int64), item_codes.astype(np.int64)),
        user_ids=tuple(ds.user_ids[u] for u in kept_users),
        item_ids=tuple(ds.item_ids[i] for i in kept_items),
    )
    logger.info(
        f"min_interactions={k}: {ds.num_interactions} -> {filtered.num_interactions} "
        f"interactions after {rounds} rounds"
    )
    return filtered


def split_target_auxiliary(
    ds: InteractionDataset, rng_seed: SeedLike
) -> Tuple[InteractionDataset, InteractionDataset]:
    """Partition users uniformly at random into target and auxiliary halves."""
    users = ds.users
    if users.size == 0:
        raise DataError("Cannot split an empty dataset")
    rng = np.random.default_rng(rng_seed)
    shuffled = rng.permutation(users)
    n_target = (users.size + 1) // 2
    return ds.restrict_users(shuffled[:n_target]), ds.restrict_users(shuffled[n_target:])


def sample_available(
    target: InteractionDataset, fraction: float, rng_seed: SeedLike
) -> InteractionDataset:
    """Keep ceil(fraction * |users|) uniformly chosen users with their full histories."""
    if not 0 < fraction <= 1:
        raise DataError(f"fraction must be in (0, 1] (got {fraction})")
    users = target.users
    if fraction == 1:
        return target
    count = _ratio_count(fraction, users.size)
    rng = np.random.default_rng(rng_seed)
    chosen = rng.choice(users, size=count, replace=False)
    return target.restrict_users(chosen)


def restrict_item_overlap(
    aux: InteractionDataset,
    ratio: float,
    target_items: Iterable[int],
    rng_seed: SeedLike,
) -> InteractionDataset:
    """
    Mark ceil(ratio * |target_items|) uniformly chosen target items as
    overlap-eligible; only those items may use auxiliary embeddings.
    """
    if not 0 < ratio <= 1:
        raise DataError(f"overlap ratio must be in (0, 1] (got {ratio})")
    items = np.unique(np.fromiter((int(i) for i in target_items), dtype=np.int64))
    if items.size == 0:
        raise DataError("No target items to overlap with")
    count = _ratio_count(ratio, items.size)
    rng = np.random.default_rng(rng_seed)
    chosen = rng.choice(items, size=count, replace=False)
    mask = np.zeros(aux.num_items, dtype=bool)
    mask[chosen] = True
    return replace(aux, item_eligibility=mask)


def holdout_split(
    target: InteractionDataset, fraction: float, rng_seed: SeedLike
) -> Tuple[InteractionDataset, InteractionDataset]:
    """
    Hold out floor(fraction * |I_u|) items per user (at least one when the
    user has two or more, never all of them).

    Returns:
        (train, holdout); users with nothing held out are absent from holdout
    """
    if not 0 <= fraction < 1:
        raise DataError(f"holdout fraction must be in [0, 1) (got {fraction})")
    rng = np.random.default_rng(rng_seed)
    train: Dict[int, np.ndarray] = {}
    held: Dict[int, np.ndarray] = {}
    for user in target.users:
        items = target.items_of(user)
        n_hold = int(math.floor(fraction * items.size + 1e-9))
        if fraction > 0 and n_hold == 0 and items.size >= 2:
            n_hold = 1
        n_hold = min(n_hold, items.size - 1)
        if n_hold <= 0:
            train[int(user)] = items
            continue
        order = rng.permutation(items.size)
        held[int(user)] = items[order[:n_hold]]
        train[int(user)] = items[order[n_hold:]]
    return target.derive(train), target.derive(held)


def build_split(
    ds: InteractionDataset,
    rng_seed: int,
    available_fraction: float = 0.1,
    holdout_fraction: float = 0.2,
) -> DataSplit:
    """Target/auxiliary split, Recall holdout and attacker sample for one run."""
    target, auxiliary = split_target_auxiliary(ds, [rng_seed, 0])
    target_train, holdout = holdout_split(target, holdout_fraction, [rng_seed, 1])
    available = sample_available(target_train, available_fraction, [rng_seed, 2])
    return DataSplit(
        target=target,
        target_train=target_train,
        auxiliary=auxiliary,
        available_target=available,
        eval_holdout=holdout,
    )


def sample_negatives(
    ds: InteractionDataset,
    user: int,
    n: int,
    extra_exclusions: Optional[Iterable[int]],
    rng: np.random.Generator,
) -> NegativeSample:
    """n distinct items drawn uniformly outside I_user and the extra exclusions."""
    if n < 0:
        raise DataError(f"Negative count must be >= 0 (got {n})")
    excluded = np.zeros(ds.num_items, dtype=bool)
    excluded[ds.items_of(user)] = True
    if extra_exclusions is not None:
        extra = np.fromiter((int(i) for i in extra_exclusions), dtype=np.int64)
        excluded[extra] = True
    candidates = np.flatnonzero(~excluded)
    if candidates.size < n:
        raise DataError(
            f"Insufficient candidate items for user {user}: need {n}, have {candidates.size}"
        )
    if n == 0:
        return NegativeSample(user=int(user), items=())
    chosen = rng.choice(candidates, size=n, replace=False)
    return NegativeSample(user=int(user), items=tuple(int(i) for i in chosen))


def sample_negative_block(
    candidates: np.ndarray, rows: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """
    A (rows, n) block of candidates, items distinct within each row and
    uniform over distinct n-subsets.
    """
    if candidates.size < n:
        raise DataError(f"Insufficient candidate items: need {n}, have {candidates.size}")
    block = rng.integers(0, candidates.size, size=(rows, n))
    if n > 1:
        while True:
            ordered = np.sort(block, axis=1)
            duplicated = np.any(ordered[:, 1:] == ordered[:, :-1], axis=1)
            if not duplicated.any():
                break
            block[duplicated] = rng.integers(0, candidates.size, size=(int(duplicated.sum()), n))
    return candidates[block]


def sample_training_negatives(
    mask: np.ndarray, users: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """
    For each user in `users`, n items the user has not interacted with
    (rejection sampling against the interaction mask).
    """
    num_items = mask.shape[1]
    if users.size and mask[np.unique(users)].all(axis=1).any():
        raise DataError("A user has interacted with every item; no negatives exist")
    draws = rng.integers(0, num_items, size=(users.size, n))
    rejected = mask[users[:, None], draws]
    while rejected.any():
        draws[rejected] = rng.integers(0, num_items, size=int(rejected.sum()))
        rejected = mask[users[:, None], draws]
    return draws


def summarize(ds: InteractionDataset) -> DatasetSummary:
    """Headline statistics of a dataset."""
    per_user = np.array([items.size for items in ds.interactions.values()], dtype=np.int64)
    cells = ds.num_users * ds.num_items
    return DatasetSummary(
        num_users=ds.num_users,
        num_items=ds.num_items,
        active_users=int(per_user.size),
        num_interactions=ds.num_interactions,
        sparsity=1.0 - (ds.num_interactions / cells) if cells else 1.0,
        min_user_interactions=int(per_user.min()) if per_user.size else 0,
        mean_user_interactions=float(per_user.mean()) if per_user.size else 0.0,
        max_user_interactions=int(per_user.max()) if per_user.size else 0,
    )
