"""Triple data ingestion, index structures, and reproducible splits.

The unit of interaction is a (user, item) record carrying the set of
explanations observed for that pair.  All downstream code works on dense
contiguous indices; the mapping back to raw string IDs is kept on the
store so files can be written and re-read losslessly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed input files or impossible split requests."""


@dataclass(frozen=True)
class TripleRecord:
    """One (user, item) pair with its non-empty set of explanations."""

    user: int
    item: int
    explanations: frozenset[int]

    def __post_init__(self):
        if not self.explanations:
            raise DataError(f"record ({self.user},{self.item}) has no explanations")


@dataclass(frozen=True)
class SplitSpec:
    """Parameters of the train/validation/test partition."""

    train_fraction: float = 0.7
    validation_fraction: float = 0.1
    repetitions: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


class InteractionStore:
    """Immutable indexed view over user-item-explanation records.

    Derived sets (items per user, explanations per user/item/pair, users
    per item/explanation) are built once at construction and are exact
    projections of ``records``.  Entity counts define the dense index
    universe and may exceed what the records touch (e.g. in a test
    split, which shares its parent's universe).
    """

    def __init__(
        self,
        records: Sequence[TripleRecord],
        n_users: int,
        n_items: int,
        n_explanations: int,
        user_ids: Sequence[str] | None = None,
        item_ids: Sequence[str] | None = None,
        expl_ids: Sequence[str] | None = None,
    ):
        records = tuple(records)
        seen_pairs = set()
        for rec in records:
            if not (0 <= rec.user < n_users):
                raise DataError(f"user index {rec.user} out of range [0,{n_users})")
            if not (0 <= rec.item < n_items):
                raise DataError(f"item index {rec.item} out of range [0,{n_items})")
            for e in rec.explanations:
                if not (0 <= e < n_explanations):
                    raise DataError(
                        f"explanation index {e} out of range [0,{n_explanations})"
                    )
            key = (rec.user, rec.item)
            if key in seen_pairs:
                raise DataError(f"duplicate record for pair {key}")
            seen_pairs.add(key)

        self.records = records
        self.n_users = n_users
        self.n_items = n_items
        self.n_explanations = n_explanations
        self.user_ids = tuple(user_ids) if user_ids is not None else tuple(
            str(u) for u in range(n_users)
        )
        self.item_ids = tuple(item_ids) if item_ids is not None else tuple(
            str(i) for i in range(n_items)
        )
        self.expl_ids = tuple(expl_ids) if expl_ids is not None else tuple(
            str(e) for e in range(n_explanations)
        )

        items_of_user = [set() for _ in range(n_users)]
        expls_of_user = [set() for _ in range(n_users)]
        expls_of_item = [set() for _ in range(n_items)]
        users_of_item = [set() for _ in range(n_items)]
        users_of_expl = [set() for _ in range(n_explanations)]
        pair_expls: dict[tuple[int, int], frozenset[int]] = {}
        tu, ti, te = [], [], []
        for rec in records:
            items_of_user[rec.user].add(rec.item)
            users_of_item[rec.item].add(rec.user)
            pair_expls[(rec.user, rec.item)] = rec.explanations
            for e in sorted(rec.explanations):
                expls_of_user[rec.user].add(e)
                expls_of_item[rec.item].add(e)
                users_of_expl[e].add(rec.user)
                tu.append(rec.user)
                ti.append(rec.item)
                te.append(e)

        self.items_of_user = tuple(frozenset(s) for s in items_of_user)
        self.expls_of_user = tuple(frozenset(s) for s in expls_of_user)
        self.expls_of_item = tuple(frozenset(s) for s in expls_of_item)
        self.users_of_item = tuple(frozenset(s) for s in users_of_item)
        self.users_of_expl = tuple(frozenset(s) for s in users_of_expl)
        self.pair_expls = pair_expls
        # Flat triple arrays, in record order, explanations ascending
        # within each record; used for uniform triple sampling.
        self.triple_users = np.asarray(tu, dtype=np.int64)
        self.triple_items = np.asarray(ti, dtype=np.int64)
        self.triple_expls = np.asarray(te, dtype=np.int64)

    @property
    def triple_count(self) -> int:
        return int(self.triple_users.shape[0])

    @property
    def record_count(self) -> int:
        return len(self.records)

    @classmethod
    def from_triples(
        cls, triples: Iterable[tuple[int, int, int]], n_users=None, n_items=None,
        n_explanations=None, **kwargs,
    ) -> "InteractionStore":
        """Build a store from raw (user, item, explanation) index triples.

        Triples for the same (user, item) pair are merged into one record,
        in first-seen pair order.  Counts default to max index + 1.
        """
        pairs: dict[tuple[int, int], set[int]] = {}
        for u, i, e in triples:
            pairs.setdefault((u, i), set()).add(e)
        if not pairs:
            raise DataError("empty dataset")
        records = [
            TripleRecord(u, i, frozenset(es)) for (u, i), es in pairs.items()
        ]
        if n_users is None:
            n_users = max(r.user for r in records) + 1
        if n_items is None:
            n_items = max(r.item for r in records) + 1
        if n_explanations is None:
            n_explanations = max(max(r.explanations) for r in records) + 1
        return cls(records, n_users, n_items, n_explanations, **kwargs)

    def subset(self, records: Sequence[TripleRecord]) -> "InteractionStore":
        """New store over the same entity universe with a subset of records."""
        return InteractionStore(
            records, self.n_users, self.n_items, self.n_explanations,
            self.user_ids, self.item_ids, self.expl_ids,
        )

    def entities_present(self) -> tuple[set[int], set[int], set[int]]:
        """Users, items and explanations that occur in at least one record."""
        users = {r.user for r in self.records}
        items = {r.item for r in self.records}
        expls = set()
        for r in self.records:
            expls |= r.explanations
        return users, items, expls


def load_triples(
    path,
    id_mode: str = "raw",
    id_maps: tuple[Sequence[str], Sequence[str], Sequence[str]] | None = None,
) -> InteractionStore:
    """Read a tab-separated ``user<TAB>item<TAB>explanation`` file.

    id_mode "raw" treats fields as opaque strings and assigns dense
    indices in first-seen order; "dense" parses fields as integer
    indices.  When ``id_maps`` (user, item, explanation raw-ID lists) is
    given, indices are resolved against those maps and the maps define
    the entity universe, so subset files (e.g. a test split) keep the
    full universe.  Exact duplicate triples are dropped with a warning.
    """
    path = Path(path)
    if id_mode not in ("raw", "dense"):
        raise ValueError(f"unknown id_mode {id_mode!r}")

    lookups = None
    if id_maps is not None:
        lookups = tuple({rid: idx for idx, rid in enumerate(m)} for m in id_maps)

    users: dict[str, int] = {}
    items: dict[str, int] = {}
    expls: dict[str, int] = {}

    def intern(table: dict[str, int], raw: str) -> int:
        idx = table.get(raw)
        if idx is None:
            idx = len(table)
            table[raw] = idx
        return idx

    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    duplicates = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            ur, ir, er = parts
            if lookups is not None:
                try:
                    t = (lookups[0][ur], lookups[1][ir], lookups[2][er])
                except KeyError as exc:
                    raise DataError(f"{path}:{lineno}: ID {exc} not in id map") from exc
            elif id_mode == "dense":
                try:
                    t = (int(ur), int(ir), int(er))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: non-integer dense ID") from exc
                if min(t) < 0:
                    raise DataError(f"{path}:{lineno}: negative index")
            else:
                t = (intern(users, ur), intern(items, ir), intern(expls, er))
            if t in seen:
                duplicates += 1
                continue
            seen.add(t)
            triples.append(t)

    if not triples:
        raise DataError("empty dataset")
    if duplicates:
        warnings.warn(f"{path}: dropped {duplicates} duplicate triple line(s)")

    if id_maps is not None:
        n_u, n_i, n_e = (len(m) for m in id_maps)
        return InteractionStore.from_triples(
            triples, n_u, n_i, n_e,
            user_ids=id_maps[0], item_ids=id_maps[1], expl_ids=id_maps[2],
        )
    if id_mode == "dense":
        return InteractionStore.from_triples(triples)
    id_of = lambda table: tuple(table.keys())
    return InteractionStore.from_triples(
        triples,
        n_users=len(users), n_items=len(items), n_explanations=len(expls),
        user_ids=id_of(users), item_ids=id_of(items), expl_ids=id_of(expls),
    )


def save_triples(store: InteractionStore, path) -> None:
    """Write the store as one raw-ID triple per line (multi-explanation
    records become multiple lines)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in store.records:
            for e in sorted(rec.explanations):
                fh.write(
                    f"{store.user_ids[rec.user]}\t"
                    f"{store.item_ids[rec.item]}\t{store.expl_ids[e]}\n"
                )


def save_id_maps(store: InteractionStore, prefix) -> None:
    """Write ``raw_id<TAB>dense_index`` map files, one per entity class."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for suffix, ids in (
        ("users", store.user_ids), ("items", store.item_ids),
        ("explanations", store.expl_ids),
    ):
        with Path(f"{prefix}.{suffix}.map").open("w", encoding="utf-8") as fh:
            for idx, raw in enumerate(ids):
                fh.write(f"{raw}\t{idx}\n")


def load_id_maps(prefix) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    """Read the three map files written by :func:`save_id_maps`."""
    out = []
    for suffix in ("users", "items", "explanations"):
        ids: list[str] = []
        with Path(f"{prefix}.{suffix}.map").open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                raw, idx = line.rstrip("\n").split("\t")
                if int(idx) != lineno:
                    raise DataError(f"{prefix}.{suffix}.map: non-contiguous index")
                ids.append(raw)
        out.append(tuple(ids))
    return tuple(out)


def split(
    store: InteractionStore, spec: SplitSpec, repetition: int,
) -> tuple[InteractionStore, InteractionStore, InteractionStore]:
    """Partition records into (train, valid, test), deterministically.

    Records are shuffled and cut at ``train_fraction``; a repair pass
    then moves test records into train until every user, item and
    explanation present in the store occurs in at least one training
    record.  Validation is carved from the repaired training records,
    skipping any record whose removal would break that coverage.
    """
    if repetition >= spec.repetitions:
        raise ValueError(f"repetition {repetition} >= repetitions {spec.repetitions}")
    if not store.records:
        raise DataError("cannot split an empty store")

    rng = np.random.default_rng([spec.seed, repetition])
    n = store.record_count
    order = rng.permutation(n)
    n_train = int(round(spec.train_fraction * n))
    train_idx = list(order[:n_train])
    test_idx = list(order[n_train:])

    # Repair: walk test records in random order, pulling into train the
    # first record that covers each still-missing entity.
    users_missing, items_missing, expls_missing = store.entities_present()
    for idx in train_idx:
        rec = store.records[idx]
        users_missing.discard(rec.user)
        items_missing.discard(rec.item)
        expls_missing -= rec.explanations
    if users_missing or items_missing or expls_missing:
        moved = []
        scan = rng.permutation(len(test_idx))
        for pos in scan:
            if not (users_missing or items_missing or expls_missing):
                break
            idx = test_idx[pos]
            rec = store.records[idx]
            if (
                rec.user in users_missing
                or rec.item in items_missing
                or (rec.explanations & expls_missing)
            ):
                moved.append(pos)
                users_missing.discard(rec.user)
                items_missing.discard(rec.item)
                expls_missing -= rec.explanations
        for pos in sorted(moved, reverse=True):
            train_idx.append(test_idx.pop(pos))

    # Validation carve-out keeps train coverage intact: a record may move
    # only if none of its entities would lose their last training record.
    n_valid = int(round(spec.validation_fraction * len(train_idx)))
    valid_idx: list[int] = []
    if n_valid > 0:
        user_cnt = np.zeros(store.n_users, dtype=np.int64)
        item_cnt = np.zeros(store.n_items, dtype=np.int64)
        expl_cnt = np.zeros(store.n_explanations, dtype=np.int64)
        for idx in train_idx:
            rec = store.records[idx]
            user_cnt[rec.user] += 1
            item_cnt[rec.item] += 1
            for e in rec.explanations:
                expl_cnt[e] += 1
        scan = rng.permutation(len(train_idx))
        keep = set()
        for pos in scan:
            if len(valid_idx) == n_valid:
                break
            idx = train_idx[pos]
            rec = store.records[idx]
            if user_cnt[rec.user] < 2 or item_cnt[rec.item] < 2:
                continue
            if any(expl_cnt[e] < 2 for e in rec.explanations):
                continue
            user_cnt[rec.user] -= 1
            item_cnt[rec.item] -= 1
            for e in rec.explanations:
                expl_cnt[e] -= 1
            valid_idx.append(idx)
            keep.add(pos)
        train_idx = [idx for pos, idx in enumerate(train_idx) if pos not in keep]

    by_store_order = lambda idxs: [store.records[i] for i in sorted(idxs)]
    return (
        store.subset(by_store_order(train_idx)),
        store.subset(by_store_order(valid_idx)),
        store.subset(by_store_order(test_idx)),
    )


def subsample_training(
    train: InteractionStore, target_ratio_of_whole: float,
    whole_triple_count: int, seed: int,
) -> InteractionStore:
    """Uniformly drop triples until ``round(ratio * whole)`` remain.

    Removal is at triple level: records shrink and are dropped when
    their explanation set empties.  Entity coverage is deliberately not
    re-repaired, so entities can go cold.
    """
    target = int(round(target_ratio_of_whole * whole_triple_count))
    available = train.triple_count
    if target > available:
        raise DataError(
            f"target of {target} triples exceeds the {available} available"
        )
    if target == available:
        return train
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(available, size=target, replace=False))
    kept_pairs: dict[tuple[int, int], set[int]] = {}
    for t in keep:
        u = int(train.triple_users[t])
        i = int(train.triple_items[t])
        e = int(train.triple_expls[t])
        kept_pairs.setdefault((u, i), set()).add(e)
    records = [
        TripleRecord(rec.user, rec.item, frozenset(kept_pairs[(rec.user, rec.item)]))
        for rec in train.records
        if (rec.user, rec.item) in kept_pairs
    ]
    return train.subset(records)
