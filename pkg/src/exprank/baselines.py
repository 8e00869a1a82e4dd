"""Non-factorization baselines: random scores and neighborhood CF.

The collaborative-filtering scores sum Jaccard similarities over
neighbors that co-occur with both the target item/user and the target
explanation.  Neighborhoods are top-K by similarity with ties broken by
ascending index; only strictly positive similarities are kept, so
entities overlapping nothing get empty lists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InteractionStore


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


@dataclass(frozen=True)
class NeighborIndex:
    """Per-user and per-item top-K neighbor lists with similarities."""

    user_neighbors: tuple[tuple[tuple[int, float], ...], ...]
    item_neighbors: tuple[tuple[tuple[int, float], ...], ...]
    k: int


def _top_k_neighbors(sets, k):
    """Top-k Jaccard neighbors per entity, computed via an inverted index
    so only overlapping pairs are visited."""
    n = len(sets)
    inverted: dict[int, list[int]] = {}
    for idx, s in enumerate(sets):
        for member in s:
            inverted.setdefault(member, []).append(idx)
    out = []
    for idx in range(n):
        candidates = set()
        for member in sets[idx]:
            candidates.update(inverted[member])
        candidates.discard(idx)
        scored = [(jaccard(sets[idx], sets[c]), c) for c in sorted(candidates)]
        scored = [(s, c) for s, c in scored if s > 0.0]
        scored.sort(key=lambda sc: (-sc[0], sc[1]))
        out.append(tuple((c, s) for s, c in scored[:k]))
    return tuple(out)


def build_neighbors(store: InteractionStore, k: int = 50) -> NeighborIndex:
    """Jaccard neighborhoods over explanation sets, for users and items."""
    return NeighborIndex(
        user_neighbors=_top_k_neighbors(store.expls_of_user, k),
        item_neighbors=_top_k_neighbors(store.expls_of_item, k),
        k=k,
    )


def score_rand(rng: np.random.Generator, u: int, i: int, e: int) -> float:
    """Uniform [0,1) score, i.i.d. per call."""
    return float(rng.random())


def score_rucf(
    idx: NeighborIndex, store: InteractionStore, u: int, i: int, e: int,
) -> float:
    """Sum of similarities over u's neighbors who used both item i and
    explanation e."""
    users_i = store.users_of_item[i]
    users_e = store.users_of_expl[e]
    total = 0.0
    for v, s in idx.user_neighbors[u]:
        if v in users_i and v in users_e:
            total += s
    return total


def score_ricf(
    idx: NeighborIndex, store: InteractionStore, u: int, i: int, e: int,
) -> float:
    """Item-side mirror: sum over i's neighbors that user u interacted
    with and that carry explanation e."""
    items_u = store.items_of_user[u]
    total = 0.0
    for j, s in idx.item_neighbors[i]:
        if j in items_u and e in store.expls_of_item[j]:
            total += s
    return total


def rucf_score_vector(
    idx: NeighborIndex, store: InteractionStore, u: int, i: int,
) -> np.ndarray:
    """score_rucf over the whole explanation universe at once."""
    scores = np.zeros(store.n_explanations)
    users_i = store.users_of_item[i]
    for v, s in idx.user_neighbors[u]:
        if v in users_i:
            scores[list(store.expls_of_user[v])] += s
    return scores


def ricf_score_vector(
    idx: NeighborIndex, store: InteractionStore, u: int, i: int,
) -> np.ndarray:
    """score_ricf over the whole explanation universe at once."""
    scores = np.zeros(store.n_explanations)
    items_u = store.items_of_user[u]
    for j, s in idx.item_neighbors[i]:
        if j in items_u:
            scores[list(store.expls_of_item[j])] += s
    return scores
