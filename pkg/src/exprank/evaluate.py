"""Top-N ranking and ranking-quality metrics.

Explanation ranking always scores the entire explanation universe with
no filtering; item ranking excludes the user's training items.  Metric
definitions: with rel_p the binary relevance of rank p,

    NDCG@N = (1/Z) * sum_p (2^rel_p - 1) / ln(p + 1),
    Z      = sum_{p=1..N} 1 / ln(p + 1)

so the normalizer is the DCG of an all-relevant length-N list (a pair
with fewer than N ground-truth entries can never reach 1).  Precision
divides hits by N, recall by the ground-truth size, and F1 is their
harmonic mean (0 when both are 0).  Natural logarithms throughout; NDCG
is base-invariant since numerator and Z share the base.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .data import InteractionStore


class ExplanationScorer(Protocol):
    def explanation_scores(self, u: int, i: int) -> np.ndarray: ...


class ItemScorer(Protocol):
    def item_scores(self, u: int) -> np.ndarray: ...


@dataclass(frozen=True)
class RankedList:
    """Candidates ordered by (score desc, id asc), truncated to the cutoff."""

    entries: tuple[tuple[int, float], ...]
    cutoff: int

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(cid for cid, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class MetricsReport:
    """Metric means over evaluation units (pairs or users)."""

    ndcg: float
    precision: float
    recall: float
    f1: float
    unit_count: int
    cutoff: int

    @property
    def empty(self) -> bool:
        return self.unit_count == 0

    def as_dict(self) -> dict[str, float]:
        return {
            "ndcg": self.ndcg, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
        }


def rank_candidates(
    scores: np.ndarray, n: int, candidate_ids: np.ndarray | None = None,
) -> RankedList:
    """Top-n of a score vector with deterministic id-ascending tie-breaks."""
    if n < 1:
        raise ValueError("cutoff must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    # Stable sort on descending score preserves ascending candidate order
    # among exact ties.
    order = np.argsort(-scores, kind="stable")[:n]
    if candidate_ids is None:
        entries = tuple((int(j), float(scores[j])) for j in order)
    else:
        entries = tuple((int(candidate_ids[j]), float(scores[j])) for j in order)
    return RankedList(entries, n)


def top_explanations(scorer: ExplanationScorer, u: int, i: int, n: int) -> RankedList:
    """Rank the whole explanation universe for one (user, item) pair."""
    return rank_candidates(scorer.explanation_scores(u, i), n)


def top_items(
    scorer: ItemScorer, u: int, m: int, exclude: frozenset[int] | set[int],
) -> RankedList:
    """Rank all items the user has not trained on."""
    scores = np.asarray(scorer.item_scores(u), dtype=np.float64)
    keep = np.setdiff1d(np.arange(scores.shape[0]), np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
    return rank_candidates(scores[keep], m, candidate_ids=keep)


def dcg_normalizer(n: int) -> float:
    import math

    return sum(1.0 / math.log(p + 1) for p in range(1, n + 1))


def metrics_for_pair(
    ranked: RankedList, ground_truth: frozenset[int] | set[int], n: int,
) -> tuple[float, float, float, float]:
    """(ndcg, precision, recall, f1) of one ranked list against its
    ground-truth set."""
    import math

    if not ground_truth:
        raise ValueError("empty ground truth")
    rel = [1.0 if cid in ground_truth else 0.0 for cid, _ in ranked.entries[:n]]
    hits = sum(rel)
    # Accumulate DCG and its normalizer in the same order so the
    # all-relevant case is exactly 1.
    dcg, z = 0.0, 0.0
    for p in range(1, n + 1):
        gain = 1.0 / math.log(p + 1)
        z += gain
        if p <= len(rel) and rel[p - 1]:
            dcg += gain
    ndcg = dcg / z
    precision = hits / n
    recall = hits / len(ground_truth)
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0 else 0.0
    )
    return float(ndcg), float(precision), float(recall), float(f1)


def _mean_report(rows: list[tuple[float, float, float, float]], n: int) -> MetricsReport:
    if not rows:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0, n)
    sums = [0.0, 0.0, 0.0, 0.0]
    for row in rows:
        for k in range(4):
            sums[k] += row[k]
    count = len(rows)
    return MetricsReport(*(s / count for s in sums), count, n)


def evaluate_explanation_ranking(
    scorer: ExplanationScorer, test: InteractionStore, n: int = 10,
) -> MetricsReport:
    """Mean pair-level metrics over every test record, in (user, item)
    order so merging is bit-stable."""
    rows = []
    for rec in sorted(test.records, key=lambda r: (r.user, r.item)):
        ranked = top_explanations(scorer, rec.user, rec.item, n)
        rows.append(metrics_for_pair(ranked, rec.explanations, n))
    if not rows:
        raise ValueError("test store has no records")
    return _mean_report(rows, n)


def evaluate_joint(
    scorer, train: InteractionStore, test: InteractionStore,
    m: int = 10, n: int = 10,
) -> tuple[MetricsReport, MetricsReport]:
    """Two-stage protocol: rank items per test user, then rank
    explanations only for the correctly recommended pairs.

    Returns (recommendation report over users, explanation report over
    hit pairs).  With zero hits the explanation report comes back with
    unit_count 0 rather than invented numbers.
    """
    test_items_of_user: dict[int, set[int]] = {}
    for rec in test.records:
        test_items_of_user.setdefault(rec.user, set()).add(rec.item)

    rec_rows = []
    exp_rows = []
    for u in sorted(test_items_of_user):
        truth = test_items_of_user[u]
        ranked = top_items(scorer, u, m, train.items_of_user[u])
        rec_rows.append(metrics_for_pair(ranked, truth, m))
        for i in ranked.ids:
            if i in truth:
                expl_truth = test.pair_expls[(u, i)]
                exp_ranked = top_explanations(scorer, u, i, n)
                exp_rows.append(metrics_for_pair(exp_ranked, expl_truth, n))
    if not rec_rows:
        raise ValueError("test store has no records")
    return _mean_report(rec_rows, m), _mean_report(exp_rows, n)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "dataset", "model", "repetition", "d", "gamma", "lambda", "epochs",
    "mu", "alpha", "extra", "task", "metric", "value",
)


def format_float(x: float) -> str:
    return f"{x:.6g}"


def report_rows(
    report: MetricsReport, *, dataset: str, model: str, repetition,
    hp=None, task: str = "explanation", extra: str = "",
) -> list[dict[str, str]]:
    """Long-format rows (one per metric) for the fixed CSV schema."""
    base = {
        "dataset": dataset, "model": model, "repetition": str(repetition),
        "d": "", "gamma": "", "lambda": "", "epochs": "", "mu": "", "alpha": "",
        "extra": extra, "task": task,
    }
    if hp is not None:
        base.update(
            d=str(hp.d), gamma=format_float(hp.gamma),
            epochs=str(hp.epochs), mu=format_float(hp.mu),
            alpha=format_float(hp.alpha),
        )
        base["lambda"] = format_float(hp.reg)
    rows = []
    for metric, value in report.as_dict().items():
        row = dict(base)
        row["metric"] = f"{metric}@{report.cutoff}"
        row["value"] = format_float(value)
        rows.append(row)
    return rows


def write_csv(path, rows: list[dict[str, str]]) -> None:
    import csv
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
