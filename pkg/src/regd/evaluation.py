"""Threshold-swept F1 for inference tasks and rank metrics for link prediction.

A pair is predicted positive when its energy is at most the threshold.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float


def _check_scored(energies, labels):
    energies = np.asarray(energies, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if energies.shape != labels.shape:
        raise ValueError("energies and labels differ in length")
    if not np.all(np.isfinite(energies)):
        raise ValueError("non-finite energy in scored pairs")
    return energies, labels


def f1_at_threshold(energies, labels, t: float) -> Scores:
    energies, labels = _check_scored(energies, labels)
    predicted = energies <= t
    tp = int(np.sum(predicted & labels))
    fp = int(np.sum(predicted & ~labels))
    fn = int(np.sum(~predicted & labels))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Scores(precision, recall, f1)


def best_threshold_f1(energies, labels) -> tuple[float, float]:
    """Exact F1 optimum over every observed energy used as threshold.

    Ties in F1 resolve to the smallest threshold.
    """
    energies, labels = _check_scored(energies, labels)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("need at least one positive and one negative pair")
    order = np.argsort(energies, kind="stable")
    e = energies[order]
    tp = np.cumsum(labels[order])
    fp = np.cumsum(~labels[order])
    # the last index of each run of equal energies carries the counts for t = that energy
    last = np.r_[e[1:] != e[:-1], True]
    cand, tp, fp = e[last], tp[last], fp[last]
    f1 = 2 * tp / (2 * tp + fp + (n_pos - tp))
    best = int(np.argmax(f1))
    return float(cand[best]), float(f1[best])


@dataclass(frozen=True)
class RankResult:
    rank: int
    count: int

    def __post_init__(self):
        if not 1 <= self.rank <= self.count:
            raise ValueError(f"rank {self.rank} outside 1..{self.count}")


def pessimistic_rank(scores, true_index: int) -> int:
    """1-based rank of the true candidate by ascending energy; ties rank it last."""
    scores = np.asarray(scores, dtype=float)
    true = scores[true_index]
    return int(np.sum(scores <= true))


@dataclass(frozen=True)
class RankingMetrics:
    h1: float
    h10: float
    h100: float
    median: float
    mrr: float
    mr: float
    auc: float
    queries: int

    def as_dict(self) -> dict:
        return asdict(self)


def ranking_metrics(results: Sequence[RankResult], ks: Iterable[int] = (1, 10, 100)) -> RankingMetrics:
    if not results:
        raise ValueError("no ranking results")
    ranks = np.array([r.rank for r in results], dtype=float)
    counts = np.array([r.count for r in results], dtype=float)
    hits = {k: float(np.mean(ranks <= k)) for k in ks}
    usable = counts > 1
    if not usable.all():
        log.warning("skipping %d queries with a single candidate in AUC", int((~usable).sum()))
    auc = float(np.mean(1.0 - (ranks[usable] - 1) / (counts[usable] - 1))) if usable.any() else float("nan")
    return RankingMetrics(
        h1=hits.get(1, float("nan")),
        h10=hits.get(10, float("nan")),
        h100=hits.get(100, float("nan")),
        median=float(np.median(ranks)),
        mrr=float(np.mean(1.0 / ranks)),
        mr=float(np.mean(ranks)),
        auc=auc,
        queries=len(results),
    )


def format_table(metrics: dict) -> str:
    width = max(len(k) for k in metrics)
    lines = []
    for key, value in metrics.items():
        shown = f"{value:.4f}" if isinstance(value, float) else str(value)
        lines.append(f"{key:<{width}}  {shown}")
    return "\n".join(lines)
