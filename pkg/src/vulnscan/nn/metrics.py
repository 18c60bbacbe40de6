"""Confusion-matrix metrics and rank-statistic ROC-AUC."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .bilstm import BiLstmModel, forward_batch
from .train import Dataset, EmptyDataset


@dataclass
class EvalMetrics:
    accuracy: float
    f_score: float
    precision: float
    recall: float
    roc_auc: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def rank_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with ties averaged; 0.5 when one class is absent."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = int(np.sum(labels == 1))
    neg = int(np.sum(labels == 0))
    if pos == 0 or neg == 0:
        return 0.5
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # 1-based average rank
        i = j + 1
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def metrics_from_scores(scores: Sequence[float], labels: Sequence[int],
                        threshold: float = 0.5) -> EvalMetrics:
    """Metrics at a decision threshold; a score exactly at it counts negative."""
    if len(scores) == 0:
        raise EmptyDataset("no scores to evaluate")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = scores > threshold
    actual = labels == 1
    tp = int(np.sum(preds & actual))
    fp = int(np.sum(preds & ~actual))
    fn = int(np.sum(~preds & actual))
    tn = int(np.sum(~preds & ~actual))
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f_score = (2 * precision * recall / (precision + recall)
               if precision + recall > 0 else 0.0)
    return EvalMetrics(accuracy=accuracy, f_score=f_score, precision=precision,
                       recall=recall, roc_auc=rank_auc(scores, labels))


def evaluate(model: BiLstmModel, dataset: Dataset,
             threshold: float = 0.5) -> EvalMetrics:
    if len(dataset) == 0:
        raise EmptyDataset("no evaluation examples")
    scores: list[float] = []
    labels: list[int] = []
    for window, label in dataset:
        s, _ = forward_batch(model, np.asarray(window)[None], training=False)
        scores.append(float(s[0]))
        labels.append(int(label))
    return metrics_from_scores(scores, labels, threshold)
