"""Ranking quality (AUC, AP, Precision@K) and multimodal trajectory metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class LabeledScore:
    scene_id: str
    score: float
    label: int

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score for {self.scene_id} is not finite")
        if self.label not in (0, 1):
            raise ValueError(f"label for {self.scene_id} must be 0 or 1")


class UndefinedMetric(ValueError):
    """The metric has no value for this label distribution."""


def labeled(scene_ids: Sequence[str], scores: Sequence[float], labels: Sequence[int]) -> list[LabeledScore]:
    return [LabeledScore(str(s), float(x), int(y)) for s, x, y in zip(scene_ids, scores, labels, strict=True)]


def ranked(scores: Sequence[LabeledScore]) -> list[LabeledScore]:
    """Descending score, ties broken by ascending scene_id."""
    return sorted(scores, key=lambda r: (-r.score, r.scene_id))


def auc(scores: Sequence[LabeledScore]) -> float:
    """ROC AUC as the Mann-Whitney statistic with average ranks for ties."""
    y = np.array([r.label for r in scores])
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs at least one positive and one negative label")
    ranks = rankdata([r.score for r in scores], method="average")
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores: Sequence[LabeledScore]) -> float:
    """Mean of precision@r over the ranks r of the positives."""
    order = ranked(scores)
    n_pos = sum(r.label for r in order)
    if n_pos == 0:
        raise UndefinedMetric("AP needs at least one positive label")
    hits, total = 0, 0.0
    for rank, r in enumerate(order, start=1):
        if r.label:
            hits += 1
            total += hits / rank
    return total / n_pos


def precision_at_k(scores: Sequence[LabeledScore], k: int) -> float:
    if not 1 <= k <= len(scores):
        raise ValueError(f"K={k} outside 1..{len(scores)}")
    return sum(r.label for r in ranked(scores)[:k]) / k


def roc_points(scores: Sequence[LabeledScore]) -> list[tuple[float, float]]:
    """(FPR, TPR) after each distinct score threshold, for external plotting."""
    order = ranked(scores)
    n_pos = sum(r.label for r in order)
    n_neg = len(order) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("ROC needs both classes")
    pts, tp, fp = [(0.0, 0.0)], 0, 0
    for i, r in enumerate(order):
        tp += r.label
        fp += 1 - r.label
        if i + 1 == len(order) or order[i + 1].score != r.score:
            pts.append((fp / n_neg, tp / n_pos))
    return pts


# --- multimodal trajectory metrics ------------------------------------------

@dataclass(frozen=True, eq=False)
class JointPredictionSet:
    """Predictions shaped (K, N, F, 2) against ground truth shaped (N, F, 2)."""

    predictions: np.ndarray
    ground_truth: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.predictions, dtype=float)
        gt = np.asarray(self.ground_truth, dtype=float)
        if pred.ndim != 4 or pred.shape[-1] != 2 or pred.shape[0] < 1:
            raise ValueError(f"predictions must be (K, N, F, 2), got {pred.shape}")
        if gt.shape != pred.shape[1:]:
            raise ValueError(f"ground truth shape {gt.shape} does not match predictions {pred.shape}")
        if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(gt))):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "predictions", pred)
        object.__setattr__(self, "ground_truth", gt)

    @property
    def K(self) -> int:
        return self.predictions.shape[0]

    @property
    def N(self) -> int:
        return self.predictions.shape[1]

    @property
    def F(self) -> int:
        return self.predictions.shape[2]

    def errors(self) -> np.ndarray:
        """Displacement norms shaped (K, N, F)."""
        return np.linalg.norm(self.predictions - self.ground_truth[None], axis=-1)


def select_mode(pred: JointPredictionSet) -> int:
    """Winner-takes-all mode: smallest summed endpoint error over all agents."""
    return int(np.argmin(pred.errors()[:, :, -1].sum(axis=1)))


def min_joint_ade_fde(pred: JointPredictionSet) -> tuple[float, float]:
    err = pred.errors()
    ade = err.mean(axis=(1, 2))
    fde = err[:, :, -1].mean(axis=1)
    return float(ade.min()), float(fde.min())
