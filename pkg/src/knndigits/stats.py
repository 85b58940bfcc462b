"""Evaluation statistics: accuracy, binomial intervals, confusion matrix,
and the two-proportion z-test used to compare the two metrics.

All quantities derive from exact integer counts; floating point enters
only through the final divisions and square roots, and display rounding
happens at serialization time, never here. The normal-approximation
machinery is deliberately the whole story: no exact (Clopper-Pearson)
intervals, no p-values beyond the z-threshold decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadLabel, BadProportion, EmptyInput, LengthMismatch
from .idx_io import NUM_CLASSES
from .metrics import MetricId

DEFAULT_Z = 1.96  # two-sided 95% normal quantile


def accuracy(predictions, truths) -> float:
    """Fraction of exact label matches, as correct/total."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise LengthMismatch(f"{predictions.shape} predictions vs {truths.shape} truths")
    if predictions.size == 0:
        raise EmptyInput("cannot compute accuracy of zero predictions")
    return int((predictions == truths).sum()) / predictions.size


def binomial_std(p: float, n: int) -> float:
    """Normal-approximation std of a proportion: sqrt(p(1-p)/n)."""
    if not 0.0 <= p <= 1.0:
        raise BadProportion(f"p={p} outside [0, 1]")
    if n < 1:
        raise BadProportion(f"n={n} must be >= 1")
    return math.sqrt(p * (1.0 - p) / n)


def confidence_interval(p: float, n: int, z: float = DEFAULT_Z):
    """(p - z*sigma, p + z*sigma) for the binomial std at (p, n)."""
    if z <= 0:
        raise BadProportion(f"z={z} must be positive")
    sigma = binomial_std(p, n)
    return p - z * sigma, p + z * sigma


def confusion_matrix(predictions, truths) -> np.ndarray:
    """10x10 count table; rows are actual classes, columns predicted."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise LengthMismatch(f"{predictions.shape} predictions vs {truths.shape} truths")
    both = np.concatenate([predictions, truths])
    if both.size and (both.min() < 0 or both.max() > 9):
        raise BadLabel("labels must be in 0..9")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (truths.astype(np.int64), predictions.astype(np.int64)), 1)
    return counts


@dataclass(frozen=True)
class HypothesisResult:
    """Outcome of the two-proportion z-test between two accuracies.

    degenerate flags sigma_d == 0 (both proportions are exactly 0 or 1),
    where the normal approximation has no spread to test against; with
    d == 0 as well, the test reports not-rejected.
    """

    d: float
    sigma_d: float
    z_stat: float
    z_critical: float
    rejected: bool
    degenerate: bool


def two_proportion_test(p1: float, n1: int, p2: float, n2: int,
                        z_critical: float = DEFAULT_Z) -> HypothesisResult:
    """Test whether two accuracies differ: z = |p2-p1| / sigma_d.

    sigma_d is the unpooled std of the difference,
    sqrt(p1(1-p1)/n1 + p2(1-p2)/n2). Symmetric under argument swap.
    """
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise BadProportion(f"p={p} outside [0, 1]")
    if n1 < 1 or n2 < 1:
        raise BadProportion(f"sample sizes must be >= 1, got {n1}, {n2}")
    d = p2 - p1
    sigma_d = math.sqrt(p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2)
    if sigma_d == 0.0:
        z_stat = 0.0 if d == 0.0 else math.inf
        return HypothesisResult(d, sigma_d, z_stat, z_critical,
                                rejected=z_stat > z_critical, degenerate=True)
    z_stat = abs(d) / sigma_d
    return HypothesisResult(d, sigma_d, z_stat, z_critical,
                            rejected=z_stat > z_critical, degenerate=False)


@dataclass(frozen=True)
class EvalReport:
    """Everything one evaluation run reports."""

    metric: MetricId
    k: int
    n: int
    correct: int
    accuracy: float
    std: float
    ci_low: float
    ci_high: float
    z: float
    confusion: np.ndarray
    wall_time: float


def evaluate(predictions, truths, metric: MetricId, k: int,
             z: float = DEFAULT_Z, wall_time: float = 0.0) -> EvalReport:
    """Assemble an EvalReport from raw predictions.

    Accuracy is computed from the confusion diagonal so the report is
    internally consistent by construction (diagonal/total == accuracy).
    """
    confusion = confusion_matrix(predictions, truths)
    n = int(confusion.sum())
    if n == 0:
        raise EmptyInput("cannot evaluate zero predictions")
    correct = int(np.trace(confusion))
    acc = correct / n
    std = binomial_std(acc, n)
    return EvalReport(
        metric=metric, k=k, n=n, correct=correct, accuracy=acc, std=std,
        ci_low=acc - z * std, ci_high=acc + z * std, z=z,
        confusion=confusion, wall_time=wall_time,
    )
