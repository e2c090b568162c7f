"""Final class-probability computation from rule outputs and correctness flags.

Two combiners: a plain mean of the M rule outputs, and a weighted mean where
rules predicted to be correct count `weight_correct` and the rest
`weight_incorrect` (defaults 2 and 1, so trusted rules count twice).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correctness import predict_correctness
from .rules import rule_outputs_matrix


@dataclass(frozen=True)
class WeightScheme:
    weight_correct: float = 2.0
    weight_incorrect: float = 1.0

    def __post_init__(self) -> None:
        if self.weight_correct <= 0 or self.weight_incorrect <= 0:
            raise ValueError("weights must be positive")


@dataclass(frozen=True)
class PredictionTrace:
    rule_outputs: np.ndarray
    correctness_flags: np.ndarray
    weights: np.ndarray
    probability: float


def simple_mean_probability(rule_outputs) -> float:
    outputs = np.asarray(rule_outputs, dtype=np.float64)
    if outputs.size == 0:
        raise ValueError("empty rule set")
    return float(outputs.mean())


def weighted_probability(rule_outputs, correctness, scheme: WeightScheme = WeightScheme()) -> float:
    outputs = np.asarray(rule_outputs, dtype=np.float64)
    flags = np.asarray(correctness, dtype=np.float64)
    if outputs.size == 0:
        raise ValueError("empty rule set")
    if outputs.shape != flags.shape:
        raise ValueError("rule outputs and correctness flags differ in length")
    w = np.where(flags == 1, scheme.weight_correct, scheme.weight_incorrect)
    return float((outputs * w).sum() / w.sum())


def predict_sample(model, sample) -> PredictionTrace:
    """Full trace for one sample: rule outputs, correctness flags, weights, probability.

    `model` is a trained pipeline (selected rules + correctness models +
    weight scheme).
    """
    x = np.asarray(sample, dtype=np.float64)
    outputs = rule_outputs_matrix(model.selected.rules, x[None, :])[0]
    flags = predict_correctness(model.correctness, x)
    scheme = model.weights
    w = np.where(flags == 1, scheme.weight_correct, scheme.weight_incorrect).astype(np.float64)
    prob = float((outputs * w).sum() / w.sum())
    return PredictionTrace(
        rule_outputs=outputs,
        correctness_flags=flags,
        weights=w,
        probability=prob,
    )


def pipeline_scores(model, X) -> tuple[np.ndarray, np.ndarray]:
    """(weighted, simple) positive-class probabilities for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    outputs = rule_outputs_matrix(model.selected.rules, X).astype(np.float64)
    flags = predict_correctness(model.correctness, X)
    scheme = model.weights
    w = np.where(flags == 1, scheme.weight_correct, scheme.weight_incorrect)
    weighted = (outputs * w).sum(axis=1) / w.sum(axis=1)
    simple = outputs.mean(axis=1)
    return weighted, simple
