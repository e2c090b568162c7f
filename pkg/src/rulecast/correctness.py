"""Per-rule correctness labels and the classifiers that predict them.

For each selected rule, a sample is labeled 1 when the rule's output (THEN or
ELSE class) matches the sample's true label.  One penalized logistic model per
rule then predicts that flag from the raw values of the K features the
selected rules use (categorical features enter as their integer codes).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError
from .lasso import (
    LogisticModel,
    cv_select_lambda,
    fit_lasso_logistic,
    lambda_max,
    predict_proba,
)
from .rng import TAG_CORRECTNESS, derived_rng
from .rules import Rule, rule_outputs_matrix
from .lasso import SelectedRuleSet

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class CorrectnessLabels:
    """N x M binary matrix: (n, m) = 1 iff rule m's output matches label n."""

    matrix: np.ndarray
    rule_refs: tuple[Rule, ...]


@dataclass(frozen=True)
class RuleCorrectnessModel:
    """Either a fitted logistic model or a constant (single-class fallback)."""

    model: "LogisticModel | None" = None
    constant: "int | None" = None

    def __post_init__(self) -> None:
        if (self.model is None) == (self.constant is None):
            raise ValueError("exactly one of model/constant must be set")


@dataclass(frozen=True)
class CorrectnessModelSet:
    models: tuple[RuleCorrectnessModel, ...]
    feature_union: tuple[int, ...]
    threshold: float = DEFAULT_THRESHOLD


def build_correctness_labels(selected: SelectedRuleSet, dataset: Dataset) -> CorrectnessLabels:
    """Compare every rule's output (not its IF-part) against the true labels."""
    outputs = rule_outputs_matrix(selected.rules, dataset.matrix())
    matrix = (outputs == dataset.labels[:, None]).astype(np.uint8)
    return CorrectnessLabels(matrix=matrix, rule_refs=selected.rules)


def fit_correctness_models(
    dataset: Dataset,
    selected: SelectedRuleSet,
    labels: CorrectnessLabels,
    folds: int = 3,
    seed: int = 0,
) -> CorrectnessModelSet:
    """One lambda-tuned lasso-logistic model per rule over the N x K raw matrix.

    Single-class correctness columns get a constant fallback.  Columns whose
    minority class is smaller than the CV fold count skip lambda selection and
    fit at lambda_max (effectively the intercept-only model).
    """
    if not selected.feature_union:
        raise DataError("selected rules reference no features (K = 0)")
    Z = np.ascontiguousarray(dataset.matrix()[:, selected.feature_union])

    fitted = []
    for m in range(labels.matrix.shape[1]):
        col = labels.matrix[:, m].astype(np.float64)
        if col.min() == col.max():
            fitted.append(RuleCorrectnessModel(constant=int(col[0])))
            continue
        minority = int(min(col.sum(), col.shape[0] - col.sum()))
        if minority < folds:
            lam = lambda_max(Z, col)
        else:
            # one derived stream, restarted per rule: identical correctness
            # columns therefore get identical folds, lambda and model
            lam = cv_select_lambda(Z, col, folds=folds, seed=derived_rng(seed, TAG_CORRECTNESS))
        fitted.append(RuleCorrectnessModel(model=fit_lasso_logistic(Z, col, lam)))

    return CorrectnessModelSet(models=tuple(fitted), feature_union=selected.feature_union)


def predict_correctness(models: CorrectnessModelSet, sample: np.ndarray) -> np.ndarray:
    """Binary flags per rule; probability >= threshold (inclusive) maps to 1.

    Accepts a single feature vector (returns shape (M,)) or an (N, D) matrix
    (returns (N, M)).
    """
    X = np.asarray(sample, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] <= max(models.feature_union):
        raise DataError(
            f"sample has {X.shape[1]} features, model needs index {max(models.feature_union)}"
        )
    Z = X[:, models.feature_union]
    out = np.empty((X.shape[0], len(models.models)), dtype=np.uint8)
    for m, rcm in enumerate(models.models):
        if rcm.constant is not None:
            out[:, m] = rcm.constant
        else:
            out[:, m] = (predict_proba(rcm.model, Z) >= models.threshold).astype(np.uint8)
    return out[0] if single else out
