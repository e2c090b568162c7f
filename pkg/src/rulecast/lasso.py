"""L1-regularized logistic regression and rule selection.

The solver minimizes

    (1/N) * sum_i [log(1 + exp(eta_i)) - y_i * eta_i] + lam * sum_j |coef_j|

with an unpenalized intercept, by cyclic coordinate descent on the
iteratively reweighted quadratic approximation.  Each outer step is
line-searched on the true objective, so the objective never increases.
Convergence: max coefficient change < `tol` (default 1e-6) or `max_iter`
outer iterations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import cd_weighted_lasso
from .data import stratified_fold_indices
from .rng import TAG_LASSO_CV, derived_rng
from .rules import Rule

_WEIGHT_FLOOR = 1e-9
_PROB_CLIP = 1e-12


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    lam: float
    n_iter: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))


def sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def predict_proba(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return sigmoid(X @ model.coefficients + model.intercept)


def penalized_objective(X, y, coef, intercept, lam) -> float:
    eta = X @ coef + intercept
    # log(1 + e^eta) = max(eta, 0) + log1p(e^{-|eta|})
    nll = np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta))) - y * eta
    return float(nll.mean() + lam * np.abs(coef).sum())


def _validate_inputs(X, y, lam):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (N, P) and y (N,) with matching N")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("non-finite inputs")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("single-class labels")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return X, y


def _fold_duplicate_columns(X):
    """Indices (ascending) of the first occurrence of each distinct column.

    Bitwise-identical columns are interchangeable for the optimizer; cyclic
    coordinate descent would place all their mass on the first one and leave
    the rest at exactly zero, so solving on representatives and expanding
    zeros back reproduces that solution (and its KKT conditions) at a
    fraction of the cost.  Rule matrices are full of such twins: distinct
    thresholds frequently separate the same samples.

    The reduced matrix comes back column-major so coordinate sweeps touch
    contiguous memory.
    """
    seen = set()
    reps = []
    for j in range(X.shape[1]):
        key = X[:, j].tobytes()
        if key not in seen:
            seen.add(key)
            reps.append(j)
    reps = np.array(reps, dtype=np.int64)
    return reps, np.asfortranarray(X[:, reps])


def _fit_core(X, y, lam, tol, max_iter, inner_pass, init):
    n, p = X.shape
    ybar = y.mean()
    if init is None:
        coef = np.zeros(p)
        b0 = float(np.log(ybar / (1.0 - ybar)))
    else:
        coef = np.asarray(init[0], dtype=np.float64).copy()
        b0 = float(init[1])

    obj = penalized_objective(X, y, coef, b0, lam)
    history = [obj]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        eta = X @ coef + b0
        prob = sigmoid(eta)
        w = np.maximum(prob * (1.0 - prob), _WEIGHT_FLOOR)
        z = eta + (y - prob) / w

        # The quadratic subproblem only needs an order more precision than the
        # outer stopping rule; the outer loop polishes the rest.
        new_coef = coef.copy()
        new_b0 = cd_weighted_lasso(X, w, z, new_coef, b0, lam, 0.1 * tol, inner_pass)

        d_coef = new_coef - coef
        d_b0 = new_b0 - b0
        step = 1.0
        accepted = False
        while step > 1e-10:
            cand_coef = new_coef if step == 1.0 else coef + step * d_coef
            cand_b0 = b0 + step * d_b0
            cand_obj = penalized_objective(X, y, cand_coef, cand_b0, lam)
            if cand_obj <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

        delta = max(np.max(np.abs(cand_coef - coef), initial=0.0), abs(cand_b0 - b0))
        coef, b0, obj = cand_coef, cand_b0, cand_obj
        history.append(obj)
        if delta < tol:
            break

    return coef, b0, n_iter, history


def _fit_with_history(X, y, lam, tol=1e-6, max_iter=1000, inner_pass=200, init=None):
    X, y = _validate_inputs(X, y, lam)
    reps, X_red = _fold_duplicate_columns(X)
    red_init = None
    if init is not None:
        red_init = (np.asarray(init[0], dtype=np.float64)[reps], init[1])
    coef_red, b0, n_iter, history = _fit_core(X_red, y, lam, tol, max_iter, inner_pass, red_init)
    coef = np.zeros(X.shape[1])
    coef[reps] = coef_red
    return LogisticModel(intercept=b0, coefficients=coef, lam=float(lam), n_iter=n_iter), history


def fit_lasso_logistic(X, y, lam, tol=1e-6, max_iter=1000, init=None) -> LogisticModel:
    """Fit the penalized model; `init` optionally warm-starts (coef, intercept)."""
    model, _ = _fit_with_history(X, y, lam, tol=tol, max_iter=max_iter, init=init)
    return model


def smooth_gradient(X, y, model: LogisticModel) -> np.ndarray:
    """Gradient of the unpenalized part at the model: (1/N) X^T (p - y)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    prob = predict_proba(model, X)
    return X.T @ (prob - y) / X.shape[0]


def lambda_max(X, y) -> float:
    """Smallest penalty at which the all-zero coefficient vector is optimal."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.max(np.abs(X.T @ (y - y.mean()))) / X.shape[0])


def default_lambda_grid(X, y, size: int = 50, min_ratio: float = 1e-3) -> np.ndarray:
    """`size` log-spaced values from lambda_max down to lambda_max * min_ratio."""
    top = lambda_max(X, y)
    if top <= 0.0:
        top = 1e-3  # features carry no signal at all; any sparse grid works
    return np.geomspace(top, top * min_ratio, size)


# Per-lambda budgets for warm-started fits inside cross-validation.  A warm
# start from the neighbouring lambda converges in a handful of outer steps in
# the regime that matters; the saturated small-lambda tail (where exactly
# collinear rule columns make the coefficient-change criterion unreachable)
# is truncated rather than ground to the iteration cap.
_PATH_MAX_ITER = 12
_PATH_INNER_PASS = 40


def fit_lasso_path(X, y, lambdas, tol=1e-6, max_iter=1000, inner_pass=200) -> list[LogisticModel]:
    """Fit along a descending lambda grid, warm-starting each fit."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    X, y = _validate_inputs(X, y, float(lambdas.min(initial=0.0)))
    reps, X_red = _fold_duplicate_columns(X)
    models = []
    init = None
    for lam in lambdas:
        coef_red, b0, n_iter, _ = _fit_core(X_red, y, float(lam), tol, max_iter, inner_pass, init)
        init = (coef_red, b0)
        coef = np.zeros(X.shape[1])
        coef[reps] = coef_red
        models.append(LogisticModel(intercept=b0, coefficients=coef, lam=float(lam), n_iter=n_iter))
    return models


def binomial_deviance(y, prob) -> float:
    prob = np.clip(prob, _PROB_CLIP, 1.0 - _PROB_CLIP)
    return float(-2.0 * np.mean(y * np.log(prob) + (1.0 - y) * np.log(1.0 - prob)))


def cv_select_lambda(
    X,
    y,
    folds: int = 3,
    grid: "np.ndarray | None" = None,
    seed: "int | np.random.Generator" = 0,
    tol: float = 1e-6,
) -> float:
    """Grid value minimizing mean out-of-fold binomial deviance; ties prefer
    the larger (sparser) lambda.

    Folds are stratified; the fold shuffle comes from `seed` (an integer or an
    already-derived Generator).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if grid is None:
        grid = default_lambda_grid(X, y)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(np.diff(grid) > 0):
        raise ValueError("lambda grid must be descending")
    counts = np.bincount(y.astype(np.int64), minlength=2)
    if counts.min() < folds:
        raise ValueError("each class needs at least `folds` members for CV")

    rng = seed if isinstance(seed, np.random.Generator) else derived_rng(seed, TAG_LASSO_CV)
    assign = stratified_fold_indices(y.astype(np.int64), folds, rng)

    dev = np.zeros(grid.size)
    for f in range(folds):
        val = assign == f
        models = fit_lasso_path(
            X[~val], y[~val], grid, tol=tol,
            max_iter=_PATH_MAX_ITER, inner_pass=_PATH_INNER_PASS,
        )
        for k, model in enumerate(models):
            dev[k] += binomial_deviance(y[val], predict_proba(model, X[val]))
    dev /= folds

    best = 0
    for k in range(1, grid.size):
        if dev[k] < dev[best]:
            best = k
    return float(grid[best])


# ---------------------------------------------------------------------------
# Rule selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectedRuleSet:
    """Top-M rules by coefficient magnitude, plus their source-feature union."""

    rules: tuple[Rule, ...]
    coefficients: np.ndarray
    feature_union: tuple[int, ...]
    padded: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))

    @property
    def n_rules(self) -> int:
        return len(self.rules)


def select_top_rules(model: LogisticModel, rules, M: int) -> SelectedRuleSet:
    """Rank rules by |coefficient| (ties -> lower rule index) and keep the top M.

    If fewer than M coefficients are nonzero the ranking is padded with
    zero-coefficient rules in index order and the result is flagged.
    """
    rules = list(rules)
    coefs = model.coefficients
    if len(rules) != coefs.shape[0]:
        raise ValueError("coefficient count does not match rule count")
    if M < 1:
        raise ValueError("M must be >= 1")
    if M > len(rules):
        raise ValueError(f"M={M} exceeds available rules P={len(rules)}")

    nonzero = [j for j in range(len(rules)) if coefs[j] != 0.0]
    nonzero.sort(key=lambda j: (-abs(coefs[j]), j))
    zero = [j for j in range(len(rules)) if coefs[j] == 0.0]
    ranking = (nonzero + zero)[:M]
    padded = len(nonzero) < M

    chosen = tuple(rules[j] for j in ranking)
    union = sorted({f for rule in chosen for f in rule.features})
    return SelectedRuleSet(
        rules=chosen,
        coefficients=np.array([coefs[j] for j in ranking]),
        feature_union=tuple(union),
        padded=padded,
    )
