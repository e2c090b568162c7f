import numpy as np
import pytest

import rulecast as rc
from rulecast.lasso import (
    LogisticModel,
    _fit_with_history,
    binomial_deviance,
    cv_select_lambda,
    default_lambda_grid,
    fit_lasso_logistic,
    fit_lasso_path,
    lambda_max,
    penalized_objective,
    predict_proba,
    select_top_rules,
    smooth_gradient,
)
from rulecast.rules import Condition, Rule


def newton_logistic(X, y, tol=1e-12, max_iter=200):
    """Unpenalized logistic regression by damped Newton iteration (oracle)."""
    Z = np.column_stack([np.ones(len(y)), X])
    theta = np.zeros(Z.shape[1])
    for _ in range(max_iter):
        eta = Z @ theta
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = Z.T @ (p - y)
        H = (Z * (p * (1 - p))[:, None]).T @ Z
        step = np.linalg.solve(H, grad)
        theta -= step
        if np.abs(step).max() < tol:
            break
    return theta[0], theta[1:]


def kkt_violation(X, y, model):
    g = smooth_gradient(X, y, model)
    lam = model.lam
    worst = 0.0
    for j in range(X.shape[1]):
        if model.coefficients[j] == 0.0:
            worst = max(worst, max(0.0, abs(g[j]) - lam))
        else:
            worst = max(worst, abs(g[j] + lam * np.sign(model.coefficients[j])))
    return worst


def logistic_problem(seed, n=60, p=6, informative=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:informative] = rng.uniform(0.5, 1.5, informative) * rng.choice([-1, 1], informative)
    prob = 1.0 / (1.0 + np.exp(-(X @ beta + 0.2)))
    y = (rng.random(n) < prob).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return X, y


class TestFitLassoLogistic:
    def test_lambda_max_gives_exact_zero_model(self):
        X, y = logistic_problem(0)
        lmax = lambda_max(X, y)
        for lam in (lmax, 1.5 * lmax, 10 * lmax):
            m = fit_lasso_logistic(X, y, lam)
            assert np.all(m.coefficients == 0.0)
            ybar = y.mean()
            assert m.intercept == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-12)

    def test_lambda_zero_matches_newton_oracle(self, small_labeled):
        X, y = small_labeled
        m = fit_lasso_logistic(X, y, 0.0)
        b0, coef = newton_logistic(X, y)
        assert abs(m.intercept - b0) < 1e-4
        assert np.abs(m.coefficients - coef).max() < 1e-4

    def test_lambda_zero_matches_newton_multifeature(self):
        X, y = logistic_problem(3, n=120, p=4)
        m = fit_lasso_logistic(X, y, 0.0)
        b0, coef = newton_logistic(X, y)
        assert abs(m.intercept - b0) < 1e-4
        assert np.abs(m.coefficients - coef).max() < 1e-4

    def test_perfect_predictor_column_dominates(self):
        rng = np.random.default_rng(9)
        n = 80
        X = (rng.random((n, 6)) < 0.4).astype(float)
        y = (rng.random(n) < 0.45).astype(float)
        y[0], y[1] = 0.0, 1.0
        X[:, 2] = y  # perfect binary predictor
        lam = 0.3 * lambda_max(X, y)
        m = fit_lasso_logistic(X, y, lam)
        mags = np.abs(m.coefficients)
        assert mags[2] == mags.max() and mags[2] > 0

        # coordinate-wise grid-search oracle: at the solution, no single
        # coefficient can be improved along its own axis
        obj_at = lambda c: penalized_objective(X, y, c, m.intercept, lam)
        base = obj_at(m.coefficients)
        for j in range(6):
            for delta in np.linspace(-0.5, 0.5, 201):
                trial = m.coefficients.copy()
                trial[j] += delta
                assert obj_at(trial) >= base - 1e-6

    def test_kkt_on_random_problems(self):
        worst = 0.0
        for seed in range(20):
            X, y = logistic_problem(seed, n=50, p=8)
            lam = lambda_max(X, y) * 10 ** np.random.default_rng(seed).uniform(-2, 0)
            m = fit_lasso_logistic(X, y, lam)
            worst = max(worst, kkt_violation(X, y, m))
        assert worst < 1e-4

    def test_objective_never_increases(self):
        for seed in (1, 4, 7):
            X, y = logistic_problem(seed)
            lam = 0.2 * lambda_max(X, y)
            _, history = _fit_with_history(X, y, lam)
            diffs = np.diff(history)
            assert np.all(diffs <= 1e-15)

    def test_input_validation(self):
        X, y = logistic_problem(2)
        with pytest.raises(ValueError, match="single-class"):
            fit_lasso_logistic(X, np.zeros(len(y)), 0.1)
        with pytest.raises(ValueError, match="non-finite"):
            bad = X.copy()
            bad[0, 0] = np.nan
            fit_lasso_logistic(bad, y, 0.1)
        with pytest.raises(ValueError, match="lambda"):
            fit_lasso_logistic(X, y, -0.5)
        with pytest.raises(ValueError, match="binary"):
            fit_lasso_logistic(X, y + 0.5, 0.1)

    def test_duplicate_columns_fold_to_first(self):
        X, y = logistic_problem(5, n=70, p=4)
        X[:, 3] = X[:, 1]
        lam = 0.1 * lambda_max(X, y)
        m = fit_lasso_logistic(X, y, lam)
        assert m.coefficients[3] == 0.0
        assert kkt_violation(X, y, m) < 1e-4


class TestLambdaGrid:
    def test_grid_shape_and_range(self):
        X, y = logistic_problem(6)
        grid = default_lambda_grid(X, y, size=50, min_ratio=1e-3)
        assert grid.shape == (50,)
        assert grid[0] == pytest.approx(lambda_max(X, y))
        assert grid[-1] == pytest.approx(lambda_max(X, y) * 1e-3)
        assert np.all(np.diff(grid) < 0)

    def test_monotone_sparsity_along_path(self):
        violations = 0
        comparisons = 0
        for seed in range(8):
            X, y = logistic_problem(seed, n=60, p=12, informative=4)
            grid = default_lambda_grid(X, y, size=30)
            models = fit_lasso_path(X, y, grid)
            nnz = [int((m.coefficients != 0).sum()) for m in models]
            assert nnz[0] == 0  # at lambda_max exactly
            ascending = nnz[::-1]  # increasing lambda
            for a, b in zip(ascending[:-1], ascending[1:]):
                comparisons += 1
                if b > a:
                    violations += 1
        assert violations <= 0.05 * comparisons

    def test_objective_matches_deviance_at_zero_penalty(self):
        X, y = logistic_problem(1)
        m = fit_lasso_logistic(X, y, 0.0)
        dev = binomial_deviance(y, predict_proba(m, X))
        assert dev == pytest.approx(2 * penalized_objective(X, y, m.coefficients, m.intercept, 0.0))


class TestCvSelectLambda:
    def test_single_value_grid(self):
        X, y = logistic_problem(2)
        assert cv_select_lambda(X, y, grid=np.array([0.05]), seed=1) == 0.05

    def test_pure_noise_prefers_upper_half(self):
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            X = rng.normal(size=(60, 15))
            y = (rng.random(60) < 0.5).astype(float)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            grid = default_lambda_grid(X, y, size=20)
            lam = cv_select_lambda(X, y, grid=grid, seed=seed)
            if lam >= grid[len(grid) // 2]:
                hits += 1
        assert hits >= 12

    def test_true_column_survives_selection(self):
        rng = np.random.default_rng(77)
        n = 120
        X = (rng.random((n, 10)) < 0.5).astype(float)
        flip = rng.random(n) < 0.08
        y = np.where(flip, 1 - X[:, 4], X[:, 4])
        lam = cv_select_lambda(X, y, seed=5)
        m = fit_lasso_logistic(X, y, lam)
        assert m.coefficients[4] != 0.0

    def test_grid_validation(self):
        X, y = logistic_problem(3)
        with pytest.raises(ValueError, match="descending"):
            cv_select_lambda(X, y, grid=np.array([0.01, 0.1]))
        with pytest.raises(ValueError, match="empty"):
            cv_select_lambda(X, y, grid=np.array([]))
        with pytest.raises(ValueError, match="folds"):
            cv_select_lambda(X, y, folds=1)

    def test_deterministic_given_seed(self):
        X, y = logistic_problem(8, n=90, p=10)
        assert cv_select_lambda(X, y, seed=3) == cv_select_lambda(X, y, seed=3)


class TestSelectTopRules:
    def rules(self, k):
        return [Rule((Condition(j % 3, "<=", float(j)),), j % 2) for j in range(k)]

    def model(self, coefs):
        return LogisticModel(intercept=0.0, coefficients=np.array(coefs, dtype=float), lam=0.1)

    def test_magnitude_ranking(self):
        sel = select_top_rules(self.model([0.5, -0.9, 0.0, 0.3]), self.rules(4), 2)
        assert np.allclose(sel.coefficients, [-0.9, 0.5])
        assert not sel.padded

    def test_all_zero_pads_by_index(self):
        rules = self.rules(5)
        sel = select_top_rules(self.model([0.0] * 5), rules, 3)
        assert sel.rules == tuple(rules[:3])
        assert sel.padded

    def test_m_equals_p_returns_all_by_magnitude(self):
        sel = select_top_rules(self.model([0.1, -0.4, 0.2]), self.rules(3), 3)
        assert np.allclose(sel.coefficients, [-0.4, 0.2, 0.1])

    def test_m_exceeding_p_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            select_top_rules(self.model([0.1]), self.rules(1), 2)
        with pytest.raises(ValueError, match="M"):
            select_top_rules(self.model([0.1]), self.rules(1), 0)

    def test_tie_prefers_lower_index(self):
        sel = select_top_rules(self.model([0.5, -0.5, 0.5]), self.rules(3), 2)
        rules = self.rules(3)
        assert sel.rules == (rules[0], rules[1])

    def test_feature_union_sorted_unique(self):
        rules = [
            Rule((Condition(4, "<=", 1.0), Condition(1, ">", 0.0)), 1),
            Rule((Condition(1, "<=", 2.0),), 0),
        ]
        sel = select_top_rules(self.model([1.0, -2.0]), rules, 2)
        assert sel.feature_union == (1, 4)

    def test_permutation_invariance_up_to_tiebreak(self):
        rng = np.random.default_rng(12)
        rules = self.rules(6)
        coefs = rng.normal(size=6)
        sel = select_top_rules(self.model(coefs), rules, 3)
        perm = rng.permutation(6)
        sel_p = select_top_rules(self.model(coefs[perm]), [rules[j] for j in perm], 3)
        assert set(sel.rules) == set(sel_p.rules)
