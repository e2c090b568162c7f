"""Shared fixtures: bundled/generated datasets and small synthetic problems."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

import rulecast as rc

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# one line per acceptance criterion, echoed after the run summary so they
# stay visible even with output capture on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _generate_breast_csv(path: Path) -> bool:
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        return False
    b = load_breast_cancer()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(list(b.feature_names) + ["diagnosis"])
        for row, t in zip(b.data, b.target):
            wr.writerow([repr(float(v)) for v in row] + ["M" if t == 0 else "B"])
    return True


@pytest.fixture(scope="session")
def breast_csv() -> Path:
    path = DATA_DIR / "breast.csv"
    if not path.exists() and not _generate_breast_csv(path):
        pytest.skip("breast.csv absent and scikit-learn unavailable to generate it")
    return path


@pytest.fixture(scope="session")
def breast_dataset(breast_csv):
    return rc.impute_mode(rc.load_csv(breast_csv, rc.load_schema("breast")))


def dataset_csv_path(name: str) -> "Path | None":
    path = DATA_DIR / f"{name}.csv"
    return path if path.exists() else None


@pytest.fixture(scope="session")
def synth_clinical():
    """768-sample clinical-style numeric dataset with a learnable signal."""
    rng = np.random.default_rng(7)
    n = 768
    X = np.column_stack([
        rng.poisson(3.8, n),
        rng.normal(120, 32, n),
        rng.normal(69, 19, n),
        rng.normal(20, 16, n),
        rng.normal(80, 115, n),
        rng.normal(32, 7, n),
        rng.gamma(2.0, 0.24, n),
        rng.gamma(3, 11, n),
    ])
    eta = (0.028 * (X[:, 1] - 120) + 0.09 * (X[:, 5] - 32) + 0.022 * (X[:, 7] - 33)
           + 0.6 * (X[:, 6] - 0.47) - 0.85)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
    return rc.dataset_from_arrays(
        X, y, name="synth-clinical",
        feature_names=("preg", "glucose", "bp", "skin", "insulin", "bmi", "pedigree", "age"),
    )


@pytest.fixture(scope="session")
def small_labeled():
    """Tiny separable 1-D problem for solver oracles."""
    X = np.array([[0.1], [0.4], [0.9], [1.4], [2.1], [2.4], [3.0], [3.5]])
    y = np.array([0, 0, 1, 0, 1, 1, 0, 1], dtype=float)
    return X, y
