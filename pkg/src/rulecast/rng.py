"""Deterministic random-stream derivation.

Every stochastic component draws from a generator derived from the user seed
plus a fixed integer path (subsystem tag, then indices such as tree number or
repeat number).  Streams are therefore independent of execution order and of
how many worker threads run.
"""
from __future__ import annotations

import numpy as np

# Subsystem tags used as the first element of a derivation path.
TAG_SPLIT_PLAN = 1
TAG_TREE = 2
TAG_LASSO_CV = 3
TAG_CORRECTNESS = 4
TAG_BASELINE = 5


def derived_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for `seed` at a fixed integer path, stable across runs."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def derived_seed(seed: int, *path: int) -> int:
    """Integer child seed for `seed` at a fixed path (for nested components)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return int(np.random.SeedSequence(seed, spawn_key=tuple(path)).generate_state(1)[0])
