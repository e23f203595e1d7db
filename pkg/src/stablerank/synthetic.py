"""Synthetic score matrices for scale and stress runs."""
from __future__ import annotations

import numpy as np

from .data import ScoreMatrix


def popularity_scores(n_users: int, n_items: int, seed: int = 0, dtype=np.float32) -> ScoreMatrix:
    """Dense scores in (0, 1] skewed toward a few popular items.

    Each score mixes a per-item Zipf-like popularity with per-pair noise, so
    unconstrained top-k lists pile onto the head of the catalog.
    """
    rng = np.random.default_rng(seed)
    popularity = 1.0 / np.arange(1, n_items + 1) ** 0.8
    popularity = rng.permutation(popularity).astype(dtype)
    values = rng.random((n_users, n_items), dtype=np.float32).astype(dtype, copy=False)
    values *= 0.5
    values += 0.5 * popularity[None, :]
    return ScoreMatrix(values, np.ones((n_users, n_items), dtype=bool))
