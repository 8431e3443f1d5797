"""Population diagnostics: coverage, prediction entropy, best-member pick."""

from __future__ import annotations

import numpy as np

from .data import LabeledDataset
from .mlp import MlpArch, score_row


def _check_binary(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D score matrix, got shape {scores.shape}")
    if not np.all((scores == 0.0) | (scores == 1.0)):
        raise ValueError("score matrix is not binary")
    return scores


def coverage(scores: np.ndarray) -> float:
    """Fraction of training examples solved by at least one member."""
    scores = _check_binary(scores)
    return float((scores.max(axis=0) == 1.0).mean())


def entropy(scores: np.ndarray) -> float:
    """Mean per-example binary entropy of the population's correctness.

    0 when the members all agree on every example, 1 when they are evenly
    split everywhere.
    """
    scores = _check_binary(scores)
    p = scores.mean(axis=0)
    h = np.zeros_like(p)
    interior = (p > 0.0) & (p < 1.0)
    pi = p[interior]
    h[interior] = -pi * np.log2(pi) - (1.0 - pi) * np.log2(1.0 - pi)
    return float(h.mean())


def best_index(population) -> int:
    """Index of the member with the highest raw training score sum.

    Ties go to the most recently inserted member.  Works for any population
    exposing ``score_matrix()`` and ``insertion_steps()``.
    """
    sums = np.asarray(population.score_matrix()).sum(axis=1)
    ages = np.asarray(population.insertion_steps())
    best = np.flatnonzero(sums == sums.max())
    return int(best[np.argmax(ages[best])])


def best_member(population) -> np.ndarray:
    """Parameters of the best member by raw training score sum."""
    return population.member(best_index(population))


def evaluate_test(params, arch: MlpArch, dataset: LabeledDataset) -> float:
    """Held-out accuracy of one model; never feeds back into evolution."""
    return float(score_row(params, arch, dataset).mean())
