"""Baseline search methods: GA, MAP-Elites and the brute-force mixing sweep.

The GA shares the archive container and merge/mutation operators but selects
and replaces purely by raw score sums.  MAP-Elites keeps one elite per cell
of an odd/even-accuracy grid.  The brute-force baseline sweeps a single
whole-vector interpolation coefficient between two seed models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import Archive, InsertionReport, StepReport, _sample_proportional
from .params import merge, merge_split, mutate_gaussian, sample_merge_spec, slerp


def ga_try_insert(archive: Archive, params: np.ndarray, scores: np.ndarray) -> InsertionReport:
    """Replace the worst-raw-sum member iff the candidate is strictly better.

    Fill phase inserts unconditionally; among equal worst members the oldest
    is the one replaced.
    """
    params, scores = archive._check_candidate(params, scores)
    candidate_sum = float(scores.sum())
    if not archive.is_full:
        archive.insert(params, scores)
        return InsertionReport(inserted=True, evicted=None, candidate_fitness=candidate_sum)
    sums = archive.raw_sums()
    ages = np.asarray(archive.insertion_steps())
    minima = np.flatnonzero(sums == sums.min())
    worst = int(minima[np.argmin(ages[minima])])
    if candidate_sum > sums[worst]:
        archive.replace(worst, params, scores)
        return InsertionReport(inserted=True, evicted=worst, candidate_fitness=candidate_sum)
    return InsertionReport(inserted=False, evicted=None, candidate_fitness=candidate_sum)


def ga_step(archive: Archive, scorer, rng: np.random.Generator, *,
            use_crossover: bool = True, sigma: float | None = None,
            segments=None) -> StepReport:
    """One GA step: raw-sum-proportional parents, merge and/or mutate, insert.

    Without crossover a single parent is sampled and mutated, so ``sigma``
    is required in that mode.
    """
    if len(archive) < (2 if use_crossover else 1):
        raise ValueError("GA step needs at least 2 members with crossover, 1 without")
    sums = archive.raw_sums()
    a_idx = _sample_proportional(rng, sums)
    if use_crossover:
        b_idx = _sample_proportional(rng, sums, exclude=a_idx)
        a = archive.member(a_idx)
        spec = sample_merge_spec(rng, a.shape[0], segments)
        child = merge(a, archive.member(b_idx), spec)
        parents = (a_idx, b_idx)
    else:
        if sigma is None:
            raise ValueError("GA without crossover requires a mutation sigma")
        child = archive.member(a_idx).copy()
        parents = (a_idx, a_idx)
    if sigma is not None:
        child = mutate_gaussian(child, sigma, rng)
    scores = scorer.score(child)
    report = ga_try_insert(archive, child, scores)
    return StepReport(
        candidate_fitness=report.candidate_fitness,
        inserted=report.inserted,
        evicted=report.evicted,
        forward_passes=scores.shape[0],
        parents=parents,
    )


def elites_descriptor(score_vector: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Mean score over odd-labeled and even-labeled examples."""
    score_vector = np.asarray(score_vector, dtype=np.float64)
    labels = np.asarray(labels)
    if score_vector.shape != labels.shape:
        raise ValueError(f"scores shape {score_vector.shape} != labels shape {labels.shape}")
    odd = labels % 2 == 1
    if not odd.any() or odd.all():
        raise ValueError("descriptor needs both odd and even labels in the dataset")
    return float(score_vector[odd].mean()), float(score_vector[~odd].mean())


@dataclass
class _Elite:
    params: np.ndarray
    scores: np.ndarray
    raw_sum: float
    inserted_at: int


class EliteGrid:
    """G x G grid keyed by (odd accuracy, even accuracy) bins.

    Cells hold the best raw-score-sum model ever offered; bin edges are
    uniform on [0, 1] with the upper edge closed (accuracy 1.0 maps to the
    last bin).
    """

    def __init__(self, grid_size: int = 10):
        if grid_size < 1:
            raise ValueError(f"grid size {grid_size} must be positive")
        self.grid_size = grid_size
        self._cells: dict[tuple[int, int], _Elite] = {}
        self._counter = 0

    def __len__(self) -> int:
        return len(self._cells)

    def bin_of(self, descriptor: tuple[float, float]) -> tuple[int, int]:
        return tuple(
            min(int(np.floor(d * self.grid_size)), self.grid_size - 1) for d in descriptor
        )

    def occupied_cells(self) -> list[tuple[int, int]]:
        return sorted(self._cells)

    def member(self, i: int) -> np.ndarray:
        return self._cells[self.occupied_cells()[i]].params

    def members(self) -> list[np.ndarray]:
        return [self._cells[c].params for c in self.occupied_cells()]

    def insertion_steps(self) -> list[int]:
        return [self._cells[c].inserted_at for c in self.occupied_cells()]

    def cell_of_index(self, i: int) -> tuple[int, int]:
        return self.occupied_cells()[i]

    def score_matrix(self) -> np.ndarray:
        if not self._cells:
            raise ValueError("grid is empty")
        return np.vstack([self._cells[c].scores for c in self.occupied_cells()])

    def raw_sums(self) -> np.ndarray:
        return np.array([self._cells[c].raw_sum for c in self.occupied_cells()])

    def try_insert(self, params: np.ndarray, scores: np.ndarray,
                   descriptor: tuple[float, float]) -> InsertionReport:
        """Occupy an empty cell, or displace a strictly worse occupant."""
        scores = np.asarray(scores, dtype=np.float64)
        raw_sum = float(scores.sum())
        key = self.bin_of(descriptor)
        occupant = self._cells.get(key)
        if occupant is None or raw_sum > occupant.raw_sum:
            self._cells[key] = _Elite(
                params=np.asarray(params, dtype=np.float64),
                scores=scores, raw_sum=raw_sum, inserted_at=self._counter,
            )
            self._counter += 1
            return InsertionReport(inserted=True, evicted=None, candidate_fitness=raw_sum)
        return InsertionReport(inserted=False, evicted=None, candidate_fitness=raw_sum)


def elites_step(grid: EliteGrid, scorer, rng: np.random.Generator, *,
                use_crossover: bool = True, sigma: float | None = None,
                segments=None) -> StepReport:
    """One MAP-Elites step: uniform parents over occupied cells, same operators.

    With a single occupied cell the crossover degenerates to a self-merge.
    The child lands in the cell of its own descriptors and must strictly beat
    the occupant's raw sum.
    """
    cells = grid.occupied_cells()
    if not cells:
        raise ValueError("MAP-Elites step needs at least one occupied cell")
    a_idx = int(rng.integers(len(cells)))
    a = grid.member(a_idx)
    if use_crossover:
        if len(cells) > 1:
            b_idx = int(rng.integers(len(cells) - 1))
            if b_idx >= a_idx:
                b_idx += 1
        else:
            b_idx = a_idx
        spec = sample_merge_spec(rng, a.shape[0], segments)
        child = merge(a, grid.member(b_idx), spec)
        parents = (a_idx, b_idx)
    else:
        child = a.copy()
        parents = (a_idx, a_idx)
    if sigma is not None:
        child = mutate_gaussian(child, sigma, rng)
    scores = scorer.score(child)
    descriptor = elites_descriptor(scores, scorer.labels)
    report = grid.try_insert(child, scores, descriptor)
    return StepReport(
        candidate_fitness=report.candidate_fitness,
        inserted=report.inserted,
        evicted=report.evicted,
        forward_passes=scores.shape[0],
        parents=parents,
    )


@dataclass(frozen=True)
class BruteForceResult:
    coefficient: float
    train_accuracy: float
    test_accuracy: float
    evaluations: int


def mixing_grid(step: float) -> np.ndarray:
    """Coefficients 0, step, 2*step, ... plus the endpoint 1."""
    if not 0.0 < step < 1.0:
        raise ValueError(f"step {step} outside (0, 1)")
    ts = np.arange(0.0, 1.0, step)
    if 1.0 - ts[-1] > step * 1e-9:
        ts = np.append(ts, 1.0)
    else:
        ts[-1] = 1.0
    return ts


def brute_force_mix(seed_a: np.ndarray, seed_b: np.ndarray, step: float,
                    train_scorer, test_scorer, on_step=None) -> BruteForceResult:
    """Sweep a single whole-vector interpolation coefficient.

    Picks the coefficient with the best training accuracy (ties to the
    smallest) and evaluates only that one on the test scorer.  ``on_step(k,
    t, train_accuracy)`` is called after each coefficient for progress
    tracking.
    """
    seed_a = np.asarray(seed_a, dtype=np.float64)
    seed_b = np.asarray(seed_b, dtype=np.float64)
    ts = mixing_grid(step)
    best_t = None
    best_acc = -1.0
    for k, t in enumerate(ts):
        candidate = slerp(seed_a, seed_b, float(t))
        acc = float(train_scorer.score(candidate).mean())
        if acc > best_acc:
            best_acc = acc
            best_t = float(t)
        if on_step is not None:
            on_step(k, float(t), acc)
    best_model = slerp(seed_a, seed_b, best_t)
    test_acc = float(test_scorer.score(best_model).mean())
    return BruteForceResult(
        coefficient=best_t,
        train_accuracy=best_acc,
        test_accuracy=test_acc,
        evaluations=ts.shape[0],
    )
