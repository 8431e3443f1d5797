"""Fixed-capacity model archive with resource-competition fitness.

Every training example is a resource with capacity ``c_j``; the fitness a
member extracts from example ``j`` is ``s_ij * c_j / (z_j^alpha + eps)``
where ``z_j`` sums the population's scores on that example.  ``alpha=0``
turns competition off (fitness is proportional to the raw score sum),
``alpha=1`` caps the total fitness an example can hand out at ``c_j``.
Parents are drawn fitness-proportionally, the mate by an attraction score
that favours models strong exactly where the first parent is weak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import (
    MergeSpec,
    merge,
    merge_split,
    mutate_gaussian,
    sample_merge_spec,
    slerp,
)

CAPACITY_MODES = ("binary-one", "population-max")


def compute_z(scores: np.ndarray) -> np.ndarray:
    """Per-example score totals over the population (column sums)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D score matrix, got shape {scores.shape}")
    return scores.sum(axis=0)


def compute_capacity(scores: np.ndarray, mode: str) -> np.ndarray:
    """Capacity per example: all ones, or the population's best score."""
    if mode not in CAPACITY_MODES:
        raise ValueError(f"unknown capacity mode {mode!r}, expected one of {CAPACITY_MODES}")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D score matrix, got shape {scores.shape}")
    if mode == "binary-one":
        return np.ones(scores.shape[1])
    return scores.max(axis=0)


def fitness(scores: np.ndarray, capacity: np.ndarray, alpha: float,
            epsilon: float) -> np.ndarray:
    """Competition fitness of every member of a score matrix."""
    if alpha < 0.0:
        raise ValueError(f"competition intensity alpha={alpha} must be >= 0")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon={epsilon} must be positive")
    scores = np.asarray(scores, dtype=np.float64)
    z = compute_z(scores)
    weights = np.asarray(capacity, dtype=np.float64) / (z**alpha + epsilon)
    return scores @ weights


def relative_score_adjust(scores: np.ndarray) -> np.ndarray:
    """Subtract each column's population minimum (continuous-score sharpening)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D score matrix, got shape {scores.shape}")
    return scores - scores.min(axis=0, keepdims=True)


def attraction(scores_a: np.ndarray, scores_b: np.ndarray, z: np.ndarray,
               capacity: np.ndarray, epsilon: float) -> float:
    """How much candidate mate B compensates parent A's weaknesses.

    Sums ``c_j / (z_j + eps) * max(s_B(j) - s_A(j), 0)``: B earns credit only
    on examples where it beats A, weighted toward uncontested capacity.
    """
    scores_a = np.asarray(scores_a, dtype=np.float64)
    scores_b = np.asarray(scores_b, dtype=np.float64)
    if scores_a.shape != scores_b.shape:
        raise ValueError(f"score shapes differ: {scores_a.shape} vs {scores_b.shape}")
    weights = np.asarray(capacity, dtype=np.float64) / (np.asarray(z, dtype=np.float64) + epsilon)
    return float(np.sum(weights * np.maximum(scores_b - scores_a, 0.0)))


def _sample_proportional(rng: np.random.Generator, weights: np.ndarray,
                         exclude: int | None = None) -> int:
    """Draw an index with probability proportional to ``weights``.

    Zero (or fully excluded) total mass falls back to a uniform draw, which
    keeps sampling well defined for archives of clones or all-zero scores.
    """
    weights = np.asarray(weights, dtype=np.float64).copy()
    if exclude is not None:
        weights[exclude] = 0.0
    total = weights.sum()
    if total <= 0.0:
        candidates = np.arange(weights.shape[0])
        if exclude is not None:
            candidates = candidates[candidates != exclude]
        return int(rng.choice(candidates))
    return int(rng.choice(weights.shape[0], p=weights / total))


@dataclass(frozen=True)
class InsertionReport:
    inserted: bool
    evicted: int | None
    candidate_fitness: float


@dataclass(frozen=True)
class StepReport:
    candidate_fitness: float
    inserted: bool
    evicted: int | None
    forward_passes: int
    parents: tuple[int, int] | None = None


class Archive:
    """Up to ``capacity`` parameter vectors with cached per-example scores.

    Below capacity, candidates are inserted unconditionally (fill phase).
    Once full, insertion evaluates competition fitness over the hypothetical
    population of all members plus the candidate and evicts the minimum;
    ties evict the oldest member, so a candidate that merely matches the
    incumbent worst still enters.
    """

    def __init__(self, capacity: int, *, alpha: float = 1.0, epsilon: float = 1e-9,
                 capacity_mode: str = "binary-one", relative_scores: bool = False):
        if capacity < 1:
            raise ValueError(f"archive capacity {capacity} must be positive")
        if alpha < 0.0:
            raise ValueError(f"competition intensity alpha={alpha} must be >= 0")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon={epsilon} must be positive")
        if capacity_mode not in CAPACITY_MODES:
            raise ValueError(f"unknown capacity mode {capacity_mode!r}")
        self.capacity = capacity
        self.alpha = alpha
        self.epsilon = epsilon
        self.capacity_mode = capacity_mode
        self.relative_scores = relative_scores
        self._members: list[np.ndarray] = []
        self._scores: list[np.ndarray] = []
        self._inserted_at: list[int] = []
        self._counter = 0
        self._frozen_capacity: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._members)

    @property
    def is_full(self) -> bool:
        return len(self._members) >= self.capacity

    def member(self, i: int) -> np.ndarray:
        return self._members[i]

    def members(self) -> list[np.ndarray]:
        return list(self._members)

    def insertion_steps(self) -> list[int]:
        return list(self._inserted_at)

    def score_matrix(self) -> np.ndarray:
        if not self._members:
            raise ValueError("archive is empty")
        return np.vstack(self._scores)

    def _effective(self, matrix: np.ndarray) -> np.ndarray:
        return relative_score_adjust(matrix) if self.relative_scores else matrix

    def _capacity_for(self, effective: np.ndarray) -> np.ndarray:
        if self._frozen_capacity is not None:
            return self._frozen_capacity
        return compute_capacity(effective, self.capacity_mode)

    def freeze_capacity_now(self) -> None:
        """Pin the capacity vector to the current population's values."""
        self._frozen_capacity = self._capacity_for(self._effective(self.score_matrix())).copy()

    def z_values(self) -> np.ndarray:
        return compute_z(self._effective(self.score_matrix()))

    def capacity_vector(self) -> np.ndarray:
        return self._capacity_for(self._effective(self.score_matrix()))

    def fitness_values(self) -> np.ndarray:
        effective = self._effective(self.score_matrix())
        return fitness(effective, self._capacity_for(effective), self.alpha, self.epsilon)

    def raw_sums(self) -> np.ndarray:
        return self.score_matrix().sum(axis=1)

    def _check_candidate(self, params: np.ndarray, scores: np.ndarray):
        params = np.asarray(params, dtype=np.float64)
        scores = np.asarray(scores, dtype=np.float64)
        if params.ndim != 1:
            raise ValueError(f"candidate parameters must be 1-D, got shape {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("candidate parameters contain non-finite entries")
        if self._members:
            if params.shape != self._members[0].shape:
                raise ValueError(
                    f"candidate dimension {params.shape[0]} != {self._members[0].shape[0]}"
                )
            if scores.shape != self._scores[0].shape:
                raise ValueError(
                    f"candidate scored on {scores.shape[0]} examples, archive has {self._scores[0].shape[0]}"
                )
        return params, scores

    def insert(self, params: np.ndarray, scores: np.ndarray) -> int:
        """Unconditional insert while below capacity; returns the new index."""
        if self.is_full:
            raise ValueError("archive is full; use try_insert")
        params, scores = self._check_candidate(params, scores)
        self._members.append(params)
        self._scores.append(scores)
        self._inserted_at.append(self._counter)
        self._counter += 1
        return len(self._members) - 1

    def replace(self, index: int, params: np.ndarray, scores: np.ndarray) -> None:
        """Swap out one member; the replacement becomes the newest."""
        params, scores = self._check_candidate(params, scores)
        self._members[index] = params
        self._scores[index] = scores
        self._inserted_at[index] = self._counter
        self._counter += 1

    def try_insert(self, params: np.ndarray, scores: np.ndarray) -> InsertionReport:
        """Admit the candidate if it survives competition with the members.

        The hypothetical population of all members plus the candidate is
        scored with the archive's fitness rule; the minimum-fitness model is
        evicted (ties evict the oldest).  The candidate is rejected exactly
        when it is itself the evicted one.
        """
        params, scores = self._check_candidate(params, scores)
        if not self.is_full:
            index = self.insert(params, scores)
            return InsertionReport(
                inserted=True, evicted=None,
                candidate_fitness=float(self.fitness_values()[index]),
            )
        pool = np.vstack(self._scores + [scores])
        effective = self._effective(pool)
        cap = self._frozen_capacity
        if cap is None:
            cap = compute_capacity(effective, self.capacity_mode)
        pool_fitness = fitness(effective, cap, self.alpha, self.epsilon)
        ages = np.array(self._inserted_at + [self._counter])
        minima = np.flatnonzero(pool_fitness == pool_fitness.min())
        evict = int(minima[np.argmin(ages[minima])])
        candidate_fitness = float(pool_fitness[-1])
        if evict == len(self._members):
            return InsertionReport(inserted=False, evicted=None,
                                   candidate_fitness=candidate_fitness)
        self.replace(evict, params, scores)
        return InsertionReport(inserted=True, evicted=evict,
                               candidate_fitness=candidate_fitness)

    def sample_parents(self, rng: np.random.Generator, *,
                       use_attraction: bool = True) -> tuple[int, int]:
        """Fitness-proportional parent, then an attraction-weighted mate.

        With ``use_attraction=False`` the mate is drawn fitness-proportionally
        as well.  The mate never equals the parent; all-zero weight mass falls
        back to a uniform draw over the remaining members.
        """
        if len(self._members) < 2:
            raise ValueError("parent sampling needs at least 2 members")
        fit = self.fitness_values()
        first = _sample_proportional(rng, fit)
        if not use_attraction:
            return first, _sample_proportional(rng, fit, exclude=first)
        effective = self._effective(self.score_matrix())
        z = compute_z(effective)
        cap = self._capacity_for(effective)
        weights = cap / (z + self.epsilon)
        gains = np.maximum(effective - effective[first], 0.0)
        attractions = gains @ weights
        return first, _sample_proportional(rng, attractions, exclude=first)


def warmup(archive: Archive, seeds, iterations: int, scorer, rng: np.random.Generator,
           *, insert=None, segments=None, on_child=None) -> list[InsertionReport]:
    """Populate an archive by merging random pairs of seed models.

    Parents are always drawn from ``seeds`` (never from earlier children).
    ``insert`` overrides the insertion rule, e.g. for a raw-score baseline
    population; the default is the archive's competition rule.  ``on_child``
    is called with each insertion report, for progress tracking.
    """
    if len(seeds) < 2:
        raise ValueError("warm-up needs at least 2 seed models")
    if iterations < 0:
        raise ValueError("warm-up iterations must be >= 0")
    if insert is None:
        insert = archive.try_insert
    dim = np.asarray(seeds[0]).shape[0]
    reports = []
    for _ in range(iterations):
        i, j = rng.choice(len(seeds), size=2, replace=False)
        spec = sample_merge_spec(rng, dim, segments)
        child = merge(np.asarray(seeds[i]), np.asarray(seeds[j]), spec)
        report = insert(child, scorer.score(child))
        reports.append(report)
        if on_child is not None:
            on_child(report)
    return reports


def m2n2_step(archive: Archive, scorer, rng: np.random.Generator, *,
              sigma: float | None = None, use_attraction: bool = True,
              use_splitpoint: bool = True, segments=None) -> StepReport:
    """One evolution step: sample parents, merge, optionally mutate, compete.

    ``sigma`` enables Gaussian mutation of the child (from-scratch mode);
    ``use_splitpoint=False`` replaces the split-point merge with a plain
    whole-vector interpolation at a random ratio.
    """
    a_idx, b_idx = archive.sample_parents(rng, use_attraction=use_attraction)
    a = archive.member(a_idx)
    b = archive.member(b_idx)
    if segments is not None:
        child = merge(a, b, sample_merge_spec(rng, a.shape[0], segments))
    elif use_splitpoint:
        child = merge_split(a, b, sample_merge_spec(rng, a.shape[0]))
    else:
        child = slerp(a, b, float(rng.uniform(0.0, 1.0)))
    if sigma is not None:
        child = mutate_gaussian(child, sigma, rng)
    scores = scorer.score(child)
    report = archive.try_insert(child, scores)
    return StepReport(
        candidate_fitness=report.candidate_fitness,
        inserted=report.inserted,
        evicted=report.evicted,
        forward_passes=scores.shape[0],
        parents=(a_idx, b_idx),
    )
