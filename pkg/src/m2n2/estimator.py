"""scikit-learn estimators wrapping the evolutionary search and SGD trainer.

``MergeEvolutionClassifier`` treats the whole evolutionary run as ``fit``:
it evolves an archive of small MLPs on the training data and predicts with
the best member by raw training score.  ``MlpSgdClassifier`` is the plain
gradient-trained counterpart, handy for producing the specialist seed models
that merging starts from.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import archive as archive_mod
from .metrics import best_index, coverage, entropy
from .mlp import DatasetScorer, MlpArch, SgdConfig, init_random, logits_batch, sgd_train
from .runner import build_population


def _encode_labels(y):
    classes, encoded = np.unique(y, return_inverse=True)
    if classes.shape[0] < 2:
        raise ValueError("classifier needs at least 2 classes in y")
    return classes, encoded


class MergeEvolutionClassifier(ClassifierMixin, BaseEstimator):
    """MLP classifier fitted by merge-based evolutionary search.

    Parameters mirror the run configuration: ``algorithm`` picks the search
    variant (``m2n2``, its ablations, ``ga``, ``ga-no-crossover`` or
    ``map-elites``), ``evaluations`` is the number of candidates scored and
    ``alpha`` the competition intensity.  Passing ``seed_models`` (flat
    parameter vectors of matching architecture) switches from random
    initialization to merging pre-trained models, in which case mutation is
    disabled and ``warmup_iterations`` random seed merges pre-populate the
    archive.
    """

    def __init__(self, algorithm="m2n2", evaluations=2000, archive_size=20,
                 grid_size=10, alpha=1.0, sigma=0.02, epsilon=1e-9,
                 hidden_dim=24, capacity_mode="binary-one",
                 relative_scores=False, freeze_capacity=False,
                 warmup_iterations=0, seed_models=None, history_cadence=100,
                 random_state=None):
        self.algorithm = algorithm
        self.evaluations = evaluations
        self.archive_size = archive_size
        self.grid_size = grid_size
        self.alpha = alpha
        self.sigma = sigma
        self.epsilon = epsilon
        self.hidden_dim = hidden_dim
        self.capacity_mode = capacity_mode
        self.relative_scores = relative_scores
        self.freeze_capacity = freeze_capacity
        self.warmup_iterations = warmup_iterations
        self.seed_models = seed_models
        self.history_cadence = history_cadence
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.evaluations < 0:
            raise ValueError(f"evaluations={self.evaluations} must be >= 0")
        self.classes_, encoded = _encode_labels(y)
        self.n_features_in_ = X.shape[1]
        arch = MlpArch(input_dim=X.shape[1], hidden_dim=self.hidden_dim,
                       output_dim=self.classes_.shape[0])

        from_pretrained = self.seed_models is not None
        if from_pretrained:
            seeds = [np.asarray(s, dtype=np.float64).ravel() for s in self.seed_models]
            if len(seeds) < 2:
                raise ValueError("seed_models needs at least 2 models")
            for seed in seeds:
                if seed.shape[0] != arch.param_count:
                    raise ValueError(
                        f"seed model has {seed.shape[0]} parameters, arch needs {arch.param_count}")
        if self.algorithm == "map-elites":
            parity = encoded % 2 == 1
            if not parity.any() or parity.all():
                raise ValueError("map-elites needs both odd and even encoded classes")

        scorer = DatasetScorer(arch, X, encoded)
        rng = np.random.default_rng(self.random_state)
        sigma = None if from_pretrained else self.sigma
        population, insert, step_fn = build_population(
            self.algorithm, scorer,
            archive_size=self.archive_size, grid_size=self.grid_size,
            alpha=self.alpha, epsilon=self.epsilon,
            capacity_mode=self.capacity_mode, relative_scores=self.relative_scores,
            sigma=sigma, segments=None)

        history: list[dict] = []
        done = 0

        def record(force=False):
            if not force and done % self.history_cadence != 0:
                return
            if history and history[-1]["step"] == done:
                return
            raw = population.score_matrix()
            history.append({
                "step": done,
                "best_train_accuracy": float(raw.sum(axis=1).max()) / raw.shape[1],
                "coverage": coverage(raw),
                "entropy": entropy(raw),
            })

        if from_pretrained:
            for seed in seeds:
                insert(seed, scorer.score(seed))
        else:
            for _ in range(self.archive_size):
                candidate = init_random(arch, rng)
                insert(candidate, scorer.score(candidate))
        if self.freeze_capacity and isinstance(population, archive_mod.Archive):
            population.freeze_capacity_now()
        record(force=True)

        if from_pretrained and self.warmup_iterations:
            def on_child(_report):
                nonlocal done
                done += 1
                record()
            iterations = min(self.warmup_iterations, self.evaluations)
            archive_mod.warmup(population, seeds, iterations, scorer, rng,
                               insert=insert, on_child=on_child)

        while done < self.evaluations:
            step_fn(rng=rng)
            done += 1
            record()
        record(force=True)

        self.arch_ = arch
        self.population_ = population
        self.best_params_ = population.member(best_index(population))
        self.history_ = history
        self.n_iter_ = done
        return self

    def decision_function(self, X):
        check_is_fitted(self, "best_params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return logits_batch(self.best_params_, self.arch_, X.astype(np.float64))

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=1)]

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)


class MlpSgdClassifier(ClassifierMixin, BaseEstimator):
    """The same two-layer MLP trained by mini-batch SGD on cross-entropy.

    Fitting exposes the flat weight vector as ``params_``, which plugs
    directly into :class:`MergeEvolutionClassifier` as a seed model.  Pass
    ``classes`` to train a specialist: the output layer then covers the full
    label space even when ``y`` only contains a subset (the merging workflow
    needs all seed models to share one architecture).
    """

    def __init__(self, hidden_dim=24, learning_rate=0.1, epochs=5,
                 batch_size=32, classes=None, random_state=0):
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.classes = classes
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.classes is not None:
            self.classes_ = np.unique(np.asarray(self.classes))
            if self.classes_.shape[0] < 2:
                raise ValueError("classes needs at least 2 entries")
            if not np.isin(y, self.classes_).all():
                raise ValueError("y contains labels outside the declared classes")
            encoded = np.searchsorted(self.classes_, y)
        else:
            self.classes_, encoded = _encode_labels(y)
        self.n_features_in_ = X.shape[1]
        self.arch_ = MlpArch(input_dim=X.shape[1], hidden_dim=self.hidden_dim,
                             output_dim=self.classes_.shape[0])
        config = SgdConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size,
                           seed=0 if self.random_state is None else self.random_state)
        self.params_ = sgd_train(X, encoded, self.arch_, config)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return logits_batch(self.params_, self.arch_, X.astype(np.float64))

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=1)]

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)
