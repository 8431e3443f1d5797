"""Experiment orchestration: validated configs, metric traces, persistence.

A run loads IDX data, builds the initial population for the configured
algorithm, executes candidate evaluations sequentially and records a metric
row every ``metric_cadence`` evaluations.  Histories are written as CSV,
final populations as a directory of binary model files plus a JSON manifest.
Runs are bit-reproducible given the same config and seed.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import archive as archive_mod
from . import baselines
from .data import LabeledDataset, load_dataset, subset
from .errors import ConfigError, DataFormatError
from .metrics import best_index, coverage, entropy
from .mlp import DatasetScorer, MlpArch, init_random
from .params import load_params, save_params, slerp

logger = logging.getLogger(__name__)

ALGORITHMS = (
    "m2n2",
    "m2n2-no-attraction",
    "m2n2-no-splitpoint",
    "ga",
    "ga-no-crossover",
    "map-elites",
    "brute-force",
)
MODES = ("from-scratch", "from-pretrained")

HISTORY_HEADER = (
    "step",
    "forward_passes",
    "best_train_fitness",
    "best_train_accuracy",
    "test_accuracy",
    "coverage",
    "entropy",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; rejected up front if any field is invalid."""

    algorithm: str
    mode: str
    evaluations: int
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    seed: int = 0
    archive_size: int = 20
    grid_size: int = 10
    alpha: float = 1.0
    sigma: float = 0.02
    epsilon: float = 1e-9
    hidden_dim: int = 24
    train_size: int | None = None
    test_size: int | None = None
    seed_models: tuple[str, ...] = ()
    warmup_iterations: int = 0
    metric_cadence: int = 100
    capacity_mode: str = "binary-one"
    freeze_capacity: bool = False
    relative_scores: bool = False
    brute_force_step: float = 1e-3
    segments: tuple[tuple[int, int], ...] | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"algorithm", "mode", "evaluations", "train_images", "train_labels",
                   "test_images", "test_labels"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        clean = dict(raw)
        if clean.get("seed_models") is not None:
            clean["seed_models"] = tuple(str(p) for p in clean["seed_models"])
        if clean.get("segments") is not None:
            try:
                clean["segments"] = tuple((int(s), int(e)) for s, e in clean["segments"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"segments must be [start, end] pairs: {exc}") from exc
        config = cls(**clean)
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if not isinstance(self.evaluations, int) or self.evaluations < 0:
            raise ConfigError(f"evaluations={self.evaluations} must be a non-negative integer")
        if self.archive_size < 2:
            raise ConfigError(f"archive_size={self.archive_size} must be at least 2")
        if self.grid_size < 1:
            raise ConfigError(f"grid_size={self.grid_size} must be positive")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha={self.alpha} must be >= 0")
        if self.sigma <= 0.0:
            raise ConfigError(f"sigma={self.sigma} must be positive")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon={self.epsilon} must be positive")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim={self.hidden_dim} must be positive")
        if self.metric_cadence < 1:
            raise ConfigError(f"metric_cadence={self.metric_cadence} must be positive")
        for name in ("train_size", "test_size"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                raise ConfigError(f"{name}={value} must be a positive integer or null")
        if self.capacity_mode not in archive_mod.CAPACITY_MODES:
            raise ConfigError(f"unknown capacity_mode {self.capacity_mode!r}")
        if not 0.0 < self.brute_force_step < 1.0:
            raise ConfigError(f"brute_force_step={self.brute_force_step} outside (0, 1)")
        if self.warmup_iterations < 0:
            raise ConfigError(f"warmup_iterations={self.warmup_iterations} must be >= 0")

        if self.mode == "from-scratch":
            if self.algorithm == "brute-force":
                raise ConfigError("brute-force requires mode=from-pretrained")
            if self.seed_models:
                raise ConfigError("seed_models are only valid with mode=from-pretrained")
            if self.warmup_iterations:
                raise ConfigError("warm-up is only valid with mode=from-pretrained")
        else:
            needed = 2
            if len(self.seed_models) < needed:
                raise ConfigError(
                    f"mode=from-pretrained needs at least {needed} seed_models, got {len(self.seed_models)}"
                )
            if self.algorithm == "brute-force" and len(self.seed_models) != 2:
                raise ConfigError("brute-force takes exactly 2 seed_models")
            if self.algorithm == "ga-no-crossover":
                raise ConfigError(
                    "ga-no-crossover has no variation operator without mutation; "
                    "it is only valid with mode=from-scratch"
                )
            if self.warmup_iterations > self.evaluations:
                raise ConfigError(
                    f"warmup_iterations={self.warmup_iterations} exceeds the evaluation budget"
                )
        if self.segments is not None and self.algorithm == "m2n2-no-splitpoint":
            raise ConfigError("segments are incompatible with m2n2-no-splitpoint")


@dataclass(frozen=True)
class RunRow:
    step: int
    forward_passes: int
    best_train_fitness: float
    best_train_accuracy: float
    test_accuracy: float
    coverage: float
    entropy: float


class RunHistory:
    """Append-only metric trace with a fixed CSV schema."""

    def __init__(self, rows: list[RunRow] | None = None):
        self.rows: list[RunRow] = list(rows) if rows else []

    def append(self, row: RunRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv_string(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for row in self.rows:
            writer.writerow([
                row.step,
                row.forward_passes,
                format(row.best_train_fitness, ".6g"),
                format(row.best_train_accuracy, ".6g"),
                format(row.test_accuracy, ".6g"),
                format(row.coverage, ".6g"),
                format(row.entropy, ".6g"),
            ])
        return out.getvalue()

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_string())

    @classmethod
    def from_csv(cls, path) -> "RunHistory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: empty history file") from None
            if tuple(header) != HISTORY_HEADER:
                raise DataFormatError(f"{path}: unexpected header {header}")
            rows = []
            for record in reader:
                if len(record) != len(HISTORY_HEADER):
                    raise DataFormatError(f"{path}: malformed row {record}")
                rows.append(RunRow(
                    step=int(record[0]),
                    forward_passes=int(record[1]),
                    best_train_fitness=float(record[2]),
                    best_train_accuracy=float(record[3]),
                    test_accuracy=float(record[4]),
                    coverage=float(record[5]),
                    entropy=float(record[6]),
                ))
        return cls(rows)


class _ListPopulation:
    """Minimal population view for methods without an archive container."""

    def __init__(self):
        self._members: list[np.ndarray] = []
        self._scores: list[np.ndarray] = []
        self._inserted_at: list[int] = []

    def set_slot(self, index: int, params: np.ndarray, scores: np.ndarray, step: int) -> None:
        while len(self._members) <= index:
            self._members.append(None)
            self._scores.append(None)
            self._inserted_at.append(-1)
        self._members[index] = np.asarray(params, dtype=np.float64)
        self._scores[index] = np.asarray(scores, dtype=np.float64)
        self._inserted_at[index] = step

    def member(self, i: int) -> np.ndarray:
        return self._members[i]

    def members(self) -> list[np.ndarray]:
        return list(self._members)

    def insertion_steps(self) -> list[int]:
        return list(self._inserted_at)

    def score_matrix(self) -> np.ndarray:
        return np.vstack(self._scores)

    def raw_sums(self) -> np.ndarray:
        return self.score_matrix().sum(axis=1)


def build_population(algorithm: str, train_scorer, *, archive_size: int, grid_size: int,
                     alpha: float, epsilon: float, capacity_mode: str,
                     relative_scores: bool, sigma: float | None, segments):
    """Population container, insertion rule and step function for an algorithm.

    Shared by the file-based runner and the estimator API so both execute the
    same search given the same scorer and random stream.
    """
    if algorithm == "map-elites":
        grid = baselines.EliteGrid(grid_size)

        def insert(params, scores):
            return grid.try_insert(params, scores,
                                   baselines.elites_descriptor(scores, train_scorer.labels))

        step_fn = functools.partial(baselines.elites_step, grid, train_scorer,
                                    use_crossover=True, sigma=sigma, segments=segments)
        return grid, insert, step_fn

    population = archive_mod.Archive(
        archive_size, alpha=alpha, epsilon=epsilon,
        capacity_mode=capacity_mode, relative_scores=relative_scores)
    if algorithm in ("ga", "ga-no-crossover"):
        insert = functools.partial(baselines.ga_try_insert, population)
        step_fn = functools.partial(
            baselines.ga_step, population, train_scorer,
            use_crossover=algorithm == "ga", sigma=sigma, segments=segments)
    elif algorithm in ("m2n2", "m2n2-no-attraction", "m2n2-no-splitpoint"):
        insert = population.try_insert
        step_fn = functools.partial(
            archive_mod.m2n2_step, population, train_scorer,
            sigma=sigma,
            use_attraction=algorithm != "m2n2-no-attraction",
            use_splitpoint=algorithm != "m2n2-no-splitpoint",
            segments=segments)
    else:
        raise ConfigError(f"algorithm {algorithm!r} has no step function")
    return population, insert, step_fn


@dataclass
class RunResult:
    config: RunConfig
    arch: MlpArch
    history: RunHistory
    population: object
    best_params: np.ndarray
    evaluations_done: int
    train_forward_passes: int
    test_forward_passes: int
    extra: dict = field(default_factory=dict)


def _load_split(images_path, labels_path, size, seed_sequence) -> LabeledDataset:
    dataset = load_dataset(images_path, labels_path)
    if size is not None:
        if size > len(dataset):
            raise ConfigError(f"requested subset of {size} but split has {len(dataset)} examples")
        dataset = subset(dataset, size, seed_sequence)
    return dataset


def run_experiment(config: RunConfig, out_dir=None) -> RunResult:
    """Execute one configured run; optionally persist its artifacts."""
    config.validate()
    train_ss, test_ss, run_ss = np.random.SeedSequence(config.seed).spawn(3)
    train = _load_split(config.train_images, config.train_labels, config.train_size, train_ss)
    test = _load_split(config.test_images, config.test_labels, config.test_size, test_ss)
    if len(train) == 0 or len(test) == 0:
        raise DataFormatError("train and test splits must be non-empty")

    arch = MlpArch(hidden_dim=config.hidden_dim)
    if config.segments is not None:
        ends = [e for _, e in config.segments]
        if ends and ends[-1] != arch.param_count:
            raise ConfigError(
                f"segments end at {ends[-1]} but the architecture has {arch.param_count} parameters"
            )
    if config.algorithm == "map-elites":
        odd = train.labels % 2 == 1
        if not odd.any() or odd.all():
            raise ConfigError("map-elites needs both odd and even labels in the training split")

    train_scorer = DatasetScorer(arch, train.images, train.labels)
    test_scorer = DatasetScorer(arch, test.images, test.labels)
    rng = np.random.default_rng(run_ss)
    sigma = config.sigma if config.mode == "from-scratch" else None

    logger.info("run: algorithm=%s mode=%s evaluations=%d train=%d test=%d seed=%d",
                config.algorithm, config.mode, config.evaluations,
                len(train), len(test), config.seed)

    if config.algorithm == "brute-force":
        return _run_brute_force(config, arch, train_scorer, test_scorer, out_dir)

    population, insert, step_fn = build_population(
        config.algorithm, train_scorer,
        archive_size=config.archive_size, grid_size=config.grid_size,
        alpha=config.alpha, epsilon=config.epsilon,
        capacity_mode=config.capacity_mode, relative_scores=config.relative_scores,
        sigma=sigma, segments=config.segments)

    history = RunHistory()
    evaluations_done = 0

    def record(force: bool = False) -> None:
        last_step = history.rows[-1].step if history.rows else None
        if not force and evaluations_done % config.metric_cadence != 0:
            return
        if last_step == evaluations_done:
            return
        raw = population.score_matrix()
        bi = best_index(population)
        if isinstance(population, archive_mod.Archive):
            best_fitness = float(population.fitness_values().max())
        else:
            best_fitness = float(raw.sum(axis=1).max())
        history.append(RunRow(
            step=evaluations_done,
            forward_passes=train_scorer.forward_passes,
            best_train_fitness=best_fitness,
            best_train_accuracy=float(raw[bi].mean()),
            test_accuracy=float(test_scorer.score(population.member(bi)).mean()),
            coverage=coverage(raw),
            entropy=entropy(raw),
        ))

    seeds = None
    if config.mode == "from-scratch":
        for _ in range(config.archive_size):
            candidate = init_random(arch, rng)
            insert(candidate, train_scorer.score(candidate))
    else:
        seeds = []
        for path in config.seed_models:
            params = load_params(path)
            if params.shape[0] != arch.param_count:
                raise ConfigError(
                    f"{path}: {params.shape[0]} parameters, architecture needs {arch.param_count}")
            seeds.append(params)
        for params in seeds:
            insert(params, train_scorer.score(params))
    if config.freeze_capacity and isinstance(population, archive_mod.Archive):
        population.freeze_capacity_now()
    record(force=True)

    if config.mode == "from-pretrained" and config.warmup_iterations:
        def on_child(_report):
            nonlocal evaluations_done
            evaluations_done += 1
            record()
        archive_mod.warmup(population, seeds, config.warmup_iterations, train_scorer, rng,
                           insert=insert, segments=config.segments, on_child=on_child)

    while evaluations_done < config.evaluations:
        step_fn(rng=rng)
        evaluations_done += 1
        record()
    record(force=True)

    bi = best_index(population)
    result = RunResult(
        config=config, arch=arch, history=history, population=population,
        best_params=population.member(bi), evaluations_done=evaluations_done,
        train_forward_passes=train_scorer.forward_passes,
        test_forward_passes=test_scorer.forward_passes,
    )
    if out_dir is not None:
        persist_run(result, out_dir)
    return result


def _run_brute_force(config: RunConfig, arch: MlpArch, train_scorer: DatasetScorer,
                     test_scorer: DatasetScorer, out_dir) -> RunResult:
    seeds = []
    for path in config.seed_models:
        params = load_params(path)
        if params.shape[0] != arch.param_count:
            raise ConfigError(
                f"{path}: {params.shape[0]} parameters, architecture needs {arch.param_count}")
        seeds.append(params)
    seed_a, seed_b = seeds

    population = _ListPopulation()
    population.set_slot(0, seed_a, train_scorer.score(seed_a), step=0)
    population.set_slot(1, seed_b, train_scorer.score(seed_b), step=0)

    history = RunHistory()
    evals = 0

    def record(force: bool = False) -> None:
        if not force and evals % config.metric_cadence != 0:
            return
        if history.rows and history.rows[-1].step == evals:
            return
        raw = population.score_matrix()
        bi = best_index(population)
        history.append(RunRow(
            step=evals,
            forward_passes=train_scorer.forward_passes,
            best_train_fitness=float(raw.sum(axis=1).max()),
            best_train_accuracy=float(raw[bi].mean()),
            test_accuracy=float(test_scorer.score(population.member(bi)).mean()),
            coverage=coverage(raw),
            entropy=entropy(raw),
        ))

    record(force=True)

    best_t = None
    best_acc = -1.0
    for t in baselines.mixing_grid(config.brute_force_step):
        candidate = slerp(seed_a, seed_b, float(t))
        scores = train_scorer.score(candidate)
        evals += 1
        if float(scores.mean()) > best_acc:
            best_acc = float(scores.mean())
            best_t = float(t)
            population.set_slot(2, candidate, scores, evals)
        record()
    record(force=True)

    bi = best_index(population)
    result = RunResult(
        config=config, arch=arch, history=history, population=population,
        best_params=population.member(bi), evaluations_done=evals,
        train_forward_passes=train_scorer.forward_passes,
        test_forward_passes=test_scorer.forward_passes,
        extra={"coefficient": best_t,
               "sweep_train_accuracy": best_acc,
               "sweep_test_accuracy": float(test_scorer.score(population.member(2)).mean())},
    )
    if out_dir is not None:
        persist_run(result, out_dir)
    return result


def persist_run(result: RunResult, out_dir) -> None:
    """Write history.csv, config.json and the final population snapshot."""
    out = Path(out_dir)
    (out / "population").mkdir(parents=True, exist_ok=True)
    result.history.to_csv(out / "history.csv")
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")

    population = result.population
    members = population.members()
    if isinstance(population, archive_mod.Archive):
        fitness_values = population.fitness_values()
    else:
        fitness_values = population.score_matrix().sum(axis=1)
    raw_sums = population.score_matrix().sum(axis=1)
    steps = population.insertion_steps()

    manifest_members = []
    for i, params in enumerate(members):
        filename = f"member_{i:03d}.m2n2"
        save_params(out / "population" / filename, params)
        entry = {
            "file": filename,
            "train_fitness": float(fitness_values[i]),
            "raw_score_sum": float(raw_sums[i]),
            "inserted_at": int(steps[i]),
        }
        if isinstance(population, baselines.EliteGrid):
            entry["cell"] = list(population.cell_of_index(i))
        manifest_members.append(entry)

    manifest = {
        "config_hash": result.config.config_hash(),
        "algorithm": result.config.algorithm,
        "arch": {
            "input_dim": result.arch.input_dim,
            "hidden_dim": result.arch.hidden_dim,
            "output_dim": result.arch.output_dim,
        },
        "evaluations_done": result.evaluations_done,
        "train_forward_passes": result.train_forward_passes,
        "test_forward_passes": result.test_forward_passes,
        "members": manifest_members,
    }
    manifest.update(result.extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def aggregate_histories(paths) -> str:
    """Combine run histories into a mean and standard-error CSV.

    All histories must share the same step column (same cadence and budget).
    The standard error is the sample standard deviation over runs divided by
    sqrt(number of runs); zero for a single run.
    """
    histories = [RunHistory.from_csv(p) for p in paths]
    if not histories:
        raise ValueError("no history files given")
    steps = [row.step for row in histories[0].rows]
    for path, history in zip(paths, histories):
        if [row.step for row in history.rows] != steps:
            raise DataFormatError(f"{path}: step column differs from {paths[0]}")

    metric_names = HISTORY_HEADER[2:]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["step", "forward_passes"]
    for name in metric_names:
        header += [f"{name}_mean", f"{name}_stderr"]
    writer.writerow(header)
    for i, step in enumerate(steps):
        passes = np.array([h.rows[i].forward_passes for h in histories], dtype=np.float64)
        record = [step, format(float(passes.mean()), ".6g")]
        for name in metric_names:
            values = np.array([getattr(h.rows[i], name) for h in histories])
            mean = float(values.mean())
            stderr = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
            record += [format(mean, ".6g"), format(stderr, ".6g")]
        writer.writerow(record)
    return out.getvalue()
