"""Evolutionary model merging with split-point crossover, resource
competition and attraction-based mate selection."""

from .archive import (
    Archive,
    attraction,
    compute_capacity,
    compute_z,
    fitness,
    m2n2_step,
    relative_score_adjust,
    warmup,
)
from .baselines import (
    BruteForceResult,
    EliteGrid,
    brute_force_mix,
    elites_descriptor,
    elites_step,
    ga_step,
)
from .data import LabeledDataset, filter_digits, load_dataset, subset
from .estimator import MergeEvolutionClassifier, MlpSgdClassifier
from .errors import ConfigError, DataFormatError
from .metrics import best_member, coverage, entropy, evaluate_test
from .mlp import DatasetScorer, MlpArch, SgdConfig, init_random, pretrain_specialist, score_row
from .params import (
    MergeSpec,
    SegmentSpec,
    load_params,
    merge_segments,
    merge_split,
    mutate_gaussian,
    sample_merge_spec,
    save_params,
    slerp,
)
from .runner import RunConfig, RunHistory, aggregate_histories, run_experiment

__version__ = "0.1.0"
