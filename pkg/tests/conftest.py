import numpy as np
import pytest

from m2n2.data import save_idx_images, save_idx_labels
from m2n2.synth import make_dataset, make_digits


@pytest.fixture(scope="session")
def train_data():
    return make_dataset(2000, 12345)


@pytest.fixture(scope="session")
def test_data():
    return make_dataset(500, 54321)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def idx_dir(tmp_path_factory):
    """Small synthetic dataset written as IDX files."""
    root = tmp_path_factory.mktemp("idx")
    for split, n, seed in (("train", 600, 7), ("test", 200, 8)):
        pixels, labels = make_digits(n, seed)
        save_idx_images(root / f"{split}-images.idx", pixels)
        save_idx_labels(root / f"{split}-labels.idx", labels)
    return root


@pytest.fixture
def base_config(idx_dir):
    """Valid small run-config dict; tests override fields as needed."""
    return {
        "algorithm": "m2n2",
        "mode": "from-scratch",
        "evaluations": 60,
        "seed": 0,
        "archive_size": 6,
        "train_size": 200,
        "test_size": 100,
        "metric_cadence": 20,
        "train_images": str(idx_dir / "train-images.idx"),
        "train_labels": str(idx_dir / "train-labels.idx"),
        "test_images": str(idx_dir / "test-images.idx"),
        "test_labels": str(idx_dir / "test-labels.idx"),
    }
