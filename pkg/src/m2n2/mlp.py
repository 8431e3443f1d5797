"""Two-layer MLP classifier on flat parameter vectors, scoring and SGD.

The network is ``logits = W2 @ relu(W1 @ x + b1) + b2``.  Parameters flatten
in a fixed order: layer-1 weights row-major, layer-1 biases, layer-2 weights
row-major, layer-2 biases.  Scoring is binary per example (predicted label
equals the true label) with argmax ties broken toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, filter_digits


@dataclass(frozen=True)
class MlpArch:
    input_dim: int = 784
    hidden_dim: int = 24
    output_dim: int = 10

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ValueError("all layer sizes must be positive")

    @property
    def param_count(self) -> int:
        return (self.input_dim + 1) * self.hidden_dim + (self.hidden_dim + 1) * self.output_dim

    def split(self, params: np.ndarray):
        """View a flat vector as ``(W1, b1, W2, b2)`` without copying."""
        if params.ndim != 1 or params.shape[0] != self.param_count:
            raise ValueError(
                f"parameter vector has {params.shape} entries, arch needs {self.param_count}"
            )
        h, d, c = self.hidden_dim, self.input_dim, self.output_dim
        o1 = h * d
        o2 = o1 + h
        o3 = o2 + c * h
        w1 = params[:o1].reshape(h, d)
        b1 = params[o1:o2]
        w2 = params[o2:o3].reshape(c, h)
        b2 = params[o3:]
        return w1, b1, w2, b2

    def flatten(self, w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([np.ravel(w1), np.ravel(b1), np.ravel(w2), np.ravel(b2)])

    @classmethod
    def infer(cls, param_count: int, input_dim: int = 784, output_dim: int = 10) -> "MlpArch":
        """Recover the hidden size from a flat vector length."""
        hidden, rem = divmod(param_count - output_dim, input_dim + 1 + output_dim)
        if rem != 0 or hidden < 1:
            raise ValueError(
                f"no {input_dim}->h->{output_dim} architecture has {param_count} parameters"
            )
        return cls(input_dim=input_dim, hidden_dim=hidden, output_dim=output_dim)


def init_random(arch: MlpArch, rng: np.random.Generator) -> np.ndarray:
    """Weights ~ Normal(0, 1/fan_in) per layer, biases exactly zero."""
    w1 = rng.normal(0.0, 1.0 / np.sqrt(arch.input_dim), size=(arch.hidden_dim, arch.input_dim))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(arch.hidden_dim), size=(arch.output_dim, arch.hidden_dim))
    b1 = np.zeros(arch.hidden_dim)
    b2 = np.zeros(arch.output_dim)
    return arch.flatten(w1, b1, w2, b2)


def logits_batch(params: np.ndarray, arch: MlpArch, images: np.ndarray) -> np.ndarray:
    """Forward pass for a batch of images, in the dtype of ``images``."""
    w1, b1, w2, b2 = arch.split(np.asarray(params, dtype=images.dtype))
    hidden = images @ w1.T + b1
    np.maximum(hidden, 0.0, out=hidden)
    return hidden @ w2.T + b2


def forward(params, arch: MlpArch, image) -> tuple[int, np.ndarray]:
    """Predicted label and logits for a single image."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (arch.input_dim,):
        raise ValueError(f"image shape {image.shape}, expected ({arch.input_dim},)")
    logits = logits_batch(np.asarray(params, dtype=np.float64), arch, image[None, :])[0]
    return int(np.argmax(logits)), logits


def score_row(params, arch: MlpArch, dataset: LabeledDataset) -> np.ndarray:
    """Binary per-example scores: 1 where argmax(logits) equals the label."""
    logits = logits_batch(np.asarray(params), arch, dataset.images)
    return (logits.argmax(axis=1) == dataset.labels).astype(np.float64)


def accuracy(params, arch: MlpArch, dataset: LabeledDataset) -> float:
    return float(score_row(params, arch, dataset).mean())


class DatasetScorer:
    """Caches an image/label split for repeated scoring and counts passes.

    One forward pass is counted per example scored, which is the accounting
    unit run histories report.  Images are cached as float32, the dtype the
    scoring matmul runs in.
    """

    def __init__(self, arch: MlpArch, images: np.ndarray, labels: np.ndarray):
        self.arch = arch
        self.labels = np.asarray(labels)
        self._images = np.ascontiguousarray(images, dtype=np.float32)
        if self._images.ndim != 2 or self._images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"images shape {self._images.shape} does not match {self.labels.shape[0]} labels"
            )
        self.forward_passes = 0

    @classmethod
    def from_dataset(cls, arch: MlpArch, dataset: LabeledDataset) -> "DatasetScorer":
        return cls(arch, dataset.images, dataset.labels)

    @property
    def n_examples(self) -> int:
        return self._images.shape[0]

    def score(self, params: np.ndarray) -> np.ndarray:
        logits = logits_batch(params, self.arch, self._images)
        self.forward_passes += self.n_examples
        return (logits.argmax(axis=1) == self.labels).astype(np.float64)

    def accuracy(self, params: np.ndarray) -> float:
        return float(self.score(params).mean())


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.1
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0


def loss_and_grad(params, arch: MlpArch, images, labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its analytic gradient on a batch."""
    params = np.asarray(params, dtype=np.float64)
    images = np.asarray(images, dtype=np.float64)
    w1, b1, w2, b2 = arch.split(params)
    pre = images @ w1.T + b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ w2.T + b2

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = images.shape[0]
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ w2
    dhidden[pre <= 0.0] = 0.0
    dw1 = dhidden.T @ images
    db1 = dhidden.sum(axis=0)
    return loss, arch.flatten(dw1, db1, dw2, db2)


def sgd_train(images: np.ndarray, labels: np.ndarray, arch: MlpArch, config: SgdConfig,
              init: np.ndarray | None = None) -> np.ndarray:
    """Plain mini-batch SGD on softmax cross-entropy; deterministic per seed."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if images.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    params = init_random(arch, rng) if init is None else np.asarray(init, dtype=np.float64).copy()
    n = images.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad = loss_and_grad(params, arch, images[batch], labels[batch])
            params -= config.learning_rate * grad
    return params


def pretrain_specialist(dataset: LabeledDataset, digits, arch: MlpArch,
                        config: SgdConfig) -> np.ndarray:
    """Train a 10-way classifier on the examples whose label is in ``digits``."""
    filtered = filter_digits(dataset, digits)
    if len(filtered) == 0:
        raise ValueError(f"no examples with labels in {sorted(set(digits))}")
    return sgd_train(filtered.images, filtered.labels, arch, config)
