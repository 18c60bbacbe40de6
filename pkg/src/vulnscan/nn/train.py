"""Mini-batch training of the classifier: MSE loss, Adam, BPTT."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .adam import Adam, clip_global_norm
from .bilstm import BiLstmModel, backward_batch, forward_batch
from .config import TrainingConfig

GRAD_CLIP_NORM = 5.0

Dataset = Sequence[tuple[np.ndarray, int]]


class EmptyDataset(Exception):
    pass


class NonFiniteLoss(Exception):
    """Training aborted because the loss left the finite range."""


def _length_buckets(indices: np.ndarray, dataset: Dataset) -> list[np.ndarray]:
    """Split a batch into same-length groups so each runs as one tensor op."""
    by_len: dict[int, list[int]] = {}
    for idx in indices:
        by_len.setdefault(len(dataset[idx][0]), []).append(int(idx))
    return [np.asarray(by_len[n]) for n in sorted(by_len)]


def train(model: BiLstmModel, dataset: Dataset,
          config: TrainingConfig | None = None
          ) -> tuple[BiLstmModel, list[float]]:
    """Train a copy of the model; returns it with the per-epoch loss curve."""
    config = config or model.config
    config.validate()
    if len(dataset) == 0:
        raise EmptyDataset("no training examples")
    for window, label in dataset:
        if label not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {label!r}")
        if len(window) == 0:
            raise EmptyDataset("dataset contains a zero-length window")

    model = model.copy()
    model.config = config
    params = model.params
    optimizer = Adam(params, learning_rate=config.learning_rate,
                     beta1=config.adam_beta1, beta2=config.adam_beta2,
                     epsilon=config.adam_epsilon)
    shuffle_rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 1)

    n = len(dataset)
    losses: list[float] = []
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_sq_err = 0.0
        for start in range(0, n, config.batch_size):
            batch_idx = order[start:start + config.batch_size]
            batch_n = len(batch_idx)
            grads: dict[str, np.ndarray] = {
                k: np.zeros_like(v) for k, v in params.items()}
            for bucket in _length_buckets(batch_idx, dataset):
                windows = np.stack([dataset[i][0] for i in bucket])
                labels = np.asarray([dataset[i][1] for i in bucket],
                                    dtype=np.float32)
                scores, cache = forward_batch(model, windows, training=True,
                                              rng=dropout_rng)
                err = scores - labels
                epoch_sq_err += float(np.sum(err.astype(np.float64) ** 2))
                d_scores = 2.0 * err / batch_n
                for name, g in backward_batch(model, cache, d_scores).items():
                    grads[name] += g
            clip_global_norm(grads, GRAD_CLIP_NORM)
            optimizer.step(params, grads)
        epoch_loss = epoch_sq_err / n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(f"loss became {epoch_loss!r}")
        losses.append(epoch_loss)
    return model, losses
