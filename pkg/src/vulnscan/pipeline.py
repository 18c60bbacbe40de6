"""Composition helpers: labeled samples -> embeddings -> trained detectors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import LabeledSample
from .embedding import EmbeddingModel, SkipGramConfig, embed, train_skipgram
from .nn import BiLstmModel, TrainingConfig, init_model, train
from .tokenizer import TokenStream, tokenize
from .vulntypes import VulnType

DEFAULT_WINDOW_TOKENS = 40


def sample_streams(samples: Sequence[LabeledSample]) -> list[TokenStream]:
    return [tokenize(s.code, file_path=f"sample_{i}.py")
            for i, s in enumerate(samples)]


def train_embeddings(samples: Sequence[LabeledSample],
                     config: SkipGramConfig | None = None) -> EmbeddingModel:
    return train_skipgram(sample_streams(samples), config or SkipGramConfig())


def build_dataset(samples: Sequence[LabeledSample], emb: EmbeddingModel,
                  max_tokens: int = DEFAULT_WINDOW_TOKENS
                  ) -> list[tuple[np.ndarray, int]]:
    """One (vector sequence, label) pair per sample, capped at max_tokens."""
    dataset = []
    for stream, sample in zip(sample_streams(samples), samples):
        vectors = embed(emb, stream)[:max_tokens]
        if len(vectors) == 0:
            continue
        dataset.append((vectors, sample.label))
    return dataset


def train_detector(vuln_type: VulnType, samples: Sequence[LabeledSample],
                   emb: EmbeddingModel, config: TrainingConfig | None = None,
                   max_tokens: int = DEFAULT_WINDOW_TOKENS
                   ) -> tuple[BiLstmModel, list[float]]:
    config = config or TrainingConfig()
    dataset = build_dataset(samples, emb, max_tokens)
    model = init_model(config, vuln_type)
    return train(model, dataset, config)
