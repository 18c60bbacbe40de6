"""Skip-gram word2vec over token streams.

Negative sampling with the unigram^0.75 noise distribution, trained
single-threaded for bitwise reproducibility under a fixed seed. Vectors are
50-dim float32 so they feed the classifier's input layer directly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import modelio
from .tokenizer import PAD, UNK, TokenStream, vocabulary_of

NOISE_TABLE_MIN = 10_000
RESERVED = 2  # UNK, PAD


class EmptyCorpus(Exception):
    """Corpus has no vocabulary entries beyond the reserved ones."""


@dataclass
class SkipGramConfig:
    dim: int = 50
    window_radius: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    min_count: int = 2
    seed: int = 0

    def validate(self) -> None:
        if min(self.dim, self.window_radius, self.negatives, self.min_count) < 1:
            raise ValueError("dim, window_radius, negatives, min_count must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class EmbeddingModel:
    dim: int
    vocab: list[str]
    vectors: np.ndarray  # (|vocab|, dim) float32; PAD row is all zeros
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.index = {text: i for i, text in enumerate(self.vocab)}

    def vector(self, text: str) -> np.ndarray:
        return self.vectors[self.index.get(text, 0)]


def _seeded_init(rng: np.random.Generator, vocab_size: int, dim: int) -> np.ndarray:
    vecs = ((rng.random((vocab_size, dim), dtype=np.float32) - 0.5) / dim)
    vecs[1, :] = 0.0  # PAD stays zero
    return vecs


def _noise_table(counts: Sequence[int]) -> np.ndarray:
    """Unigram^0.75 sampling table over non-reserved vocab indices."""
    weights = np.asarray(counts, dtype=np.float64) ** 0.75
    total = weights.sum()
    size = max(NOISE_TABLE_MIN, 50 * len(counts))
    slots = np.maximum(1, np.round(weights / total * size).astype(np.int64))
    return np.repeat(np.arange(RESERVED, RESERVED + len(counts)), slots)


def train_skipgram(corpus: Iterable[TokenStream],
                   config: SkipGramConfig | None = None) -> EmbeddingModel:
    """Train skip-gram embeddings; deterministic for a fixed config.seed."""
    config = config or SkipGramConfig()
    config.validate()
    streams = list(corpus)
    vocab = vocabulary_of(streams, config.min_count)
    if len(vocab) <= RESERVED:
        raise EmptyCorpus("no vocabulary entries survive min_count filtering")
    index = {text: i for i, text in enumerate(vocab)}

    counts: Counter[str] = Counter()
    for stream in streams:
        counts.update(t.text for t in stream.tokens)
    noise = _noise_table([counts[text] for text in vocab[RESERVED:]])

    sentences = []
    for stream in streams:
        ids = [index[t.text] for t in stream.tokens
               if index.get(t.text, 0) >= RESERVED]
        if ids:
            sentences.append(np.asarray(ids, dtype=np.int64))

    rng = np.random.default_rng(config.seed)
    syn0 = _seeded_init(rng, len(vocab), config.dim)
    syn1 = np.zeros((len(vocab), config.dim), dtype=np.float32)

    total_positions = config.epochs * sum(len(s) for s in sentences)
    lr0, lr_min = config.learning_rate, config.min_learning_rate
    radius, k = config.window_radius, config.negatives
    done = 0
    for _ in range(config.epochs):
        for sent in sentences:
            n = len(sent)
            for t in range(n):
                alpha = lr0 - (lr0 - lr_min) * (done / max(1, total_positions))
                alpha = max(lr_min, alpha)
                done += 1
                center = sent[t]
                lo, hi = max(0, t - radius), min(n, t + radius + 1)
                contexts = [sent[c] for c in range(lo, hi) if c != t]
                if not contexts:
                    continue
                # One vectorized update per center: positives and their
                # negatives in a single (rows, dim) block.
                pos = np.asarray(contexts, dtype=np.int64)
                negs = noise[rng.integers(0, len(noise), size=(len(pos), k))]
                rows = np.concatenate([pos, negs.ravel()])
                labels = np.zeros(len(rows), dtype=np.float32)
                labels[:len(pos)] = 1.0
                # Drop negatives that collide with their positive context.
                collide = (negs == pos[:, None]).ravel()
                keep = np.concatenate(
                    [np.ones(len(pos), dtype=bool), ~collide])
                rows, labels = rows[keep], labels[keep]

                v = syn0[center]
                scores = _sigmoid(syn1[rows] @ v)
                g = (labels - scores) * np.float32(alpha)
                dv = g @ syn1[rows]
                np.add.at(syn1, rows, np.outer(g, v))
                syn0[center] += dv
    syn0[1, :] = 0.0
    return EmbeddingModel(dim=config.dim, vocab=vocab, vectors=syn0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def embed(model: EmbeddingModel, stream: TokenStream) -> np.ndarray:
    """Map a token stream to its (len, dim) float32 vector sequence."""
    if not stream.tokens:
        return np.zeros((0, model.dim), dtype=np.float32)
    ids = [model.index.get(t.text, 0) for t in stream.tokens]
    return model.vectors[ids]


def cosine(model: EmbeddingModel, a: str, b: str) -> float:
    va, vb = model.vector(a), model.vector(b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def save_embeddings(model: EmbeddingModel, path: str | Path,
                    config: SkipGramConfig | None = None) -> None:
    cfg = asdict(config) if config else {"dim": model.dim}
    cfg["dim"] = model.dim
    modelio.save_payload(path, "word2vec", cfg, {"vectors": model.vectors},
                         vocab=model.vocab)


def load_embeddings(path: str | Path) -> EmbeddingModel:
    doc = modelio.load_payload(path, expect_kind="word2vec")
    vocab = doc.get("vocab")
    if not isinstance(vocab, list) or len(vocab) < RESERVED or vocab[0] != UNK \
            or vocab[1] != PAD:
        raise modelio.FormatError("bad or missing vocab")
    dim = doc["config"].get("dim")
    vectors = doc["tensors"].get("vectors")
    if vectors is None:
        raise modelio.FormatError("missing vectors tensor")
    if not isinstance(dim, int) or vectors.shape != (len(vocab), dim):
        raise modelio.FormatError(
            f"vectors shape {vectors.shape} does not match vocab/dim")
    return EmbeddingModel(dim=dim, vocab=list(vocab), vectors=vectors)
