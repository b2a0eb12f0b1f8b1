"""Shared fixtures and the randomized index instance generator."""

from __future__ import annotations

import numpy as np
import pytest

from topicshard.corpus import Corpus, Passage
from topicshard.embeddings import EmbeddingMatrix
from topicshard.index import Shard, ShardedIndex


def make_embeddings(ids, rows) -> EmbeddingMatrix:
    return EmbeddingMatrix(list(ids), np.asarray(rows, dtype=np.float32))


def make_random_index(
    rng: np.random.Generator,
    max_passages: int = 500,
    max_dim: int = 32,
    max_t: int = 8,
) -> ShardedIndex:
    """Random sharded index; empty shards occur, ids are shuffled strings."""
    t = int(rng.integers(1, max_t + 1))
    dim = int(rng.integers(2, max_dim + 1))
    n = int(rng.integers(1, max_passages + 1))
    labels = rng.integers(0, t, size=n)
    ids = [f"p{i:04d}" for i in rng.permutation(n)]
    vectors = rng.standard_normal((n, dim)).astype(np.float32)
    shards = []
    for topic in range(t):
        rows = np.flatnonzero(labels == topic)
        shards.append(
            Shard(
                topic_id=topic,
                emb=EmbeddingMatrix([ids[i] for i in rows], vectors[rows]),
            )
        )
    return ShardedIndex(shards)


def random_weights(rng: np.random.Generator, t: int) -> np.ndarray:
    """Simplex weights of one of three kinds: dense, one-hot, or with zeros."""
    kind = int(rng.integers(3))
    if kind == 0:
        w = rng.random(t)
    elif kind == 1:
        w = np.zeros(t)
        w[int(rng.integers(t))] = 1.0
        return w
    else:
        w = rng.random(t)
        w[rng.random(t) < 0.5] = 0.0
        if w.sum() == 0:
            w[int(rng.integers(t))] = 1.0
    return w / w.sum()


def flat_topk_ids(ids, vectors, q, k) -> list[str]:
    """Independent plain dense top-K: full sort of all dot products."""
    scores = np.asarray(vectors, dtype=np.float64) @ np.asarray(q, dtype=np.float64)
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [ids[i] for i in order[:k]]


@pytest.fixture
def tiny_corpus() -> Corpus:
    return Corpus(
        [
            Passage("p1", "pgA", "red red blue"),
            Passage("p2", "pgA", "blue fish"),
            Passage("p3", "pgB", "green tree"),
            Passage("p4", "pgB", "tall green grass"),
        ]
    )


@pytest.fixture
def corpus_file(tmp_path):
    def write(lines: list[str], name: str = "corpus.jsonl"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
