"""Synthetic corpora with planted topic structure.

Generates a topic-clustered knowledge base plus topic-correlated queries so
that sharded retrieval's qualitative behavior is testable at desk scale:

* topic centroids share a common component and orthogonal spokes, giving an
  exact pairwise cosine (default 0.4, always < 0.5);
* passage directions are unit vectors near their topic centroid; the stored
  vector is scaled by a per-topic gain (geometric in the topic id), emulating
  per-topic document encoders whose raw scores are not calibrated against
  each other — the failure mode topic-weighted scoring compensates for;
* each query is a noisy copy of one passage's direction (unit scale, like a
  single shared query encoder), with that passage and its page as gold;
* passage text draws on a topic-private vocabulary so keyword extraction has
  signal, and pages group blocks of 4 consecutive same-topic passages.

Everything derives from one seed; identical specs produce bitwise-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Passage, QueryRecord, Turn
from .embeddings import EmbeddingMatrix
from .errors import ValidationError

PAGE_BLOCK = 4
WORDS_PER_PASSAGE = 8
WORDS_PER_QUERY = 6


@dataclass(frozen=True)
class SyntheticSpec:
    true_T: int
    passages_per_topic: int
    dim: int
    noise_sigma: float
    queries_per_topic: int
    vocab_per_topic: int
    seed: int
    encoder_gain_ratio: float = 1.4
    centroid_cosine: float = 0.4

    def __post_init__(self) -> None:
        for name in ("true_T", "passages_per_topic", "queries_per_topic", "vocab_per_topic"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.dim < 2:
            raise ValidationError("dim must be >= 2")
        if self.true_T > 1 and self.dim < self.true_T + 1:
            raise ValidationError(
                f"dim must be >= true_T + 1 to place {self.true_T} separated centroids"
            )
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.encoder_gain_ratio < 1.0:
            raise ValidationError("encoder_gain_ratio must be >= 1")
        if not 0.0 <= self.centroid_cosine < 0.5:
            raise ValidationError("centroid_cosine must be in [0, 0.5)")


@dataclass(frozen=True)
class SyntheticDataset:
    corpus: Corpus
    passage_emb: EmbeddingMatrix
    queries: tuple[QueryRecord, ...]
    query_emb: EmbeddingMatrix
    assignment: dict[str, int]      # planted passage -> topic labels
    centroids: np.ndarray           # true_T x dim unit directions
    gains: np.ndarray               # per-topic stored-vector scale factors


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _planted_centroids(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Unit directions with exact pairwise cosine spec.centroid_cosine."""
    basis, _ = np.linalg.qr(rng.standard_normal((spec.dim, spec.true_T + 1)))
    basis = basis.T  # rows orthonormal
    if spec.true_T == 1:
        return basis[:1].copy()
    rho = spec.centroid_cosine
    shared = np.sqrt(rho) * basis[0]
    centroids = shared[None, :] + np.sqrt(1.0 - rho) * basis[1:]
    return centroids


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Build (corpus, passage embeddings, labeled queries, planted labels)."""
    rng = np.random.default_rng(spec.seed)
    centroids = _planted_centroids(spec, rng)
    cos = centroids @ centroids.T
    off_diag = cos[~np.eye(spec.true_T, dtype=bool)]
    if off_diag.size and off_diag.max() >= 0.5:
        raise ValidationError("planted centroids not separated (pairwise cosine >= 0.5)")
    gains = spec.encoder_gain_ratio ** np.arange(spec.true_T, dtype=np.float64)

    vocab = [
        [f"t{t}w{j}" for j in range(spec.vocab_per_topic)]
        for t in range(spec.true_T)
    ]

    passages: list[Passage] = []
    directions: list[np.ndarray] = []
    stored: list[np.ndarray] = []
    assignment: dict[str, int] = {}
    for t in range(spec.true_T):
        for i in range(spec.passages_per_topic):
            direction = _unit(centroids[t] + spec.noise_sigma * rng.standard_normal(spec.dim))
            pid = f"p{t:02d}_{i:03d}"
            page_id = f"pg{t:02d}_{i // PAGE_BLOCK:02d}"
            words = rng.choice(vocab[t], size=WORDS_PER_PASSAGE)
            passages.append(Passage(id=pid, page_id=page_id, text=" ".join(words)))
            directions.append(direction)
            stored.append(gains[t] * direction)
            assignment[pid] = t

    corpus = Corpus(passages)
    passage_emb = EmbeddingMatrix(
        [p.id for p in passages], np.asarray(stored, dtype=np.float32)
    )

    queries: list[QueryRecord] = []
    query_vecs: list[np.ndarray] = []
    per_topic = spec.passages_per_topic
    for t in range(spec.true_T):
        for k in range(spec.queries_per_topic):
            target = int(rng.integers(per_topic))
            gold = passages[t * per_topic + target]
            qv = _unit(
                directions[t * per_topic + target]
                + spec.noise_sigma * rng.standard_normal(spec.dim)
            )
            words = rng.choice(vocab[t], size=WORDS_PER_QUERY)
            queries.append(
                QueryRecord(
                    id=f"q{t:02d}_{k:03d}",
                    turns=(Turn(speaker="user", text=" ".join(words)),),
                    gold_page_id=gold.page_id,
                    gold_passage_ids=frozenset({gold.id}),
                )
            )
            query_vecs.append(qv)

    query_emb = EmbeddingMatrix(
        [q.id for q in queries], np.asarray(query_vecs, dtype=np.float32)
    )
    return SyntheticDataset(
        corpus=corpus,
        passage_emb=passage_emb,
        queries=tuple(queries),
        query_emb=query_emb,
        assignment=assignment,
        centroids=centroids,
        gains=gains,
    )


def split_validation_test(
    queries: tuple[QueryRecord, ...], query_emb: EmbeddingMatrix
) -> tuple[tuple[QueryRecord, ...], EmbeddingMatrix, tuple[QueryRecord, ...], EmbeddingMatrix]:
    """Deterministic even/odd split into validation and test halves."""
    val = tuple(q for i, q in enumerate(queries) if i % 2 == 0)
    test = tuple(q for i, q in enumerate(queries) if i % 2 == 1)
    if not val or not test:
        raise ValidationError("need at least 2 queries to split")
    return (
        val,
        query_emb.select([q.id for q in val]),
        test,
        query_emb.select([q.id for q in test]),
    )
