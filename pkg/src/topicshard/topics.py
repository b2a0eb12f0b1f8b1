"""Topic distributions over a clustered embedding space.

The topic model is a soft spherical k-means: T unit-sphere centroids plus a
softmax temperature.  Any vector maps to a simplex-valued distribution via
softmax(cosine / temperature); passages hard-assign to their argmax topic.
Distributions can also be supplied externally from a JSON Lines file, so an
upstream topic model's output can drive retrieval unchanged.

Model file format "TPM1" (little-endian, bit-exact):

    magic        4 bytes  b"TPM1"
    T            u32
    dim          u32
    temperature  f32
    trained_on   u64
    centroids    T x dim float32, row-major
"""

from __future__ import annotations

import json
import math
import re
import struct
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .corpus import Corpus
from .embeddings import EmbeddingMatrix
from .errors import FormatError, ValidationError
from .kernels import nearest_centroids
from .stopwords import STOPWORDS

TPM_MAGIC = b"TPM1"
_TPM_HEADER = struct.Struct("<IIfQ")

SIMPLEX_TOL = 1e-6

WeightProvider = Callable[[str, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    max_iters: int = 100
    tolerance: float = 1e-4
    seed: int = 0
    temperature: float = 1.0


class TopicModel:
    """T centroids plus the softmax temperature; immutable after training."""

    def __init__(self, centroids: np.ndarray, temperature: float, trained_on: int = 0):
        centroids = np.ascontiguousarray(centroids, dtype=np.float32)
        if centroids.ndim != 2 or centroids.shape[0] < 1:
            raise ValidationError("centroids must be a non-empty 2-D array")
        if not np.all(np.isfinite(centroids)):
            raise ValidationError("centroids contain non-finite values")
        if not temperature > 0:
            raise ValidationError(f"temperature must be > 0, got {temperature}")
        centroids.flags.writeable = False  # immutable after training
        self._centroids = centroids
        self._temperature = float(temperature)
        self._trained_on = int(trained_on)

    @property
    def T(self) -> int:
        return int(self._centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self._centroids.shape[1])

    @property
    def centroids(self) -> np.ndarray:
        return self._centroids

    @property
    def temperature(self) -> float:
        return self._temperature

    @property
    def trained_on(self) -> int:
        return self._trained_on


@dataclass(frozen=True)
class TopicDistribution:
    """Simplex-valued topic weights w = (w_1, ..., w_T)."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("weights must be a non-empty 1-D vector")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return int(self.weights.size)


def _normalized_rows(vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms < 1e-30)
    if bad.size:
        raise ValidationError(f"zero-norm vector at row {int(bad[0])}")
    return x / norms[:, None]


def _kmeans_pp_seed(x: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding on unit vectors; squared distance = 2 - 2cos."""
    n = x.shape[0]
    centroids = np.empty((t, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = x[first]
    d2 = np.maximum(2.0 - 2.0 * (x @ centroids[0]), 0.0)
    for k in range(1, t):
        total = float(d2.sum())
        if total <= 1e-12:
            raise ValidationError("fewer distinct directions than T")
        nxt = int(rng.choice(n, p=d2 / total))
        centroids[k] = x[nxt]
        d2 = np.minimum(d2, np.maximum(2.0 - 2.0 * (x @ centroids[k]), 0.0))
    return centroids


def train_topics(emb: EmbeddingMatrix, t: int, config: TrainConfig = TrainConfig()) -> TopicModel:
    """Soft spherical k-means over the embedding rows.

    Unit-normalizes inputs, seeds k-means++ style from config.seed, then
    iterates (assign to nearest-by-cosine centroid, recompute centroid as the
    normalized mean) until the assignment change fraction drops below
    config.tolerance or max_iters is hit.  Deterministic for a fixed seed.
    """
    if t < 1:
        raise ValidationError(f"T must be >= 1, got {t}")
    if t > emb.count:
        raise ValidationError(f"T={t} exceeds vector count {emb.count}")
    x = _normalized_rows(emb.vectors)
    rng = np.random.default_rng(config.seed)
    centroids = _kmeans_pp_seed(x, t, rng)
    labels = nearest_centroids(x, centroids)
    for _ in range(config.max_iters):
        for k in range(t):
            members = np.flatnonzero(labels == k)
            if members.size == 0:
                # Reseed a dead centroid to the point farthest from its own
                # centroid (deterministic; ties at the lowest row index).
                dots = np.einsum("ij,ij->i", x, centroids[labels])
                centroids[k] = x[int(np.argmin(dots))]
                continue
            mean = x[members].mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm < 1e-12:
                continue  # members cancel out; keep the previous centroid
            centroids[k] = mean / norm
        new_labels = nearest_centroids(x, centroids)
        changed = float(np.mean(new_labels != labels))
        labels = new_labels
        if changed < config.tolerance:
            break
    return TopicModel(
        centroids=centroids.astype(np.float32),
        temperature=config.temperature,
        trained_on=emb.count,
    )


def _cosines(model: TopicModel, vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    if v.size != model.dim:
        raise ValidationError(f"vector dim {v.size} != model dim {model.dim}")
    vnorm = np.linalg.norm(v)
    if vnorm < 1e-30:
        raise ValidationError("zero-norm vector")
    c = model.centroids.astype(np.float64)
    cnorms = np.linalg.norm(c, axis=1)
    return (c @ v) / (cnorms * vnorm)


def infer_distribution(model: TopicModel, vector: np.ndarray) -> TopicDistribution:
    """softmax(cosine(vector, centroid_i) / temperature) over all topics."""
    z = _cosines(model, vector) / model.temperature
    z -= z.max()  # stable softmax; invariant under a constant shift
    e = np.exp(z)
    return TopicDistribution(e / e.sum())


def assign_cluster(model: TopicModel, vector: np.ndarray) -> int:
    """Argmax topic of infer_distribution; ties go to the lowest index."""
    return int(np.argmax(infer_distribution(model, vector).weights))


def assign_corpus(model: TopicModel, emb: EmbeddingMatrix) -> dict[str, int]:
    """Hard topic assignment for every embedding row, keyed by id."""
    return {vec_id: assign_cluster(model, emb.vectors[i]) for i, vec_id in enumerate(emb.ids)}


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def keyword_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric tokens with built-in stopwords removed."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in STOPWORDS]


def top_words(
    model: TopicModel,
    corpus: Corpus,
    assignment: Mapping[str, int],
    n: int,
) -> list[list[str]]:
    """Top-N keywords per topic by term frequency x topic-IDF.

    score(term, t) = (count of term in topic-t passages) * ln(T / number of
    topics containing the term); ties break lexicographically.  Terms present
    in every topic score zero and are listed only when a topic has no
    positive-score terms at all.  Topics with no passages yield [].
    """
    if n < 1:
        raise ValidationError(f"N must be >= 1, got {n}")
    t_total = model.T
    tf: list[dict[str, int]] = [dict() for _ in range(t_total)]
    for p in corpus.passages:
        if p.id not in assignment:
            raise ValidationError(f"passage {p.id!r} missing from assignment")
        topic = assignment[p.id]
        if not 0 <= topic < t_total:
            raise ValidationError(f"passage {p.id!r} assigned out-of-range topic {topic}")
        counts = tf[topic]
        for tok in keyword_tokens(p.text):
            counts[tok] = counts.get(tok, 0) + 1
    df: dict[str, int] = {}
    for counts in tf:
        for term in counts:
            df[term] = df.get(term, 0) + 1
    result: list[list[str]] = []
    for topic in range(t_total):
        counts = tf[topic]
        scored = [(c * math.log(t_total / df[term]), term) for term, c in counts.items()]
        positive = sorted(((s, w) for s, w in scored if s > 0), key=lambda x: (-x[0], x[1]))
        if positive:
            result.append([w for _, w in positive[:n]])
        elif scored:
            result.append(sorted(w for _, w in scored)[:n])
        else:
            result.append([])
    return result


def topic_coherence(
    topics: list[list[str]],
    word_vectors: Mapping[str, np.ndarray],
) -> float:
    """Mean over topics of the mean pairwise cosine of the topics' top words.

    Words without a vector are skipped; topics with fewer than two covered
    words do not contribute.  Raises if no topic has two covered words.
    """
    per_topic: list[float] = []
    for words in topics:
        covered = [np.asarray(word_vectors[w], dtype=np.float64) for w in words if w in word_vectors]
        if len(covered) < 2:
            continue
        sims = []
        for a, b in combinations(covered, 2):
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na < 1e-30 or nb < 1e-30:
                raise ValidationError("zero-norm word vector")
            sims.append(float(a @ b / (na * nb)))
        per_topic.append(float(np.mean(sims)))
    if not per_topic:
        raise ValidationError("no topic has two or more words with vectors")
    return float(np.mean(per_topic))


def save_topic_model(model: TopicModel, path: str | Path) -> None:
    """Write the TPM1 binary layout; deterministic byte-for-byte."""
    with open(path, "wb") as fh:
        fh.write(TPM_MAGIC)
        fh.write(_TPM_HEADER.pack(model.T, model.dim, model.temperature, model.trained_on))
        fh.write(model.centroids.astype("<f4", copy=False).tobytes())


def load_topic_model(path: str | Path) -> TopicModel:
    data = Path(path).read_bytes()
    if data[:4] != TPM_MAGIC:
        raise FormatError(f"{path}: bad magic bytes (expected TPM1)")
    if len(data) < 4 + _TPM_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    t, dim, temperature, trained_on = _TPM_HEADER.unpack_from(data, 4)
    expected = 4 + _TPM_HEADER.size + 4 * t * dim
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for T={t}, dim={dim}, got {len(data)}")
    centroids = np.frombuffer(
        data, dtype="<f4", count=t * dim, offset=4 + _TPM_HEADER.size
    ).reshape(t, dim)
    return TopicModel(centroids=centroids.copy(), temperature=temperature, trained_on=trained_on)


def load_distributions(path: str | Path, expected_t: int) -> dict[str, np.ndarray]:
    """Externally computed topic distributions: JSONL {"id", "weights"}."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from None
            qid = str(obj.get("id"))
            if "weights" not in obj:
                raise FormatError(f"{path}: line {lineno} missing 'weights'")
            w = np.asarray(obj["weights"], dtype=np.float64)
            if w.size != expected_t:
                raise FormatError(
                    f"{path}: line {lineno}: {w.size} weights, expected {expected_t}"
                )
            try:
                out[qid] = TopicDistribution(w).weights
            except ValidationError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    if not out:
        raise FormatError(f"{path}: empty distribution file")
    return out


def weights_from_model(model: TopicModel) -> WeightProvider:
    """Provider that infers the distribution from the query's own vector."""

    def provider(query_id: str, vector: np.ndarray) -> np.ndarray:
        return infer_distribution(model, vector).weights

    return provider


def weights_from_file(distributions: Mapping[str, np.ndarray]) -> WeightProvider:
    """Provider backed by externally computed distributions, keyed by id."""

    def provider(query_id: str, vector: np.ndarray) -> np.ndarray:
        if query_id not in distributions:
            raise ValidationError(f"no external distribution for query {query_id!r}")
        return distributions[query_id]

    return provider
