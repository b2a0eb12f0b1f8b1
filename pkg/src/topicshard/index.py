"""Per-topic flat dense shards with weighted top-K fusion.

Relevance of a passage in shard i for query q with topic weights w is
(q . d) * w_i.  Retrieval takes the best K candidates from every shard,
pools the <= K*T candidates, and keeps the global top K.  An exhaustive
oracle with no per-shard pruning provides the equivalence check.

Scores accumulate in float64 even though storage is float32; ordering ties
break by ascending passage id everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .embeddings import EmbeddingMatrix, load_embeddings, write_embeddings
from .errors import FormatError, ValidationError
from .kernels import dot_scores

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ScoredPassage:
    passage_id: str
    topic_id: int
    raw_dot: float   # q . d before weighting
    score: float     # raw_dot * w_topic, recorded as computed


@dataclass(frozen=True)
class Shard:
    """One topic's flat sub-index; row r holds the vector for emb.ids[r]."""

    topic_id: int
    emb: EmbeddingMatrix

    @property
    def size(self) -> int:
        return self.emb.count


@dataclass(frozen=True)
class BuildReport:
    shard_sizes: tuple[int, ...]
    empty_topic_ids: tuple[int, ...]


class ShardedIndex:
    """T immutable flat shards, one per topic id in [0, T)."""

    def __init__(self, shards: Sequence[Shard]):
        if not shards:
            raise ValidationError("index needs at least one shard")
        topic_ids = [s.topic_id for s in shards]
        if topic_ids != list(range(len(shards))):
            raise ValidationError(f"shard topic ids must be 0..{len(shards) - 1} in order")
        dims = {s.emb.dim for s in shards}
        if len(dims) != 1:
            raise ValidationError(f"shards disagree on dim: {sorted(dims)}")
        seen: dict[str, int] = {}
        for s in shards:
            for pid in s.emb.ids:
                if pid in seen:
                    raise ValidationError(
                        f"passage {pid!r} appears in shards {seen[pid]} and {s.topic_id}"
                    )
                seen[pid] = s.topic_id
        self._shards = tuple(shards)
        self._dim = shards[0].emb.dim

    @property
    def T(self) -> int:
        return len(self._shards)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def shards(self) -> tuple[Shard, ...]:
        return self._shards

    @property
    def total_passages(self) -> int:
        return sum(s.size for s in self._shards)

    def build_report(self) -> BuildReport:
        sizes = tuple(s.size for s in self._shards)
        return BuildReport(
            shard_sizes=sizes,
            empty_topic_ids=tuple(i for i, n in enumerate(sizes) if n == 0),
        )


def build_index(corpus: Corpus, per_shard_emb: Mapping[int, EmbeddingMatrix]) -> ShardedIndex:
    """Assemble shards keyed by topic id; ids must be corpus passages.

    Topic ids must form [0, T); empty shards are permitted and show up in
    the build report.
    """
    if not per_shard_emb:
        raise ValidationError("no shards given")
    t = len(per_shard_emb)
    if sorted(per_shard_emb) != list(range(t)):
        raise ValidationError(f"shard topic ids must form 0..{t - 1}, got {sorted(per_shard_emb)}")
    for topic_id in range(t):
        for pid in per_shard_emb[topic_id].ids:
            if pid not in corpus:
                raise ValidationError(f"shard {topic_id} has unknown passage id {pid!r}")
    return ShardedIndex([Shard(topic_id=i, emb=per_shard_emb[i]) for i in range(t)])


def split_by_assignment(
    emb: EmbeddingMatrix, assignment: Mapping[str, int], t: int
) -> dict[int, EmbeddingMatrix]:
    """Partition one global matrix into per-topic matrices, preserving order."""
    grouped: dict[int, list[str]] = {k: [] for k in range(t)}
    for vec_id in emb.ids:
        if vec_id not in assignment:
            raise ValidationError(f"id {vec_id!r} missing from assignment")
        topic = assignment[vec_id]
        if not 0 <= topic < t:
            raise ValidationError(f"id {vec_id!r} assigned out-of-range topic {topic}")
        grouped[topic].append(vec_id)
    return {k: emb.select(ids) for k, ids in grouped.items()}


def _query64(q: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(q, dtype=np.float64).reshape(-1)
    if v.size != dim:
        raise ValidationError(f"query dim {v.size} != index dim {dim}")
    return v


def _select_topk(scores: np.ndarray, ids: Sequence[str], k: int) -> list[int]:
    """Indices of the top-k scores, ties broken by ascending id.

    Exact under the global ordering (-score, id): boundary ties are resolved
    by id so the selection matches a full sort of all rows.
    """
    n = scores.shape[0]
    if k >= n:
        chosen: Iterable[int] = range(n)
    else:
        part = np.argpartition(scores, n - k)[n - k:]
        boundary = scores[part].min()
        above = np.flatnonzero(scores > boundary)
        need = k - int(above.size)
        at_boundary = sorted(np.flatnonzero(scores == boundary), key=lambda i: ids[i])
        chosen = list(above) + [int(i) for i in at_boundary[:need]]
    return sorted(chosen, key=lambda i: (-scores[i], ids[i]))


def shard_topk(shard: Shard, q: np.ndarray, k: int) -> list[ScoredPassage]:
    """Exact unweighted top-k of one shard by raw dot product (flat scan)."""
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    v = _query64(q, shard.emb.dim)
    raw = dot_scores(shard.emb.vectors, v)
    return [
        ScoredPassage(
            passage_id=shard.emb.ids[i],
            topic_id=shard.topic_id,
            raw_dot=float(raw[i]),
            score=float(raw[i]),
        )
        for i in _select_topk(raw, shard.emb.ids, k)
    ]


def _check_weights(w: np.ndarray | Sequence[float], t: int) -> np.ndarray:
    arr = np.asarray(getattr(w, "weights", w), dtype=np.float64).reshape(-1)
    if arr.size != t:
        raise ValidationError(f"{arr.size} topic weights for {t} shards")
    return arr


def retrieve(
    index: ShardedIndex,
    q: np.ndarray,
    w: np.ndarray | Sequence[float],
    k: int,
) -> list[ScoredPassage]:
    """Weighted top-K over all shards: per-shard top-K, then global merge.

    Per-shard candidates are selected under the weighted ordering
    (-raw_dot * w_i, passage_id).  For w_i > 0 that is the plain raw-dot
    ordering; for w_i = 0 every candidate ties at score 0 and the id rule
    picks the shard's lexicographically first K rows — required for exact
    agreement with the exhaustive oracle.
    """
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    weights = _check_weights(w, index.T)
    v = _query64(q, index.dim)
    pool: list[ScoredPassage] = []
    for shard, wi in zip(index.shards, weights):
        if shard.size == 0:
            continue
        raw = dot_scores(shard.emb.vectors, v)
        weighted = raw * wi
        pool.extend(
            ScoredPassage(
                passage_id=shard.emb.ids[i],
                topic_id=shard.topic_id,
                raw_dot=float(raw[i]),
                score=float(weighted[i]),
            )
            for i in _select_topk(weighted, shard.emb.ids, k)
        )
    pool.sort(key=lambda s: (-s.score, s.passage_id))
    return pool[:k]


def oracle_retrieve(
    index: ShardedIndex,
    q: np.ndarray,
    w: np.ndarray | Sequence[float],
    k: int,
) -> list[ScoredPassage]:
    """Exhaustive reference: weighted score for every passage, global sort.

    Same contract as retrieve but with no per-shard pruning; used as the
    equivalence oracle.
    """
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    weights = _check_weights(w, index.T)
    v = _query64(q, index.dim)
    everything: list[ScoredPassage] = []
    for shard, wi in zip(index.shards, weights):
        if shard.size == 0:
            continue
        raw = dot_scores(shard.emb.vectors, v)
        weighted = raw * wi
        everything.extend(
            ScoredPassage(
                passage_id=shard.emb.ids[i],
                topic_id=shard.topic_id,
                raw_dot=float(raw[i]),
                score=float(weighted[i]),
            )
            for i in range(shard.size)
        )
    everything.sort(key=lambda s: (-s.score, s.passage_id))
    return everything[:k]


def save_index(index: ShardedIndex, directory: str | Path, corpus_hash: str) -> None:
    """Write one EMB1 file per shard plus the manifest JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for shard in index.shards:
        write_embeddings(shard.emb, directory / f"shard_{shard.topic_id}.emb")
    manifest = {
        "T": index.T,
        "dim": index.dim,
        "shard_sizes": list(index.build_report().shard_sizes),
        "corpus_hash": corpus_hash,
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_index(directory: str | Path) -> tuple[ShardedIndex, dict]:
    """Load an index directory; returns (index, manifest)."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FormatError(f"{directory}: missing {MANIFEST_NAME}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    t = int(manifest["T"])
    shards = []
    for topic_id in range(t):
        emb_path = directory / f"shard_{topic_id}.emb"
        if not emb_path.is_file():
            raise FormatError(f"{directory}: missing shard file {emb_path.name}")
        shards.append(Shard(topic_id=topic_id, emb=load_embeddings(emb_path)))
    index = ShardedIndex(shards)
    if index.dim != int(manifest["dim"]):
        raise FormatError(
            f"{directory}: manifest dim {manifest['dim']} != shard dim {index.dim}"
        )
    sizes = list(index.build_report().shard_sizes)
    if sizes != list(manifest["shard_sizes"]):
        raise FormatError(
            f"{directory}: manifest shard_sizes {manifest['shard_sizes']} != actual {sizes}"
        )
    return index, manifest


def write_rankings(
    path: str | Path,
    rankings: Iterable[tuple[str, list[ScoredPassage]]],
) -> None:
    """Retrieval output: JSONL {"query_id", "ranked": [...]} per query."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id, ranked in rankings:
            obj = {
                "query_id": query_id,
                "ranked": [
                    {
                        "passage_id": s.passage_id,
                        "topic_id": s.topic_id,
                        "raw_dot": s.raw_dot,
                        "score": s.score,
                    }
                    for s in ranked
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_rankings(path: str | Path) -> dict[str, list[ScoredPassage]]:
    """Parse a retrieval output file back into ScoredPassage lists."""
    out: dict[str, list[ScoredPassage]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from None
            qid = str(obj.get("query_id"))
            if qid in out:
                raise FormatError(f"{path}: duplicate query_id {qid!r} on line {lineno}")
            out[qid] = [
                ScoredPassage(
                    passage_id=str(r["passage_id"]),
                    topic_id=int(r["topic_id"]),
                    raw_dot=float(r["raw_dot"]),
                    score=float(r["score"]),
                )
                for r in obj.get("ranked", [])
            ]
    if not out:
        raise FormatError(f"{path}: empty rankings file")
    return out
