"""End-to-end evaluation runs and the sweep over the number of topics T.

A run retrieves for every query (query vector -> topic weights -> weighted
top-K) and scores the requested metrics.  The sweep trains a topic model per
T, rebuilds the index, evaluates validation and test splits, and picks the T
with the highest validation R@K (ties to the smallest T).  Topic coherence is
reported alongside but never used for selection — retrieval quality and
coherence are deliberately independent columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, QueryRecord
from .embeddings import EmbeddingMatrix
from .errors import EngineError, ValidationError
from .index import ShardedIndex, build_index, oracle_retrieve, retrieve, split_by_assignment
from .metrics import (
    EvalReport,
    QueryMetrics,
    history_token_count,
    kilt_f1,
    pearson_length_f1,
    precision_at_1_page,
    recall_at_k,
    unigram_f1,
)
from .topics import (
    TrainConfig,
    WeightProvider,
    assign_corpus,
    keyword_tokens,
    top_words,
    topic_coherence,
    train_topics,
    weights_from_model,
)

KNOWN_METRICS = ("r@k", "p@1", "f1", "kilt_f1")

_REQUIRED_FIELDS = {
    "r@k": ("gold_passage_ids",),
    "p@1": ("gold_page_id",),
    "f1": ("candidate_response", "reference_response"),
    "kilt_f1": ("candidate_response", "reference_response", "gold_page_id"),
}


def _check_gold_fields(queries: Sequence[QueryRecord], metrics: Sequence[str]) -> None:
    for metric in metrics:
        if metric not in _REQUIRED_FIELDS:
            raise ValidationError(f"unknown metric {metric!r}; known: {KNOWN_METRICS}")
        for q in queries:
            for fieldname in _REQUIRED_FIELDS[metric]:
                if getattr(q, fieldname) is None:
                    raise ValidationError(
                        f"metric {metric!r} requires field {fieldname!r},"
                        f" missing on query {q.id!r}"
                    )


def score_rankings(
    corpus: Corpus,
    queries: Sequence[QueryRecord],
    ranked_ids: Mapping[str, Sequence[str]],
    metrics: Sequence[str] = ("r@k",),
    recall_k: int = 5,
) -> EvalReport:
    """Score already-retrieved rankings (passage ids per query id)."""
    _check_gold_fields(queries, metrics)
    per_query: dict[str, QueryMetrics] = {}
    for q in queries:
        if q.id not in ranked_ids:
            raise ValidationError(f"no ranking for query {q.id!r}")
        ranked = list(ranked_ids[q.id])
        m = QueryMetrics(history_length_tokens=history_token_count(q.turns))
        if "r@k" in metrics:
            m.recall_at_k = recall_at_k(ranked, q.gold_passage_ids, recall_k)
        if "p@1" in metrics or "kilt_f1" in metrics:
            hit = precision_at_1_page(ranked[0], q.gold_page_id, corpus) if ranked else 0
            if "p@1" in metrics:
                m.p_at_1 = hit
        if "f1" in metrics or "kilt_f1" in metrics:
            f1 = unigram_f1(q.candidate_response, q.reference_response)
            if "f1" in metrics:
                m.f1 = f1
            if "kilt_f1" in metrics:
                m.kilt_f1 = kilt_f1(f1, hit)
        per_query[q.id] = m
    pearson_r = pearson_p = None
    f1_pairs = [
        (float(m.history_length_tokens), m.f1)
        for m in per_query.values()
        if m.f1 is not None
    ]
    if len(f1_pairs) >= 2:
        try:
            pearson_r, pearson_p = pearson_length_f1(f1_pairs)
        except ValidationError:
            pass  # zero variance: correlation undefined, leave unset
    return EvalReport(
        per_query=per_query,
        k_used=recall_k,
        pearson_length_f1=pearson_r,
        pearson_p_value=pearson_p,
    )


def run_eval(
    index: ShardedIndex,
    corpus: Corpus,
    queries: Sequence[QueryRecord],
    query_emb: EmbeddingMatrix,
    weights_for: WeightProvider,
    k_retrieve: int = 10,
    recall_k: int = 5,
    metrics: Sequence[str] = ("r@k",),
    verify_oracle: bool = False,
) -> EvalReport:
    """Retrieve for every query, then score the requested metrics.

    Synthetic and exported queries carry vectors directly in query_emb.  With
    verify_oracle the pruned retrieval is checked against the exhaustive scan
    for every query.
    """
    _check_gold_fields(queries, metrics)
    ranked_ids: dict[str, list[str]] = {}
    for q in queries:
        vector = query_emb.row(q.id)
        w = weights_for(q.id, vector)
        ranked = retrieve(index, vector, w, k_retrieve)
        if verify_oracle:
            reference = oracle_retrieve(index, vector, w, k_retrieve)
            if ranked != reference:
                raise EngineError(
                    f"retrieve/oracle divergence on query {q.id!r}:"
                    f" {ranked[:3]} vs {reference[:3]}"
                )
        ranked_ids[q.id] = [s.passage_id for s in ranked]
    return score_rankings(corpus, queries, ranked_ids, metrics, recall_k)


def derive_word_vectors(corpus: Corpus, emb: EmbeddingMatrix) -> dict[str, np.ndarray]:
    """Word vectors derived from the corpus when no external ones are given.

    Each word maps to the normalized mean of the normalized vectors of the
    passages containing it — an observable stand-in for external word
    embeddings, sufficient for comparing coherence across T.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for p in corpus.passages:
        v = emb.row(p.id).astype(np.float64)
        norm = np.linalg.norm(v)
        if norm < 1e-30:
            continue
        v = v / norm
        for word in set(keyword_tokens(p.text)):
            if word in sums:
                sums[word] = sums[word] + v
                counts[word] += 1
            else:
                sums[word] = v.copy()
                counts[word] = 1
    out: dict[str, np.ndarray] = {}
    for word, total in sums.items():
        norm = np.linalg.norm(total)
        if norm >= 1e-30:
            out[word] = total / norm
    return out


@dataclass(frozen=True)
class SweepEntry:
    validation_r_at_k: float
    test_r_at_k: float
    coherence: float


@dataclass(frozen=True)
class SweepResult:
    per_T: dict[int, SweepEntry]
    chosen_T: int
    recall_k: int

    def to_dict(self) -> dict:
        return {
            "per_T": {
                str(t): {
                    f"validation_r_at_{self.recall_k}": e.validation_r_at_k,
                    f"test_r_at_{self.recall_k}": e.test_r_at_k,
                    "coherence": e.coherence,
                }
                for t, e in sorted(self.per_T.items())
            },
            "chosen_T": self.chosen_T,
        }

    def render_table(self) -> str:
        """Coherence and R@K rows against a column per T."""
        ts = sorted(self.per_T)
        rows = [
            ("coherence", [self.per_T[t].coherence for t in ts]),
            (f"validation R@{self.recall_k}", [self.per_T[t].validation_r_at_k for t in ts]),
            (f"test R@{self.recall_k}", [self.per_T[t].test_r_at_k for t in ts]),
        ]
        label_w = max(len(r[0]) for r in rows) + 2
        head = "T".ljust(label_w) + "  ".join(f"{t:>6d}" for t in ts)
        lines = [head]
        for label, values in rows:
            lines.append(label.ljust(label_w) + "  ".join(f"{v:6.3f}" for v in values))
        lines.append(f"chosen T = {self.chosen_T} (highest validation R@{self.recall_k})")
        return "\n".join(lines)


def pick_best_t(validation_by_t: Mapping[int, float]) -> int:
    """Argmax of validation R@K over T; ties resolve to the smallest T."""
    best_t = None
    best = -1.0
    for t in sorted(validation_by_t):
        if validation_by_t[t] > best:
            best = validation_by_t[t]
            best_t = t
    return best_t


def sweep_T(
    corpus: Corpus,
    train_emb: EmbeddingMatrix,
    val_queries: Sequence[QueryRecord],
    val_emb: EmbeddingMatrix,
    test_queries: Sequence[QueryRecord],
    test_emb: EmbeddingMatrix,
    t_min: int,
    t_max: int,
    config: TrainConfig = TrainConfig(),
    k_retrieve: int = 10,
    recall_k: int = 5,
    top_words_n: int = 10,
    word_vectors: Mapping[str, np.ndarray] | None = None,
    verify_oracle: bool = False,
) -> SweepResult:
    """Train, index, and evaluate once per T in [t_min, t_max]."""
    if not 1 <= t_min <= t_max:
        raise ValidationError(f"need 1 <= t_min <= t_max, got [{t_min}, {t_max}]")
    if t_max > train_emb.count:
        raise ValidationError(f"t_max={t_max} exceeds training count {train_emb.count}")
    if word_vectors is None:
        word_vectors = derive_word_vectors(corpus, train_emb)
    per_t: dict[int, SweepEntry] = {}
    for t in range(t_min, t_max + 1):
        model = train_topics(train_emb, t, config)
        assignment = assign_corpus(model, train_emb)
        index = build_index(corpus, split_by_assignment(train_emb, assignment, t))

        def evaluate(queries: Sequence[QueryRecord], emb: EmbeddingMatrix) -> float:
            report = run_eval(
                index,
                corpus,
                queries,
                emb,
                weights_for=weights_from_model(model),
                k_retrieve=k_retrieve,
                recall_k=recall_k,
                metrics=("r@k",),
                verify_oracle=verify_oracle,
            )
            return report.aggregate["recall_at_k"]

        coherence = topic_coherence(
            top_words(model, corpus, assignment, top_words_n), word_vectors
        )
        per_t[t] = SweepEntry(
            validation_r_at_k=evaluate(val_queries, val_emb),
            test_r_at_k=evaluate(test_queries, test_emb),
            coherence=coherence,
        )
    return SweepResult(
        per_T=per_t,
        chosen_T=pick_best_t({t: e.validation_r_at_k for t, e in per_t.items()}),
        recall_k=recall_k,
    )


@dataclass(frozen=True)
class SweepAggregate:
    """Mean/stdev over repeated sweeps with distinct seeds."""

    runs: int
    mean: SweepResult
    stdev_validation: dict[int, float]
    stdev_test: dict[int, float]

    def to_dict(self) -> dict:
        out = self.mean.to_dict()
        out["runs"] = self.runs
        if self.runs > 1:
            out["stdev"] = {
                str(t): {
                    "validation": self.stdev_validation[t],
                    "test": self.stdev_test[t],
                }
                for t in sorted(self.stdev_validation)
            }
        return out


def aggregate_sweeps(results: Sequence[SweepResult]) -> SweepAggregate:
    """Combine repeated runs: per-cell means, stdevs, re-picked chosen_T."""
    if not results:
        raise ValidationError("no sweep results to aggregate")
    ts = sorted(results[0].per_T)
    recall_k = results[0].recall_k
    for r in results[1:]:
        if sorted(r.per_T) != ts:
            raise ValidationError("sweep runs cover different T ranges")
    mean_entries: dict[int, SweepEntry] = {}
    std_val: dict[int, float] = {}
    std_test: dict[int, float] = {}
    for t in ts:
        vals = np.asarray([r.per_T[t].validation_r_at_k for r in results])
        tests = np.asarray([r.per_T[t].test_r_at_k for r in results])
        cohs = np.asarray([r.per_T[t].coherence for r in results])
        mean_entries[t] = SweepEntry(
            validation_r_at_k=float(vals.mean()),
            test_r_at_k=float(tests.mean()),
            coherence=float(cohs.mean()),
        )
        std_val[t] = float(vals.std(ddof=0))
        std_test[t] = float(tests.std(ddof=0))
    mean_result = SweepResult(
        per_T=mean_entries,
        chosen_T=pick_best_t({t: e.validation_r_at_k for t, e in mean_entries.items()}),
        recall_k=recall_k,
    )
    return SweepAggregate(
        runs=len(results),
        mean=mean_result,
        stdev_validation=std_val,
        stdev_test=std_test,
    )


def sweep_to_json(aggregate: SweepAggregate) -> str:
    return json.dumps(aggregate.to_dict(), sort_keys=True, indent=2) + "\n"
