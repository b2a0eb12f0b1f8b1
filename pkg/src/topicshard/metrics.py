"""Retrieval and generation quality measures.

R@K and page-level P@1 score retrieval; unigram F1 and its page-gated
variant score generated responses against references.  The shared tokenizer
(lowercase, strip punctuation, whitespace split) is frozen here because every
downstream number depends on it.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .corpus import Corpus, Turn
from .errors import ValidationError

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation characters, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def history_token_count(turns: Sequence[Turn]) -> int:
    """Token count of the concatenated turn texts, same tokenizer as F1."""
    return len(tokenize(" ".join(t.text for t in turns)))


def recall_at_k(retrieved: Sequence[str], gold: Iterable[str], k: int) -> float:
    """|gold intersect first-K retrieved| / |gold|."""
    gold_set = set(gold)
    if not gold_set:
        raise ValidationError("gold passage set is empty")
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    hits = gold_set & set(retrieved[:k])
    return len(hits) / len(gold_set)


def precision_at_1_page(top1_passage_id: str, gold_page_id: str, corpus: Corpus) -> int:
    """1 iff the top-1 passage lies on the gold page, else 0."""
    return 1 if corpus.page_of(top1_passage_id) == gold_page_id else 0


def unigram_f1(candidate: str, reference: str) -> float:
    """Token-multiset F1 between candidate and reference text."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    counts: dict[str, int] = {}
    for tok in cand:
        counts[tok] = counts.get(tok, 0) + 1
    overlap = 0
    for tok in ref:
        if counts.get(tok, 0) > 0:
            counts[tok] -= 1
            overlap += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def kilt_f1(f1: float, page_hit: int) -> float:
    """F1 gated to zero unless the gold page was retrieved at rank 1."""
    if not 0.0 <= f1 <= 1.0:
        raise ValidationError(f"f1 must be in [0, 1], got {f1}")
    if page_hit not in (0, 1):
        raise ValidationError(f"page_hit must be 0 or 1, got {page_hit}")
    return f1 * page_hit


def pearson_length_f1(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Sample Pearson r between history length and F1, plus two-tailed p.

    The p-value comes from the t statistic with n-2 degrees of freedom.
    """
    n = len(pairs)
    if n < 2:
        raise ValidationError(f"need at least 2 pairs, got {n}")
    x = np.asarray([p[0] for p in pairs], dtype=np.float64)
    y = np.asarray([p[1] for p in pairs], dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("zero variance in one coordinate")
    r = float(dx @ dy) / math.sqrt(sx * sy)
    r = max(-1.0, min(1.0, r))
    if n == 2 or 1.0 - r * r <= 0.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 2))
    return r, p


@dataclass
class QueryMetrics:
    """Per-query metric values; None means the metric was not requested."""

    recall_at_k: float | None = None
    p_at_1: int | None = None
    f1: float | None = None
    kilt_f1: float | None = None
    history_length_tokens: int = 0

    def to_dict(self) -> dict:
        out: dict = {"history_length_tokens": self.history_length_tokens}
        for name in ("recall_at_k", "p_at_1", "f1", "kilt_f1"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass
class EvalReport:
    """Per-query and aggregate metric values for one retrieval/scoring run."""

    per_query: dict[str, QueryMetrics]
    k_used: int
    pearson_length_f1: float | None = None
    pearson_p_value: float | None = None
    aggregate: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.aggregate:
            self.aggregate = self._compute_aggregate()

    def _compute_aggregate(self) -> dict[str, float]:
        agg: dict[str, float] = {}
        for name in ("recall_at_k", "p_at_1", "f1", "kilt_f1", "history_length_tokens"):
            values = [
                getattr(m, name)
                for m in self.per_query.values()
                if getattr(m, name) is not None
            ]
            if values:
                agg[name] = float(np.mean(values))
        return agg

    def to_dict(self) -> dict:
        out = {
            "aggregate": self.aggregate,
            "per_query": {qid: m.to_dict() for qid, m in self.per_query.items()},
            "k_used": self.k_used,
        }
        if self.pearson_length_f1 is not None:
            out["pearson_length_f1"] = self.pearson_length_f1
            out["pearson_p_value"] = self.pearson_p_value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def render_table(self) -> str:
        """Aligned two-column table of aggregate values."""
        rows = [(k, f"{v:.4f}") for k, v in sorted(self.aggregate.items())]
        if self.pearson_length_f1 is not None:
            rows.append(("pearson_length_f1", f"{self.pearson_length_f1:.4f}"))
            rows.append(("pearson_p_value", f"{self.pearson_p_value:.4g}"))
        rows.append(("k_used", str(self.k_used)))
        rows.append(("queries", str(len(self.per_query))))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)
