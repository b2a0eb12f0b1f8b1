"""Topic-sharded dense passage retrieval.

The knowledge base is partitioned into T topic shards, each a flat dense
index; a query carries a topic distribution w, and relevance is the
topic-weighted dot product, with per-shard top-K candidates merged into a
global top-K.  Includes the topic model, the T-selection sweep, and the
retrieval/generation evaluation metrics.
"""

from .corpus import Corpus, Passage, QueryRecord, Turn, load_corpus, load_queries
from .embeddings import (
    AlignmentReport,
    EmbeddingMatrix,
    load_embeddings,
    validate_alignment,
    write_embeddings,
)
from .index import (
    ScoredPassage,
    Shard,
    ShardedIndex,
    build_index,
    load_index,
    oracle_retrieve,
    retrieve,
    save_index,
    shard_topk,
    split_by_assignment,
)
from .metrics import (
    EvalReport,
    kilt_f1,
    pearson_length_f1,
    precision_at_1_page,
    recall_at_k,
    unigram_f1,
)
from .topics import (
    TopicDistribution,
    TopicModel,
    TrainConfig,
    assign_cluster,
    assign_corpus,
    infer_distribution,
    load_topic_model,
    save_topic_model,
    top_words,
    topic_coherence,
    train_topics,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport",
    "Corpus",
    "EmbeddingMatrix",
    "EvalReport",
    "Passage",
    "QueryRecord",
    "ScoredPassage",
    "Shard",
    "ShardedIndex",
    "TopicDistribution",
    "TopicModel",
    "TrainConfig",
    "Turn",
    "assign_cluster",
    "assign_corpus",
    "build_index",
    "infer_distribution",
    "kilt_f1",
    "load_corpus",
    "load_embeddings",
    "load_index",
    "load_queries",
    "load_topic_model",
    "oracle_retrieve",
    "pearson_length_f1",
    "precision_at_1_page",
    "recall_at_k",
    "retrieve",
    "save_index",
    "save_topic_model",
    "shard_topk",
    "split_by_assignment",
    "top_words",
    "topic_coherence",
    "train_topics",
    "unigram_f1",
    "validate_alignment",
    "write_embeddings",
]
