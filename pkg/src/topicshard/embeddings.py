"""Dense vector storage and the bit-exact "EMB1" file format.

Layout (all little-endian):

    magic   4 bytes  b"EMB1"
    dim     u32
    count   u64
    then `count` records of:
        id_len  u32
        id      id_len bytes, UTF-8
        vector  dim float32 components

A write-then-read round trip is bitwise exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import FormatError, ValidationError

MAGIC = b"EMB1"
_HEADER = struct.Struct("<IQ")
_IDLEN = struct.Struct("<I")


class EmbeddingMatrix:
    """Float32 vectors aligned to an ordered list of unique string ids."""

    def __init__(self, ids: list[str] | tuple[str, ...], vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValidationError("vectors must be a 2-D array")
        if vectors.shape[1] < 1:
            raise ValidationError("embedding dim must be >= 1")
        if len(ids) != vectors.shape[0]:
            raise ValidationError(
                f"{len(ids)} ids for {vectors.shape[0]} vector rows"
            )
        if not np.all(np.isfinite(vectors)):
            r, c = np.argwhere(~np.isfinite(vectors))[0]
            raise ValidationError(f"non-finite value at row {r}, column {c}")
        index: dict[str, int] = {}
        for i, pid in enumerate(ids):
            if pid in index:
                raise ValidationError(f"duplicate embedding id {pid!r}")
            index[pid] = i
        self._ids = tuple(ids)
        vectors.flags.writeable = False  # instances are shared read-only
        self._vectors = vectors
        self._index = index

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def dim(self) -> int:
        return int(self._vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self._vectors.shape[0])

    def __contains__(self, vec_id: str) -> bool:
        return vec_id in self._index

    def row(self, vec_id: str) -> np.ndarray:
        try:
            return self._vectors[self._index[vec_id]]
        except KeyError:
            raise ValidationError(f"unknown embedding id {vec_id!r}") from None

    def select(self, ids: list[str]) -> "EmbeddingMatrix":
        """Sub-matrix for `ids` in the given order."""
        rows = [self._index[i] if i in self._index else -1 for i in ids]
        missing = [i for i, r in zip(ids, rows) if r < 0]
        if missing:
            raise ValidationError(f"unknown embedding id {missing[0]!r}")
        if rows:
            return EmbeddingMatrix(ids, self._vectors[np.asarray(rows)])
        return EmbeddingMatrix([], np.empty((0, self.dim), dtype=np.float32))


def write_embeddings(emb: EmbeddingMatrix, path: str | Path) -> None:
    """Write the EMB1 binary layout; deterministic byte-for-byte."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(emb.dim, emb.count))
        vecs = emb.vectors.astype("<f4", copy=False)
        for i, vec_id in enumerate(emb.ids):
            raw = vec_id.encode("utf-8")
            fh.write(_IDLEN.pack(len(raw)))
            fh.write(raw)
            fh.write(vecs[i].tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an EMB1 file, validating the declared layout exactly."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes (expected EMB1)")
    if len(data) < 4 + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    dim, count = _HEADER.unpack_from(data, 4)
    if dim < 1:
        raise FormatError(f"{path}: declared dim must be >= 1")
    offset = 4 + _HEADER.size
    vec_bytes = 4 * dim
    ids: list[str] = []
    seen: set[str] = set()
    rows = np.empty((count, dim), dtype=np.float32)
    for r in range(count):
        if offset + _IDLEN.size > len(data):
            raise FormatError(f"{path}: unexpected end of file after row {r}")
        (id_len,) = _IDLEN.unpack_from(data, offset)
        offset += _IDLEN.size
        if offset + id_len + vec_bytes > len(data):
            raise FormatError(f"{path}: unexpected end of file after row {r}")
        vec_id = data[offset:offset + id_len].decode("utf-8")
        offset += id_len
        row = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += vec_bytes
        bad = np.flatnonzero(~np.isfinite(row))
        if bad.size:
            raise FormatError(
                f"{path}: non-finite value at row {r}, column {int(bad[0])}"
            )
        if vec_id in seen:
            raise FormatError(f"{path}: duplicate id {vec_id!r} at row {r}")
        seen.add(vec_id)
        ids.append(vec_id)
        rows[r] = row
    if offset != len(data):
        raise FormatError(
            f"{path}: {len(data) - offset} trailing bytes after declared {count} rows"
        )
    return EmbeddingMatrix(ids, rows)


@dataclass(frozen=True)
class AlignmentReport:
    """Outcome of checking a corpus against an embedding matrix."""

    missing_embeddings: tuple[str, ...]  # passage ids with no vector
    extraneous_ids: tuple[str, ...]      # vector ids not in the corpus
    order_matches: bool

    @property
    def aligned(self) -> bool:
        return not self.missing_embeddings and not self.extraneous_ids and self.order_matches

    def to_dict(self) -> dict:
        return {
            "aligned": self.aligned,
            "missing_embeddings": list(self.missing_embeddings),
            "extraneous_ids": list(self.extraneous_ids),
            "order_matches": self.order_matches,
        }


def validate_alignment(corpus: Corpus, emb: EmbeddingMatrix) -> AlignmentReport:
    """Report-only comparison of corpus passage ids vs. embedding ids."""
    corpus_ids = corpus.passage_ids
    emb_ids = set(emb.ids)
    missing = tuple(pid for pid in corpus_ids if pid not in emb_ids)
    extraneous = tuple(e for e in emb.ids if e not in corpus)
    common_corpus = [pid for pid in corpus_ids if pid in emb_ids]
    common_emb = [e for e in emb.ids if e in corpus]
    return AlignmentReport(
        missing_embeddings=missing,
        extraneous_ids=extraneous,
        order_matches=common_corpus == common_emb,
    )
