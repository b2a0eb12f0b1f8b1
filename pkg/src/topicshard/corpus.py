"""Domain types for the knowledge base and JSON Lines ingestion.

A corpus is an ordered list of passages grouped into pages; queries are
dialogue histories with optional gold labels.  Both load from UTF-8 JSON
Lines files (one object per line, unknown keys ignored).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class Passage:
    id: str
    page_id: str
    text: str


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str


@dataclass(frozen=True)
class QueryRecord:
    """One dialogue-history query with optional evaluation targets."""

    id: str
    turns: tuple[Turn, ...]
    gold_page_id: str | None = None
    gold_passage_ids: frozenset[str] | None = None
    reference_response: str | None = None
    candidate_response: str | None = None

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValidationError(f"query {self.id!r} has no turns")
        if self.gold_passage_ids is not None and not self.gold_passage_ids:
            raise ValidationError(f"query {self.id!r}: gold_passage_ids present but empty")


class Corpus:
    """Ordered passages plus the derived page_id -> passage ids grouping.

    The page map is always recomputed from the passages, never stored, so it
    cannot drift.  Instances are immutable after construction.
    """

    def __init__(self, passages: list[Passage] | tuple[Passage, ...]):
        if not passages:
            raise ValidationError("corpus is empty")
        by_id: dict[str, Passage] = {}
        pages: dict[str, list[str]] = {}
        for p in passages:
            if not p.id:
                raise ValidationError("passage with empty id")
            if not p.page_id:
                raise ValidationError(f"passage {p.id!r} has empty page_id")
            if p.id in by_id:
                raise ValidationError(f"duplicate passage id {p.id!r}")
            by_id[p.id] = p
            pages.setdefault(p.page_id, []).append(p.id)
        self._passages = tuple(passages)
        self._by_id = by_id
        self._pages = {k: tuple(v) for k, v in pages.items()}

    @property
    def passages(self) -> tuple[Passage, ...]:
        return self._passages

    @property
    def pages(self) -> dict[str, tuple[str, ...]]:
        return dict(self._pages)

    @property
    def passage_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self._passages)

    def __len__(self) -> int:
        return len(self._passages)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._by_id

    def get(self, passage_id: str) -> Passage:
        try:
            return self._by_id[passage_id]
        except KeyError:
            raise ValidationError(f"unknown passage id {passage_id!r}") from None

    def page_of(self, passage_id: str) -> str:
        return self.get(passage_id).page_id

    def content_hash(self) -> str:
        """SHA-256 over the ordered passage content; stable across formats."""
        h = hashlib.sha256()
        for p in self._passages:
            h.update(p.id.encode("utf-8"))
            h.update(b"\x1f")
            h.update(p.page_id.encode("utf-8"))
            h.update(b"\x1f")
            h.update(p.text.encode("utf-8"))
            h.update(b"\x1e")
        return h.hexdigest()


def _parse_lines(path: str | Path) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise FormatError(f"{path}: line {lineno} is not a JSON object")
            records.append((lineno, obj))
    return records


def _require(obj: dict, key: str, path: str | Path, lineno: int) -> object:
    if key not in obj:
        raise FormatError(f"{path}: line {lineno} missing required field {key!r}")
    return obj[key]


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus from JSON Lines ({"id", "page_id", "text"} per line).

    Passage order equals file order.  Raises FormatError for malformed lines
    (with the line number), duplicate ids, or an empty file.
    """
    records = _parse_lines(path)
    if not records:
        raise FormatError(f"{path}: empty corpus file")
    passages: list[Passage] = []
    seen: dict[str, int] = {}
    for lineno, obj in records:
        pid = str(_require(obj, "id", path, lineno))
        if pid in seen:
            raise FormatError(
                f"{path}: duplicate passage id {pid!r} on line {lineno}"
                f" (first seen on line {seen[pid]})"
            )
        seen[pid] = lineno
        passages.append(
            Passage(
                id=pid,
                page_id=str(_require(obj, "page_id", path, lineno)),
                text=str(_require(obj, "text", path, lineno)),
            )
        )
    return Corpus(passages)


def load_queries(path: str | Path) -> list[QueryRecord]:
    """Load query records from JSON Lines; see the query file schema."""
    records = _parse_lines(path)
    if not records:
        raise FormatError(f"{path}: empty query file")
    queries: list[QueryRecord] = []
    seen: dict[str, int] = {}
    for lineno, obj in records:
        qid = str(_require(obj, "id", path, lineno))
        if qid in seen:
            raise FormatError(
                f"{path}: duplicate query id {qid!r} on line {lineno}"
                f" (first seen on line {seen[qid]})"
            )
        seen[qid] = lineno
        raw_turns = _require(obj, "turns", path, lineno)
        if not isinstance(raw_turns, list):
            raise FormatError(f"{path}: line {lineno}: turns must be a list")
        turns = tuple(
            Turn(speaker=str(t.get("speaker", "")), text=str(t.get("text", "")))
            for t in raw_turns
        )
        gold_pids = obj.get("gold_passage_ids")
        try:
            queries.append(
                QueryRecord(
                    id=qid,
                    turns=turns,
                    gold_page_id=obj.get("gold_page_id"),
                    gold_passage_ids=(
                        frozenset(str(x) for x in gold_pids) if gold_pids is not None else None
                    ),
                    reference_response=obj.get("reference_response"),
                    candidate_response=obj.get("candidate_response"),
                )
            )
        except ValidationError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
    return queries


def write_queries(queries: list[QueryRecord], path: str | Path) -> None:
    """Serialize query records back to the JSON Lines schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            obj: dict = {
                "id": q.id,
                "turns": [{"speaker": t.speaker, "text": t.text} for t in q.turns],
            }
            if q.gold_page_id is not None:
                obj["gold_page_id"] = q.gold_page_id
            if q.gold_passage_ids is not None:
                obj["gold_passage_ids"] = sorted(q.gold_passage_ids)
            if q.reference_response is not None:
                obj["reference_response"] = q.reference_response
            if q.candidate_response is not None:
                obj["candidate_response"] = q.candidate_response
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus back to the JSON Lines schema (ingestion order)."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.passages:
            fh.write(json.dumps({"id": p.id, "page_id": p.page_id, "text": p.text},
                                sort_keys=True) + "\n")
