"""Commonsense knowledge store: dump parsing, indexing, neighbor lookup.

The source format is the tab-separated assertion dump used by ConceptNet
style releases: five fields per line (edge URI, relation URI, start URI,
end URI, JSON metadata).  Only English concepts and a closed set of
fourteen relations are retained.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, TextIO, Union


class Relation(Enum):
    """Closed set of relations kept when parsing an assertion dump."""

    HAS_A = "HasA"
    USED_FOR = "UsedFor"
    CAPABLE_OF = "CapableOf"
    AT_LOCATION = "AtLocation"
    HAS_SUBEVENT = "HasSubEvent"
    HAS_PREREQUISITE = "HasPrerequisite"
    HAS_PROPERTY = "HasProperty"
    CAUSES = "Causes"
    CREATED_BY = "CreatedBy"
    DEFINED_AS = "DefinedAs"
    DESIRES = "Desires"
    MADE_OF = "MadeOf"
    NOT_DESIRES = "NotDesires"
    RECEIVES_ACTION = "ReceivesAction"

    @classmethod
    def from_label(cls, label: str) -> "Relation | None":
        """Map a relation URI or bare label to a member, or None.

        Matching is case-insensitive so that dump spellings such as
        ``/r/HasSubevent`` resolve to the canonical member.
        """
        text = label.strip()
        if text.startswith("/r/"):
            text = text[3:]
        return _RELATION_BY_LOWER.get(text.lower())


_RELATION_BY_LOWER = {member.value.lower(): member for member in Relation}

RELATION_NAMES = tuple(member.value for member in Relation)


def normalize_concept(raw: str) -> str:
    """Reduce a concept URI or label to a plain lowercase label.

    Strips the ``/c/<lang>/`` prefix and any sense suffix, turns
    underscores into single spaces, and lowercases.  Idempotent: feeding
    the output back in returns it unchanged.
    """
    text = raw.strip()
    if text.startswith("/"):
        parts = text.split("/")
        text = parts[3] if len(parts) > 3 else ""
    text = text.replace("_", " ").replace("/", " ").lower()
    return " ".join(text.split())


@dataclass(frozen=True, slots=True)
class KnowledgeTriplet:
    """One directed edge.  Equality and hashing ignore the weight."""

    head: str
    relation: Relation
    tail: str
    weight: float = field(default=1.0, compare=False)

    def key(self) -> tuple[str, Relation, str]:
        return (self.head, self.relation, self.tail)

    def to_dict(self) -> dict:
        return {"head": self.head, "relation": self.relation.value, "tail": self.tail}


@dataclass(frozen=True, slots=True)
class IndexCounts:
    entities: int
    relations: int
    triplets: int


@dataclass(frozen=True, slots=True)
class SkippedLine:
    line_no: int
    reason: str


class KnowledgeIndex:
    """Edge list plus a label -> edge adjacency map.

    The index is append-only while being built and treated as immutable
    afterwards; every accessor returns fresh containers.
    """

    def __init__(self) -> None:
        self._edges: list[KnowledgeTriplet] = []
        self._adjacency: dict[str, list[int]] = {}
        self._position: dict[tuple[str, Relation, str], int] = {}

    def add(self, triplet: KnowledgeTriplet) -> None:
        """Insert an edge, collapsing duplicates onto the max weight."""
        pos = self._position.get(triplet.key())
        if pos is None:
            pos = len(self._edges)
            self._edges.append(triplet)
            self._position[triplet.key()] = pos
            self._adjacency.setdefault(triplet.head, []).append(pos)
            if triplet.tail != triplet.head:
                self._adjacency.setdefault(triplet.tail, []).append(pos)
        elif triplet.weight > self._edges[pos].weight:
            self._edges[pos] = replace(self._edges[pos], weight=triplet.weight)

    @property
    def edges(self) -> list[KnowledgeTriplet]:
        return list(self._edges)

    def __len__(self) -> int:
        return len(self._edges)

    def __contains__(self, triplet: KnowledgeTriplet) -> bool:
        return triplet.key() in self._position

    def neighbors(self, concept: str) -> list[KnowledgeTriplet]:
        """Every edge where the concept appears as head or tail.

        Returned in insertion order; unknown concepts yield an empty list.
        """
        label = normalize_concept(concept)
        return [self._edges[i] for i in self._adjacency.get(label, ())]

    def counts(self) -> IndexCounts:
        return IndexCounts(
            entities=len(self._adjacency),
            relations=len({edge.relation for edge in self._edges}),
            triplets=len(self._edges),
        )

    # --- serialization ---

    def save(self, path: Union[str, Path]) -> None:
        payload = {
            "format": "kg-index@1",
            "edges": [[e.head, e.relation.value, e.tail, e.weight] for e in self._edges],
        }
        text = json.dumps(payload, ensure_ascii=False)
        path = Path(path)
        if path.suffix == ".gz":
            with gzip.open(path, "wt", encoding="utf-8") as fh:
                fh.write(text)
        else:
            path.write_text(text, encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "KnowledgeIndex":
        path = Path(path)
        if path.suffix == ".gz":
            with gzip.open(path, "rt", encoding="utf-8") as fh:
                payload = json.load(fh)
        else:
            payload = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(payload, dict) or payload.get("format") != "kg-index@1":
            raise ValueError(f"not a serialized knowledge index: {path}")
        index = cls()
        for head, rel, tail, weight in payload["edges"]:
            relation = Relation.from_label(rel)
            if relation is None:
                raise ValueError(f"unknown relation in serialized index: {rel}")
            index.add(KnowledgeTriplet(head, relation, tail, float(weight)))
        return index

    @classmethod
    def from_edges(cls, edges: Iterable[KnowledgeTriplet]) -> "KnowledgeIndex":
        index = cls()
        for edge in edges:
            index.add(edge)
        return index


@dataclass
class ParseResult:
    index: KnowledgeIndex
    skipped: list[SkippedLine]
    lines_read: int
    edges_kept: int


def _open_dump(source: Union[str, Path, TextIO, Iterable[str]]) -> tuple[Iterator[str], bool]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.suffix == ".gz":
            return iter(gzip.open(path, "rt", encoding="utf-8")), True
        return iter(open(path, "r", encoding="utf-8")), True
    return iter(source), False


def parse_dump(
    source: Union[str, Path, TextIO, Iterable[str]],
    relations: Iterable[Relation] | None = None,
) -> ParseResult:
    """Parse an assertion dump into a KnowledgeIndex.

    Lines whose relation is outside the retained set, or whose endpoints
    are not both English concepts, are silently filtered.  Structurally
    broken lines are skipped and reported with their line number; an
    unreadable source raises.
    """
    wanted = frozenset(relations) if relations is not None else frozenset(Relation)
    relation_lookup = {f"/r/{m.value.lower()}": m for m in wanted}
    index = KnowledgeIndex()
    skipped: list[SkippedLine] = []
    label_cache: dict[str, str] = {}
    lines_read = 0
    edges_kept = 0

    lines, owns = _open_dump(source)
    try:
        for line_no, line in enumerate(lines, start=1):
            lines_read += 1
            stripped = line.rstrip("\n")
            if not stripped.strip():
                continue
            parts = stripped.split("\t")
            if len(parts) != 5:
                skipped.append(
                    SkippedLine(line_no, f"expected 5 tab-separated fields, got {len(parts)}")
                )
                continue
            _, rel_uri, start_uri, end_uri, meta = parts
            relation = relation_lookup.get(rel_uri.lower().strip())
            if relation is None:
                continue
            if not (start_uri.startswith("/c/en/") and end_uri.startswith("/c/en/")):
                continue
            head = label_cache.get(start_uri)
            if head is None:
                head = label_cache[start_uri] = normalize_concept(start_uri)
            tail = label_cache.get(end_uri)
            if tail is None:
                tail = label_cache[end_uri] = normalize_concept(end_uri)
            if not head or not tail:
                skipped.append(SkippedLine(line_no, "empty concept label after normalization"))
                continue
            weight = 1.0
            meta = meta.strip()
            if meta:
                try:
                    payload = json.loads(meta)
                except ValueError:
                    skipped.append(SkippedLine(line_no, "invalid JSON metadata"))
                    continue
                if isinstance(payload, dict) and "weight" in payload:
                    try:
                        weight = float(payload["weight"])
                    except (TypeError, ValueError):
                        skipped.append(SkippedLine(line_no, "non-numeric weight"))
                        continue
                    if weight < 0:
                        skipped.append(SkippedLine(line_no, "negative weight"))
                        continue
            index.add(KnowledgeTriplet(head, relation, tail, weight))
            edges_kept += 1
    finally:
        if owns:
            lines.close()  # type: ignore[attr-defined]

    return ParseResult(index=index, skipped=skipped, lines_read=lines_read, edges_kept=edges_kept)


def write_skip_report(skipped: Iterable[SkippedLine], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in skipped:
            fh.write(f"line {item.line_no}: {item.reason}\n")
