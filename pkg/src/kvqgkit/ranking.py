"""Two-phase triplet ranking against a caption.

Phase one keeps candidates whose external entity scores inside a band
against the caption (weeding both off-topic and trivially-entailed
knowledge); phase two scores the verbalized triplet, applies the same
band, and sorts.  Both bounds are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .kg import KnowledgeIndex, KnowledgeTriplet
from .scorers import Scorer
from .templates import render

DEFAULT_TOP_K = 10


@dataclass(frozen=True, slots=True)
class ScoreBand:
    """Inclusive [lo, hi] acceptance interval for scores."""

    lo: float = 0.2
    hi: float = 0.8

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid score band [{self.lo}, {self.hi}]")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True, slots=True)
class RankedCandidate:
    """A candidate triplet with the entities and scores the ranking used.

    ``object_entity`` is the caption object the triplet was retrieved
    for; ``external_entity`` is the opposite endpoint, the knowledge the
    triplet would add on top of the caption.
    """

    triplet: KnowledgeTriplet
    object_entity: str
    external_entity: str
    topic_score: float | None = None
    sentence_score: float | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "triplet": self.triplet.to_dict(),
            "object_entity": self.object_entity,
            "external_entity": self.external_entity,
            "sentence": render(self.triplet),
        }
        if self.topic_score is not None:
            out["topic_score"] = self.topic_score
        if self.sentence_score is not None:
            out["sentence_score"] = self.sentence_score
        return out


def build_candidates(objects: Sequence[str], index: KnowledgeIndex) -> list[RankedCandidate]:
    """One-step neighborhood union over the caption objects, deduplicated.

    Objects are queried in order and each triplet is kept once, annotated
    with the endpoint opposite the object that first retrieved it.
    """
    object_set = set(objects)
    seen: set[tuple] = set()
    candidates: list[RankedCandidate] = []
    for obj in objects:
        for triplet in index.neighbors(obj):
            if triplet.key() in seen:
                continue
            seen.add(triplet.key())
            external = triplet.tail if triplet.head == obj else triplet.head
            candidates.append(
                RankedCandidate(triplet=triplet, object_entity=obj, external_entity=external)
            )
    return candidates


def filter_by_topic(
    candidates: Sequence[RankedCandidate],
    caption: str,
    scorer: Scorer,
    band: ScoreBand = ScoreBand(),
) -> list[RankedCandidate]:
    """Keep candidates whose external entity scores inside the band.

    Order is preserved and the topic score is recorded on survivors.
    Scorer failures propagate; a candidate is never dropped silently.
    """
    scores = scorer.score_many([(caption, c.external_entity) for c in candidates])
    return [
        replace(candidate, topic_score=score)
        for candidate, score in zip(candidates, scores)
        if band.contains(score)
    ]


def rank_by_sentence(
    candidates: Sequence[RankedCandidate],
    caption: str,
    scorer: Scorer,
    band: ScoreBand = ScoreBand(),
    render_fn: Callable[[KnowledgeTriplet], str] = render,
) -> list[RankedCandidate]:
    """Score verbalized triplets, drop those outside the band, and sort.

    Sorting is by descending sentence score; ties break by ascending
    lexicographic order of the verbalized sentence.
    """
    sentences = [render_fn(c.triplet) for c in candidates]
    scores = scorer.score_many([(caption, s) for s in sentences])
    survivors = [
        (replace(candidate, sentence_score=score), sentence)
        for candidate, score, sentence in zip(candidates, scores, sentences)
        if band.contains(score)
    ]
    survivors.sort(key=lambda pair: (-pair[0].sentence_score, pair[1]))
    return [candidate for candidate, _ in survivors]


def top_k(ranked: Sequence[RankedCandidate], k: int = DEFAULT_TOP_K) -> list[RankedCandidate]:
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return list(ranked[:k])


def rank_candidates(
    caption: str,
    objects: Sequence[str],
    index: KnowledgeIndex,
    topic_scorer: Scorer,
    sentence_scorer: Scorer | None = None,
    band: ScoreBand = ScoreBand(),
    k: int = DEFAULT_TOP_K,
) -> list[RankedCandidate]:
    """Full retrieval-filter-rank pipeline for one caption."""
    sentence_scorer = sentence_scorer if sentence_scorer is not None else topic_scorer
    candidates = build_candidates(objects, index)
    candidates = filter_by_topic(candidates, caption, topic_scorer, band)
    ranked = rank_by_sentence(candidates, caption, sentence_scorer, band)
    return top_k(ranked, k)
