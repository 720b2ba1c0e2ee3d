"""Dataset assembly: samples, caption ingestion, validation, split, stats.

A sample ties together one image caption, one knowledge triplet, the
triplet's verbalization, and an annotated question/answer pair.  Files
are canonical JSON (sorted keys, two-space indent, trailing newline) so
that save(load(x)) is byte-identical.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from .kg import KnowledgeTriplet, Relation
from .nlp import Lexicon, default_lexicon, extract_nouns, singularize, tag_text
from .nlp import ADJ, NOUN, VERB
from .templates import TEMPLATES, render


class DatasetFormatError(ValueError):
    """A dataset file violates the expected record layout."""


@dataclass(frozen=True, slots=True)
class Provenance:
    dataset_name: str
    scene_class: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"dataset_name": self.dataset_name}
        if self.scene_class is not None:
            out["scene_class"] = self.scene_class
        return out


@dataclass(frozen=True, slots=True)
class Sample:
    id: str
    image: str
    caption: str
    triplet: KnowledgeTriplet
    knowledge_sentence: str
    question: str
    answer: str
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "image": self.image,
            "caption": self.caption,
            "triplet": self.triplet.to_dict(),
            "knowledge_sentence": self.knowledge_sentence,
            "question": self.question,
            "answer": self.answer,
            "provenance": self.provenance.to_dict(),
        }


# --- caption ingestion ---


def ingest_nwpu_caption(captions: Sequence[str], seed: int) -> str:
    """Pick one caption uniformly at random, reproducibly for a seed."""
    if not captions:
        raise ValueError("caption set is empty")
    rng = random.Random(seed)
    return captions[rng.randrange(len(captions))]


def ingest_textrs_caption(captions: Sequence[str]) -> str:
    """Join per-image sentences into one caption.

    Sentences are joined with '. '; duplicate terminal periods collapse
    so an already-terminated sentence does not double up.  The last
    sentence keeps whatever terminal punctuation it had.
    """
    cleaned = [c.strip() for c in captions if c.strip()]
    if not cleaned:
        raise ValueError("caption set is empty")
    parts = [re.sub(r"\.+$", "", c).rstrip() for c in cleaned[:-1]]
    last = re.sub(r"\.{2,}$", ".", cleaned[-1])
    return ". ".join(parts + [last])


# --- validation ---


def _reproducible_sentences(sample: Sample) -> list[str]:
    triplet = sample.triplet
    predicate = TEMPLATES[triplet.relation]
    return [
        render(triplet),
        f"{sample.answer} {predicate} {triplet.tail}",
        f"{triplet.head} {predicate} {sample.answer}",
    ]


def validate(sample: Sample) -> list[str]:
    """Return every invariant violation (empty list means valid)."""
    violations: list[str] = []
    if not sample.caption.strip():
        violations.append("caption-empty")
    if not sample.knowledge_sentence.strip():
        violations.append("knowledge-sentence-empty")
    if not sample.question.strip():
        violations.append("question-empty")
    if not sample.answer.strip():
        violations.append("answer-empty")
    relation_ok = isinstance(sample.triplet.relation, Relation)
    if not relation_ok:
        violations.append("relation-not-in-R")
    if sample.answer.strip() and sample.answer.lower() not in sample.caption.lower():
        violations.append("answer-not-in-caption")
    if relation_ok and sample.knowledge_sentence.strip():
        if sample.knowledge_sentence not in _reproducible_sentences(sample):
            violations.append("knowledge-sentence-not-reproducible")
    return violations


# --- split ---


@dataclass(frozen=True, slots=True)
class SplitSpec:
    train_ratio: int = 4
    val_ratio: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_ratio <= 0 or self.val_ratio <= 0:
            raise ValueError("split ratios must be positive")


def split(samples: Sequence[Sample], spec: SplitSpec = SplitSpec()) -> tuple[list[Sample], list[Sample]]:
    """Seeded shuffle then ratio cut; val size = round(n * val / total)."""
    order = list(samples)
    random.Random(spec.seed).shuffle(order)
    n = len(order)
    n_val = round(n * spec.val_ratio / (spec.train_ratio + spec.val_ratio))
    return order[: n - n_val], order[n - n_val :]


# --- statistics ---


@dataclass(frozen=True)
class DatasetStats:
    samples: int
    avg_len_caption: float
    avg_len_question: float
    question_length_histogram: dict[int, int]
    avg_objects_per_caption: float
    vocab_words: int
    vocab_nouns: int
    vocab_verbs: int
    vocab_adjectives: int
    kg_entities: int
    kg_relations: int
    kg_triplets: int

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["question_length_histogram"] = {
            str(k): v for k, v in sorted(self.question_length_histogram.items())
        }
        return out


def question_token_length(question: str) -> int:
    """Whitespace token count, excluding the terminal question mark."""
    text = re.sub(r"\?+\s*$", "", question.strip()).strip()
    return len(text.split())


def compute_stats(samples: Sequence[Sample], lexicon: Lexicon | None = None) -> DatasetStats:
    if not samples:
        raise ValueError("no samples")
    lexicon = lexicon or default_lexicon()
    exceptions = lexicon.singular_exceptions

    caption_lengths = [len(s.caption.split()) for s in samples]
    question_lengths = [question_token_length(s.question) for s in samples]
    histogram: dict[int, int] = {}
    for length in question_lengths:
        histogram[length] = histogram.get(length, 0) + 1

    object_counts = [len(extract_nouns(s.caption, lexicon)) for s in samples]

    words: set[str] = set()
    nouns: set[str] = set()
    verbs: set[str] = set()
    adjectives: set[str] = set()
    for sample in samples:
        for token in tag_text(sample.question, lexicon):
            lowered = token.surface.lower()
            if not re.search(r"[a-z0-9]", lowered):
                continue
            words.add(lowered)
            if token.tag == NOUN:
                nouns.add(singularize(lowered, exceptions))
            elif token.tag == VERB:
                verbs.add(lowered)
            elif token.tag == ADJ:
                adjectives.add(lowered)

    entities: set[str] = set()
    relations: set[Relation] = set()
    triplets: set[tuple] = set()
    for sample in samples:
        triplet = sample.triplet
        entities.update((triplet.head, triplet.tail))
        relations.add(triplet.relation)
        triplets.add(triplet.key())

    n = len(samples)
    return DatasetStats(
        samples=n,
        avg_len_caption=sum(caption_lengths) / n,
        avg_len_question=sum(question_lengths) / n,
        question_length_histogram=histogram,
        avg_objects_per_caption=sum(object_counts) / n,
        vocab_words=len(words),
        vocab_nouns=len(nouns),
        vocab_verbs=len(verbs),
        vocab_adjectives=len(adjectives),
        kg_entities=len(entities),
        kg_relations=len(relations),
        kg_triplets=len(triplets),
    )


# --- canonical file IO ---

_REQUIRED_FIELDS = (
    "id",
    "image",
    "caption",
    "triplet",
    "knowledge_sentence",
    "question",
    "answer",
    "provenance",
)

_TRIPLET_FIELDS = ("head", "relation", "tail")


def sample_from_dict(record: dict, position: int) -> Sample:
    if not isinstance(record, dict):
        raise DatasetFormatError(f"expected an object at sample {position}")
    for fieldname in _REQUIRED_FIELDS:
        if fieldname not in record:
            raise DatasetFormatError(f"missing field {fieldname} at sample {position}")
    triplet_rec = record["triplet"]
    if not isinstance(triplet_rec, dict):
        raise DatasetFormatError(f"field triplet is not an object at sample {position}")
    for fieldname in _TRIPLET_FIELDS:
        if fieldname not in triplet_rec:
            raise DatasetFormatError(f"missing field triplet.{fieldname} at sample {position}")
    relation = Relation.from_label(str(triplet_rec["relation"]))
    if relation is None:
        raise DatasetFormatError(
            f"invalid field triplet.relation ({triplet_rec['relation']!r}) at sample {position}"
        )
    provenance_rec = record["provenance"]
    if not isinstance(provenance_rec, dict) or "dataset_name" not in provenance_rec:
        raise DatasetFormatError(f"missing field provenance.dataset_name at sample {position}")
    scalar_fields = ("id", "image", "caption", "knowledge_sentence", "question", "answer")
    for fieldname in scalar_fields:
        if not isinstance(record[fieldname], str):
            raise DatasetFormatError(f"field {fieldname} is not a string at sample {position}")
    return Sample(
        id=record["id"],
        image=record["image"],
        caption=record["caption"],
        triplet=KnowledgeTriplet(
            head=str(triplet_rec["head"]),
            relation=relation,
            tail=str(triplet_rec["tail"]),
        ),
        knowledge_sentence=record["knowledge_sentence"],
        question=record["question"],
        answer=record["answer"],
        provenance=Provenance(
            dataset_name=str(provenance_rec["dataset_name"]),
            scene_class=provenance_rec.get("scene_class"),
        ),
    )


def dumps_samples(samples: Iterable[Sample]) -> str:
    payload = [s.to_dict() for s in samples]
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save_samples(samples: Iterable[Sample], path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_samples(samples), encoding="utf-8")


def load_samples(path: Union[str, Path]) -> list[Sample]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except ValueError as exc:
        raise DatasetFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise DatasetFormatError("top level must be a JSON array of samples")
    return [sample_from_dict(record, i) for i, record in enumerate(payload)]
