"""Template verbalization of knowledge triplets.

Each relation maps to one fixed predicate string; a triplet renders as
``subject + " " + predicate + " " + object`` with no punctuation and no
grammatical agreement.  The table is also shipped as a JSON data file so
other front ends can render identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

from .kg import KnowledgeTriplet, Relation, normalize_concept
from .nlp import NounChunk

TEMPLATES: dict[Relation, str] = {
    Relation.HAS_A: "has a",
    Relation.USED_FOR: "is used for",
    Relation.CAPABLE_OF: "is capable of",
    Relation.AT_LOCATION: "is at location of",
    Relation.HAS_SUBEVENT: "has",
    Relation.HAS_PREREQUISITE: "has prerequisite",
    Relation.HAS_PROPERTY: "has a property",
    Relation.CAUSES: "causes",
    Relation.CREATED_BY: "is created by",
    Relation.DEFINED_AS: "is defined as",
    Relation.DESIRES: "desires",
    Relation.MADE_OF: "is made of",
    Relation.NOT_DESIRES: "not desires",
    Relation.RECEIVES_ACTION: "receives action",
}


class ChunkMismatchError(ValueError):
    """Raised when a chunk's head noun matches neither triplet endpoint."""


@dataclass(frozen=True, slots=True)
class KnowledgeSentence:
    text: str
    triplet: KnowledgeTriplet
    chunk: NounChunk | None = None


def render(triplet: KnowledgeTriplet) -> str:
    """Plain subject-predicate-object rendering of a triplet."""
    return f"{triplet.head} {TEMPLATES[triplet.relation]} {triplet.tail}"


def verbalize(triplet: KnowledgeTriplet, chunk: NounChunk | None = None) -> KnowledgeSentence:
    """Render a triplet, optionally substituting a caption noun chunk.

    The chunk replaces the endpoint whose label equals the chunk's head
    noun (head side checked first); no match raises ChunkMismatchError.
    """
    predicate = TEMPLATES[triplet.relation]
    if chunk is None:
        return KnowledgeSentence(text=render(triplet), triplet=triplet)
    head_label = normalize_concept(chunk.head_noun)
    if head_label == triplet.head:
        text = f"{chunk.surface} {predicate} {triplet.tail}"
    elif head_label == triplet.tail:
        text = f"{triplet.head} {predicate} {chunk.surface}"
    else:
        raise ChunkMismatchError(
            f"chunk head {head_label!r} matches neither endpoint of "
            f"({triplet.head!r}, {triplet.relation.value}, {triplet.tail!r})"
        )
    return KnowledgeSentence(text=text, triplet=triplet, chunk=chunk)


def render_all_templates() -> list[tuple[Relation, str]]:
    """All (relation, predicate) pairs in declaration order."""
    return [(relation, TEMPLATES[relation]) for relation in Relation]


def template_table_dict() -> dict[str, str]:
    return {relation.value: TEMPLATES[relation] for relation in Relation}


def write_template_table(path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(template_table_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def bundled_template_table() -> dict[str, str]:
    """The JSON copy of the table shipped with the package."""
    text = resources.files("kvqgkit").joinpath("data/templates.json").read_text(encoding="utf-8")
    return json.loads(text)
