"""Rule-based caption text processing: tokens, tags, nouns, noun chunks.

Tagging is a plain lexicon lookup with suffix fallbacks; no statistical
model is involved, so the output for a given lexicon is fully
deterministic.  The coarse tag set is NOUN, VERB, ADJ, NUM, DET, OTHER.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Union

NOUN = "NOUN"
VERB = "VERB"
ADJ = "ADJ"
NUM = "NUM"
DET = "DET"
OTHER = "OTHER"

TAGS = frozenset({NOUN, VERB, ADJ, NUM, DET, OTHER})

CHUNK_TAGS = frozenset({DET, NUM, ADJ, NOUN})

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['’-][A-Za-z0-9]+)*|\S")
_WORD_RE = re.compile(r"[A-Za-z0-9]")
_NUMERIC_RE = re.compile(r"^\d+(?:[.,:]\d+)*$|^\d+(?:st|nd|rd|th)$")


@dataclass(frozen=True, slots=True)
class Token:
    surface: str
    index: int
    tag: str = OTHER


@dataclass(frozen=True, slots=True)
class NounChunk:
    """A contiguous determiner/number/adjective/noun span of the caption.

    ``head_noun`` is the singular lowercase lemma of the last noun in the
    span; ``start``/``end`` are token indices (end exclusive).
    """

    head_noun: str
    surface: str
    start: int
    end: int


class Lexicon:
    """Word -> tag table plus the irregular-plural map used to lemmatize."""

    def __init__(self, tags: Mapping[str, str], singular_exceptions: Mapping[str, str]):
        bad = set(tags.values()) - TAGS
        if bad:
            raise ValueError(f"unknown tags in lexicon: {sorted(bad)}")
        self._tags = dict(tags)
        self._singular = dict(singular_exceptions)

    def tag_of(self, word: str) -> str | None:
        return self._tags.get(word)

    @property
    def singular_exceptions(self) -> dict[str, str]:
        return dict(self._singular)

    def __len__(self) -> int:
        return len(self._tags)

    @classmethod
    def load(
        cls,
        lexicon_path: Union[str, Path],
        exceptions_path: Union[str, Path, None] = None,
    ) -> "Lexicon":
        tags = _read_tsv(lexicon_path)
        exceptions = _read_tsv(exceptions_path) if exceptions_path else {}
        return cls(tags, exceptions)

    @classmethod
    def bundled(cls) -> "Lexicon":
        data = resources.files("kvqgkit").joinpath("data")
        return cls(
            _parse_tsv(data.joinpath("lexicon.tsv").read_text(encoding="utf-8")),
            _parse_tsv(data.joinpath("singular_exceptions.tsv").read_text(encoding="utf-8")),
        )


def _read_tsv(path: Union[str, Path]) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_tsv(fh.read())


def _parse_tsv(text: str) -> dict[str, str]:
    table: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {line_no}: expected 'word<TAB>value'")
        table[parts[0].strip().lower()] = parts[1].strip()
    return table


_DEFAULT_LEXICON: Lexicon | None = None


def default_lexicon() -> Lexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = Lexicon.bundled()
    return _DEFAULT_LEXICON


def tokenize(text: str) -> list[Token]:
    """Split on whitespace and punctuation, keeping punctuation as tokens.

    Case is preserved; joining the surfaces back together recovers the
    input up to whitespace.
    """
    return [
        Token(surface=match.group(0), index=i)
        for i, match in enumerate(_TOKEN_RE.finditer(text))
    ]


def singularize(word: str, exceptions: Mapping[str, str] | None = None) -> str:
    """Reduce a plural noun to its singular form by suffix rules."""
    w = word.lower()
    if exceptions and w in exceptions:
        return exceptions[w]
    if len(w) >= 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) >= 5 and w.endswith(("ches", "shes", "sses", "xes", "zes")):
        return w[:-2]
    if len(w) >= 5 and w.endswith("oes"):
        return w[:-2]
    if len(w) <= 2 or w.endswith(("ss", "us", "is")):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _tag_word(word: str, lexicon: Lexicon) -> str:
    if not _WORD_RE.search(word):
        return OTHER
    lowered = word.lower()
    hit = lexicon.tag_of(lowered)
    if hit is not None:
        return hit
    if _NUMERIC_RE.match(lowered):
        return NUM
    singular = singularize(lowered, lexicon.singular_exceptions)
    if singular != lowered:
        hit = lexicon.tag_of(singular)
        if hit is not None:
            return hit
    if len(lowered) > 4 and lowered.endswith(("ing", "ed")):
        return VERB
    if len(lowered) > 3 and lowered.endswith("s") and not lowered.endswith("ss"):
        return NOUN
    return OTHER


def tag(tokens: Iterable[Token], lexicon: Lexicon | None = None) -> list[Token]:
    """Fill in tags by lexicon lookup with suffix fallbacks."""
    lexicon = lexicon or default_lexicon()
    return [replace(token, tag=_tag_word(token.surface, lexicon)) for token in tokens]


def tag_text(text: str, lexicon: Lexicon | None = None) -> list[Token]:
    return tag(tokenize(text), lexicon)


def extract_nouns(caption: str, lexicon: Lexicon | None = None) -> list[str]:
    """Distinct singular noun lemmas in first-occurrence order."""
    lexicon = lexicon or default_lexicon()
    exceptions = lexicon.singular_exceptions
    seen: list[str] = []
    for token in tag_text(caption, lexicon):
        if token.tag != NOUN:
            continue
        lemma = singularize(token.surface.lower(), exceptions)
        if lemma and lemma not in seen:
            seen.append(lemma)
    return seen


def extract_noun_chunks(caption: str, lexicon: Lexicon | None = None) -> list[NounChunk]:
    """Maximal determiner/number/adjective/noun runs ending in a noun.

    A run with no noun yields nothing; trailing non-noun tokens are
    trimmed so every chunk ends at its last noun.
    """
    lexicon = lexicon or default_lexicon()
    exceptions = lexicon.singular_exceptions
    tokens = tag_text(caption, lexicon)
    chunks: list[NounChunk] = []
    i = 0
    n = len(tokens)
    while i < n:
        if tokens[i].tag not in CHUNK_TAGS:
            i += 1
            continue
        j = i
        while j < n and tokens[j].tag in CHUNK_TAGS:
            j += 1
        run = tokens[i:j]
        last_noun = max((k for k, t in enumerate(run) if t.tag == NOUN), default=-1)
        if last_noun >= 0:
            span = run[: last_noun + 1]
            head = singularize(span[-1].surface.lower(), exceptions)
            chunks.append(
                NounChunk(
                    head_noun=head,
                    surface=" ".join(t.surface for t in span),
                    start=span[0].index,
                    end=span[-1].index + 1,
                )
            )
        i = j
    return chunks
