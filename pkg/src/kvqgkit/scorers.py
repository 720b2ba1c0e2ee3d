"""Pluggable relatedness scorers used by the candidate ranking stages.

All scorers map a pair of texts to a float in [0, 1].  The lexical
scorer is the dependency-free default; a score file replays a scoring
run from disk; the remote scorer calls a model served over HTTP.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Protocol, Sequence, Union

import requests

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")

_STOPWORDS = frozenset(
    """
    a an the is are was were be been being of in on at to for and or with by
    from as it its this that these those there here not no
    """.split()
)


def clamp01(value: float) -> float:
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else value


class Scorer(Protocol):
    def score(self, text_a: str, text_b: str) -> float: ...

    def score_many(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class _ScoreManyMixin:
    def score_many(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(a, b) for a, b in pairs]  # type: ignore[attr-defined]


def content_tokens(text: str) -> set[str]:
    return {w for w in _WORD_RE.findall(text.lower()) if w not in _STOPWORDS}


class LexicalScorer(_ScoreManyMixin):
    """Jaccard overlap of content tokens; deterministic and offline."""

    def score(self, text_a: str, text_b: str) -> float:
        a, b = content_tokens(text_a), content_tokens(text_b)
        union = a | b
        if not union:
            return 0.0
        return clamp01(len(a & b) / len(union))


class ScoreFileScorer:
    """Lookup table loaded from a JSONL score file.

    Each record holds ``caption_id``, ``key``, and ``score``; extra
    fields are ignored.  Binding a caption id yields a Scorer whose
    second argument is the lookup key.
    """

    def __init__(self, records: dict[tuple[str, str], float]):
        self._records = dict(records)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScoreFileScorer":
        records: dict[tuple[str, str], float] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    key = (str(row["caption_id"]), str(row["key"]))
                    score = float(row["score"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"score file line {line_no}: {exc}") from exc
                records[key] = clamp01(score)
        return cls(records)

    def lookup(self, caption_id: str, key: str) -> float:
        try:
            return self._records[(caption_id, key)]
        except KeyError:
            raise LookupError(f"no score for caption {caption_id!r}, key {key!r}") from None

    def for_caption(self, caption_id: str) -> "BoundScoreFileScorer":
        return BoundScoreFileScorer(self, caption_id)

    def __len__(self) -> int:
        return len(self._records)


class BoundScoreFileScorer(_ScoreManyMixin):
    def __init__(self, table: ScoreFileScorer, caption_id: str):
        self._table = table
        self._caption_id = caption_id

    def score(self, text_a: str, text_b: str) -> float:
        return self._table.lookup(self._caption_id, text_b)


class RemoteScorer(_ScoreManyMixin):
    """HTTP scorer: POST {url}/score with {"pairs": [{"a", "b"}, ...]}.

    Anything but a 200 response with a matching score list raises, so a
    failing service can never silently pass as a zero score.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self._url = url.rstrip("/")
        self._timeout = timeout

    def score_many(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if not pairs:
            return []
        response = requests.post(
            f"{self._url}/score",
            json={"pairs": [{"a": a, "b": b} for a, b in pairs]},
            timeout=self._timeout,
        )
        response.raise_for_status()
        payload = response.json()
        scores = payload.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ValueError(
                f"remote scorer returned {len(scores) if isinstance(scores, list) else 'no'}"
                f" scores for {len(pairs)} pairs"
            )
        return [clamp01(float(s)) for s in scores]

    def score(self, text_a: str, text_b: str) -> float:
        return self.score_many([(text_a, text_b)])[0]
