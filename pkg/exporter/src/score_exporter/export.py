"""Cross-product scoring and atomic score-file output.

The output format is the ranking pipeline's score-file JSONL: one
object per line with ``caption_id``, ``key``, ``score``, and ``phase``.
Rows are emitted caption-major in input order, so a rerun over the
same inputs produces a byte-identical file.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence, Union

DEFAULT_TOPIC_MODEL = "facebook/bart-large-mnli"
DEFAULT_SENTENCE_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
NORMALIZATION_MODES = ("independent", "softmax")

TOPIC = "topic"
SENTENCE = "sentence"


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def _read_jsonl(path: Union[str, Path]) -> Iterable[tuple[int, object]]:
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path} line {line_no}: {exc}") from exc


def load_captions(path: Union[str, Path]) -> list[tuple[str, str]]:
    """Rows of ``{"id": ..., "caption": ...}`` with ids kept unique."""
    captions: list[tuple[str, str]] = []
    seen: set[str] = set()
    for line_no, row in _read_jsonl(path):
        if not isinstance(row, dict) or "id" not in row or "caption" not in row:
            raise ValueError(f"{path} line {line_no}: expected an object with id and caption")
        caption_id = str(row["id"])
        if caption_id in seen:
            raise ValueError(f"{path} line {line_no}: duplicate caption id {caption_id!r}")
        seen.add(caption_id)
        captions.append((caption_id, str(row["caption"])))
    if not captions:
        raise ValueError(f"{path}: no caption records")
    return captions


def load_keys(path: Union[str, Path], field: str) -> list[str]:
    """One key per line: either a bare JSON string or ``{field: ...}``."""
    keys: list[str] = []
    seen: set[str] = set()
    for line_no, row in _read_jsonl(path):
        if isinstance(row, str):
            key = row
        elif isinstance(row, dict) and field in row:
            key = str(row[field])
        else:
            raise ValueError(f"{path} line {line_no}: expected a string or an object with {field!r}")
        if key in seen:
            raise ValueError(f"{path} line {line_no}: duplicate key {key!r}")
        seen.add(key)
        keys.append(key)
    if not keys:
        raise ValueError(f"{path}: no keys")
    return keys


def _softmax(values: Sequence[float]) -> list[float]:
    peak = max(values)
    exps = [math.exp(v - peak) for v in values]
    total = math.fsum(exps)
    return [v / total for v in exps]


def export_topic_scores(
    captions: Sequence[tuple[str, str]],
    entities: Sequence[str],
    backend,
    normalization: str = "independent",
) -> list[dict]:
    """One record per (caption, entity) with zero-shot probabilities.

    ``independent`` records each label's probability as-is; ``softmax``
    renormalizes across the entity set per caption so the scores sum
    to one.
    """
    if normalization not in NORMALIZATION_MODES:
        raise ValueError(f"unknown normalization {normalization!r}")
    records = []
    for caption_id, caption in captions:
        probs = [float(p) for p in backend.probabilities(caption, entities)]
        if len(probs) != len(entities):
            raise ValueError(
                f"backend returned {len(probs)} scores for {len(entities)} labels"
            )
        if normalization == "softmax":
            probs = _softmax(probs)
        for entity, prob in zip(entities, probs):
            records.append(
                {
                    "caption_id": caption_id,
                    "key": entity,
                    "score": _clamp01(prob),
                    "phase": TOPIC,
                }
            )
    return records


def export_sentence_scores(
    captions: Sequence[tuple[str, str]],
    sentences: Sequence[str],
    backend,
) -> list[dict]:
    """One record per (caption, sentence) with clamped embedding cosine."""
    from .backends import cosine

    texts = [caption for _, caption in captions] + list(sentences)
    vectors = backend.embed(texts)
    if len(vectors) != len(texts):
        raise ValueError(f"backend returned {len(vectors)} embeddings for {len(texts)} texts")
    caption_vectors = vectors[: len(captions)]
    sentence_vectors = vectors[len(captions) :]
    records = []
    for (caption_id, caption), cvec in zip(captions, caption_vectors):
        for sentence, svec in zip(sentences, sentence_vectors):
            if caption == sentence:
                score = 1.0
            else:
                score = _clamp01(cosine(cvec, svec))
            records.append(
                {
                    "caption_id": caption_id,
                    "key": sentence,
                    "score": score,
                    "phase": SENTENCE,
                }
            )
    return records


def write_records(records: Iterable[dict], path: Union[str, Path]) -> int:
    """Write JSONL atomically: temp file in the same directory, then rename."""
    path = Path(path)
    count = 0
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
                count += 1
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return count
