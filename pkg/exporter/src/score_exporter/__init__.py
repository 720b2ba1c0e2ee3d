"""Offline similarity-score exporter.

Computes topic scores (zero-shot classification) and sentence scores
(embedding cosine) for caption/key pairs and writes them as score-file
JSONL rows that the ranking pipeline consumes directly.
"""

from .backends import (
    BackendError,
    HashSentenceBackend,
    HashTopicBackend,
    SentenceTransformerBackend,
    ZeroShotBackend,
    cosine,
)
from .export import (
    DEFAULT_SENTENCE_MODEL,
    DEFAULT_TOPIC_MODEL,
    NORMALIZATION_MODES,
    export_sentence_scores,
    export_topic_scores,
    load_captions,
    load_keys,
    write_records,
)

__all__ = [
    "BackendError",
    "HashSentenceBackend",
    "HashTopicBackend",
    "SentenceTransformerBackend",
    "ZeroShotBackend",
    "cosine",
    "DEFAULT_SENTENCE_MODEL",
    "DEFAULT_TOPIC_MODEL",
    "NORMALIZATION_MODES",
    "export_sentence_scores",
    "export_topic_scores",
    "load_captions",
    "load_keys",
    "write_records",
]
