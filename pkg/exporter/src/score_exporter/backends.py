"""Scoring backends.

Two kinds of backend feed the exporter: topic backends return one raw
entailment-style probability per (caption, label) pair, and sentence
backends return one embedding vector per text.  The hash backends are
fully deterministic stand-ins that need no model weights; the model
backends load pretrained weights lazily so that importing this module
never pulls in torch.
"""

from __future__ import annotations

import hashlib
import math
from typing import Sequence


class BackendError(RuntimeError):
    """A backend could not be constructed or could not score."""


def _unit_float(*parts: str) -> float:
    """Deterministic value in [0, 1) derived from the joined parts."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class HashTopicBackend:
    """Deterministic pseudo-probabilities for tests and dry runs."""

    def probabilities(self, caption: str, labels: Sequence[str]) -> list[float]:
        return [_unit_float("topic", caption, label) for label in labels]


class HashSentenceBackend:
    """Deterministic signed embeddings for tests and dry runs.

    Each token contributes a fixed pseudo-random vector, so embeddings
    are order-insensitive sums; identical texts embed identically.
    """

    def __init__(self, dim: int = 16):
        if dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {dim}")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vector = [0.0] * self.dim
            for token in text.split():
                for d in range(self.dim):
                    vector[d] += _unit_float("embed", token, str(d)) * 2.0 - 1.0
            out.append(vector)
        return out


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity; identical vectors are exactly 1, zeros score 0."""
    if list(u) == list(v):
        if not any(u):
            return 0.0
        return 1.0
    nu = math.sqrt(math.fsum(x * x for x in u))
    nv = math.sqrt(math.fsum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return math.fsum(a * b for a, b in zip(u, v)) / (nu * nv)


class ZeroShotBackend:
    """Zero-shot classification probabilities from a pretrained NLI model."""

    def __init__(self, model_id: str, batch_size: int = 16):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise BackendError(f"transformers is not installed: {exc}") from exc
        try:
            self._pipeline = pipeline("zero-shot-classification", model=model_id)
        except Exception as exc:
            raise BackendError(f"cannot load zero-shot model {model_id!r}: {exc}") from exc
        self.batch_size = batch_size

    def probabilities(self, caption: str, labels: Sequence[str]) -> list[float]:
        # multi_label=True scores every label independently against the
        # caption; renormalization across the label set happens in the
        # export layer when softmax mode is requested.
        result = self._pipeline(
            caption, candidate_labels=list(labels), multi_label=True
        )
        by_label = dict(zip(result["labels"], result["scores"]))
        return [float(by_label[label]) for label in labels]


class SentenceTransformerBackend:
    """Sentence embeddings from a pretrained sentence-transformer."""

    def __init__(self, model_id: str, batch_size: int = 32):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendError(f"sentence-transformers is not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise BackendError(f"cannot load sentence model {model_id!r}: {exc}") from exc
        self.batch_size = batch_size

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = self._model.encode(
            list(texts), batch_size=self.batch_size, convert_to_numpy=True
        )
        return [[float(x) for x in vector] for vector in vectors]
