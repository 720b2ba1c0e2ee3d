"""Toolkit for building knowledge-aware visual question generation datasets.

The pipeline goes: parse a commonsense edge dump into an indexed store,
extract object nouns and noun chunks from image captions, retrieve and
rank candidate triplets against the caption, verbalize the survivors into
knowledge sentences, and assemble annotated question/answer samples.
Corpus-level text generation metrics and an annotation HTTP service are
included so the whole loop can run offline.
"""

from __future__ import annotations

__version__ = "0.1.0"
