"""Command line for the score exporter.

Exit codes: 0 on success, 1 on data or model errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys

from .backends import (
    BackendError,
    HashSentenceBackend,
    HashTopicBackend,
    SentenceTransformerBackend,
    ZeroShotBackend,
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


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="score-export",
        description="Export topic and sentence similarity scores as score-file JSONL.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    topic = sub.add_parser("topic", help="zero-shot classification scores per (caption, entity)")
    topic.add_argument("--captions", required=True, help="JSONL with id and caption per line")
    topic.add_argument("--entities", required=True, help="JSONL entity labels (strings or {entity})")
    topic.add_argument("--out", required=True, help="score-file JSONL to write")
    topic.add_argument("--model", default=DEFAULT_TOPIC_MODEL, help=f"model id (default {DEFAULT_TOPIC_MODEL})")
    topic.add_argument("--backend", choices=("model", "hash"), default="model",
                       help="'model' loads the pretrained weights; 'hash' is the deterministic stand-in")
    topic.add_argument("--normalization", choices=NORMALIZATION_MODES, default="independent",
                       help="per-label probabilities as-is, or softmax over the entity set")
    topic.add_argument("--batch-size", type=int, default=16)

    sentence = sub.add_parser("sentence", help="embedding cosine scores per (caption, sentence)")
    sentence.add_argument("--captions", required=True, help="JSONL with id and caption per line")
    sentence.add_argument("--sentences", required=True, help="JSONL sentences (strings or {sentence})")
    sentence.add_argument("--out", required=True, help="score-file JSONL to write")
    sentence.add_argument("--model", default=DEFAULT_SENTENCE_MODEL,
                          help=f"model id (default {DEFAULT_SENTENCE_MODEL})")
    sentence.add_argument("--backend", choices=("model", "hash"), default="model",
                          help="'model' loads the pretrained weights; 'hash' is the deterministic stand-in")
    sentence.add_argument("--batch-size", type=int, default=32)
    return parser


def run(args: argparse.Namespace) -> int:
    captions = load_captions(args.captions)
    if args.command == "topic":
        entities = load_keys(args.entities, "entity")
        if args.backend == "hash":
            backend = HashTopicBackend()
        else:
            backend = ZeroShotBackend(args.model, batch_size=args.batch_size)
        records = export_topic_scores(captions, entities, backend, args.normalization)
    else:
        sentences = load_keys(args.sentences, "sentence")
        if args.backend == "hash":
            backend = HashSentenceBackend()
        else:
            backend = SentenceTransformerBackend(args.model, batch_size=args.batch_size)
        records = export_sentence_scores(captions, sentences, backend)
    count = write_records(records, args.out)
    print(f"wrote {count} {args.command} scores to {args.out}", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (OSError, ValueError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
