"""Command line front end wiring the pipeline into reproducible runs.

Every subcommand prints one canonical JSON document (stdout or --out)
and a short human summary on stderr.  Exit codes: 0 success, 1 data
error (with a JSON error object on stdout), 2 usage error.  Option
values resolve as: explicit flag, then --config file entry (keyed by
the option's underscore name), then the built-in default.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

from .dataset import (
    SplitSpec,
    compute_stats,
    ingest_nwpu_caption,
    ingest_textrs_caption,
    load_samples,
    save_samples,
    split,
    validate,
)
from .kg import (
    RELATION_NAMES,
    KnowledgeIndex,
    KnowledgeTriplet,
    Relation,
    normalize_concept,
    parse_dump,
    write_skip_report,
)
from .metrics import SMOOTHING_MODES, EvalCorpus, evaluate
from .nlp import extract_nouns
from .ranking import DEFAULT_TOP_K, ScoreBand, build_candidates, rank_candidates
from .scorers import LexicalScorer, RemoteScorer, Scorer, ScoreFileScorer
from .service import TaskStore, build_tasks, create_app, knowledge_sentence_for
from .templates import render, template_table_dict

REMOTE_URL_ENV = "KVQG_REMOTE_SCORER_URL"
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8765
SCORER_KINDS = ("lexical", "score-file", "remote")


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _emit(payload: dict, out: str | None) -> None:
    text = canonical_json(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


class Options:
    """Flag / config-file / default resolution for one parsed command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict = {}
        config_path = getattr(args, "config", None)
        if config_path:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
            if not isinstance(loaded, dict):
                raise ValueError("config file must hold a JSON object")
            self.config = loaded

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return self.config[name]
        return default


def parse_relation(label: str) -> Relation:
    relation = Relation.from_label(label)
    if relation is None:
        raise ValueError(
            f"unknown relation {label!r}; expected one of {', '.join(RELATION_NAMES)}"
        )
    return relation


def per_image_seed(seed: int, image_id: str) -> int:
    """Stable per-image RNG seed derived from the run seed and image id."""
    digest = hashlib.sha256(f"{seed}:{image_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def load_caption_records(path: str, seed: int) -> list[dict]:
    """Read caption records, resolving multi-caption sources to one caption.

    Records either carry a ready ``caption`` or a ``captions`` list with
    ``source`` "nwpu" (seeded random pick per image) or "textrs"
    (sentence join).
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("caption file must be a JSON array")
    records = []
    for position, record in enumerate(data):
        if not isinstance(record, dict):
            raise ValueError(f"caption record {position} is not an object")
        for name in ("id", "image"):
            if name not in record:
                raise ValueError(f"caption record {position} missing field {name}")
        image_id = str(record["id"])
        if "caption" in record:
            caption = record["caption"]
        elif "captions" in record:
            source = record.get("source", "nwpu")
            if source == "nwpu":
                caption = ingest_nwpu_caption(record["captions"], per_image_seed(seed, image_id))
            elif source == "textrs":
                caption = ingest_textrs_caption(record["captions"])
            else:
                raise ValueError(f"caption record {position}: unknown source {source!r}")
        else:
            raise ValueError(f"caption record {position} has neither caption nor captions")
        records.append(
            {
                "id": image_id,
                "image": record["image"],
                "caption": caption,
                "scene_class": record.get("scene_class"),
            }
        )
    return records


def scorer_factory(options: Options) -> tuple[str, Callable[[str], Scorer]]:
    """Build a per-caption scorer constructor for the selected backend."""
    kind = options.get("scorer", "lexical")
    if kind not in SCORER_KINDS:
        raise ValueError(f"unknown scorer {kind!r}; expected one of {', '.join(SCORER_KINDS)}")
    if kind == "lexical":
        shared = LexicalScorer()
        return kind, lambda caption_id: shared
    if kind == "score-file":
        path = options.get("score_file")
        if not path:
            raise ValueError("scorer 'score-file' needs --score-file")
        table = ScoreFileScorer.load(path)
        return kind, table.for_caption
    url = options.get("remote_url") or os.environ.get(REMOTE_URL_ENV)
    if not url:
        raise ValueError(f"scorer 'remote' needs --remote-url or {REMOTE_URL_ENV}")
    remote = RemoteScorer(url)
    return kind, lambda caption_id: remote


def _band(options: Options) -> ScoreBand:
    return ScoreBand(
        lo=float(options.get("band_lo", ScoreBand().lo)),
        hi=float(options.get("band_hi", ScoreBand().hi)),
    )


# --- subcommand handlers ---


def cmd_index(options: Options) -> dict:
    dump = options.get("dump")
    index_out = options.get("index_out")
    relations = None
    names = options.get("relation")
    if names:
        relations = {parse_relation(name) for name in names}
    result = parse_dump(dump, relations=relations)
    result.index.save(index_out)
    skip_report = options.get("skip_report")
    if skip_report:
        write_skip_report(result.skipped, skip_report)
    counts = result.index.counts()
    payload = {
        "command": "index",
        "dump": str(dump),
        "index_path": str(index_out),
        "lines_read": result.lines_read,
        "edges_kept": result.edges_kept,
        "skipped": len(result.skipped),
        "counts": {
            "entities": counts.entities,
            "relations": counts.relations,
            "triplets": counts.triplets,
        },
    }
    _say(
        f"indexed {result.edges_kept} edges from {result.lines_read} lines "
        f"({len(result.skipped)} skipped) -> {index_out}"
    )
    return payload


def cmd_candidates(options: Options) -> dict:
    index = KnowledgeIndex.load(options.get("index"))
    records = load_caption_records(options.get("captions"), int(options.get("seed", 0)))
    items = []
    total = 0
    for record in records:
        objects = extract_nouns(record["caption"])
        candidates = build_candidates(objects, index)
        total += len(candidates)
        items.append(
            {
                "id": record["id"],
                "image": record["image"],
                "caption": record["caption"],
                "objects": objects,
                "candidates": [c.to_dict() for c in candidates],
            }
        )
    _say(f"retrieved {total} candidate triplets for {len(items)} captions")
    return {"command": "candidates", "items": items}


def cmd_rank(options: Options) -> dict:
    index = KnowledgeIndex.load(options.get("index"))
    records = load_caption_records(options.get("captions"), int(options.get("seed", 0)))
    kind, make_scorer = scorer_factory(options)
    band = _band(options)
    k = int(options.get("k", DEFAULT_TOP_K))
    items = []
    total = 0
    for record in records:
        objects = extract_nouns(record["caption"])
        scorer = make_scorer(record["id"])
        ranked = rank_candidates(record["caption"], objects, index, scorer, band=band, k=k)
        total += len(ranked)
        items.append(
            {
                "id": record["id"],
                "image": record["image"],
                "caption": record["caption"],
                "objects": objects,
                "candidates": [c.to_dict() for c in ranked],
            }
        )
    _say(f"ranked {total} triplets across {len(items)} captions (scorer={kind}, k={k})")
    return {
        "command": "rank",
        "scorer": kind,
        "k": k,
        "band": {"lo": band.lo, "hi": band.hi},
        "items": items,
    }


def cmd_verbalize(options: Options) -> dict:
    if options.get("templates"):
        _say("14 relation templates")
        return {"command": "verbalize", "templates": template_table_dict()}
    head = options.get("head")
    relation = options.get("relation")
    tail = options.get("tail")
    if not (head and relation and tail):
        raise ValueError("verbalize needs --head, --relation and --tail (or --templates)")
    triplet = KnowledgeTriplet(
        head=normalize_concept(head), relation=parse_relation(relation), tail=normalize_concept(tail)
    )
    answer = options.get("answer")
    sentence = (
        knowledge_sentence_for(triplet, answer) if answer is not None else render(triplet)
    )
    _say(sentence)
    return {
        "command": "verbalize",
        "triplet": triplet.to_dict(),
        "sentence": sentence,
    }


def cmd_assemble(options: Options) -> dict:
    samples = []
    samples_path = options.get("samples")
    log_path = options.get("annotation_log")
    if not samples_path and not log_path:
        raise ValueError("assemble needs --samples and/or --annotation-log")
    if samples_path:
        samples.extend(load_samples(samples_path))
    if log_path:
        samples.extend(TaskStore.open(log_path).samples)
    accepted = []
    rejected = []
    for sample in samples:
        violations = validate(sample)
        if violations:
            rejected.append({"id": sample.id, "violations": violations})
        else:
            accepted.append(sample)
    dataset_out = options.get("dataset_out")
    if not dataset_out:
        raise ValueError("assemble needs --dataset-out")
    save_samples(accepted, dataset_out)
    _say(f"assembled {len(accepted)} samples ({len(rejected)} rejected) -> {dataset_out}")
    return {
        "command": "assemble",
        "dataset_path": str(dataset_out),
        "total": len(samples),
        "accepted": len(accepted),
        "rejected": rejected,
    }


def cmd_split(options: Options) -> dict:
    source = options.get("in_path")
    samples = load_samples(source)
    spec = SplitSpec(
        train_ratio=int(options.get("train_ratio", 4)),
        val_ratio=int(options.get("val_ratio", 1)),
        seed=int(options.get("seed", 0)),
    )
    train, val = split(samples, spec)
    source_path = Path(source)
    out_dir = Path(options.get("out_dir", source_path.parent))
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = source_path.name[: -len(".json")] if source_path.name.endswith(".json") else source_path.name
    train_path = out_dir / f"{stem}_train.json"
    val_path = out_dir / f"{stem}_val.json"
    manifest_path = out_dir / f"{stem}_split.json"
    save_samples(train, train_path)
    save_samples(val, val_path)
    manifest = {
        "format": "split-manifest@1",
        "seed": spec.seed,
        "train_ratio": spec.train_ratio,
        "val_ratio": spec.val_ratio,
        "train_ids": [s.id for s in train],
        "val_ids": [s.id for s in val],
    }
    manifest_path.write_text(canonical_json(manifest), encoding="utf-8")
    _say(f"split {len(samples)} samples into {len(train)} train / {len(val)} val (seed={spec.seed})")
    return {
        "command": "split",
        "seed": spec.seed,
        "train_count": len(train),
        "val_count": len(val),
        "train_path": str(train_path),
        "val_path": str(val_path),
        "manifest_path": str(manifest_path),
    }


def cmd_stats(options: Options) -> dict:
    samples = load_samples(options.get("in_path"))
    stats = compute_stats(samples)
    _say(
        f"{len(samples)} samples: avg question length {stats.avg_len_question:.2f}, "
        f"{stats.kg_triplets} distinct triplets"
    )
    return {"command": "stats", **stats.to_dict()}


def cmd_eval(options: Options) -> dict:
    corpus = EvalCorpus.load_jsonl(options.get("in_path"))
    smoothing = options.get("smoothing", "none")
    report = evaluate(
        corpus,
        max_n=int(options.get("max_n", 4)),
        smoothing=smoothing,
        rouge_beta=float(options.get("rouge_beta", 1.2)),
        cider_scale=float(options.get("cider_scale", 10.0)),
        per_item=bool(options.get("per_item", False)),
    )
    _say(
        f"evaluated {len(corpus)} items: BLEU-1 {report.bleu[0]:.4f}, "
        f"METEOR {report.meteor:.4f}, ROUGE-L {report.rouge_l:.4f}, CIDEr {report.cider:.4f}"
    )
    return {"command": "eval", "count": len(corpus), **report.to_dict()}


def prepare_serve(options: Options):
    """Build the task store and app for the serve subcommand."""
    log_path = options.get("log")
    store_log = options.get("store_log")
    if log_path:
        store = TaskStore.open(log_path)
    else:
        captions = options.get("captions")
        index_path = options.get("index")
        if not captions or not index_path:
            raise ValueError("serve needs --log, or --captions with --index")
        index = KnowledgeIndex.load(index_path)
        records = load_caption_records(captions, int(options.get("seed", 0)))
        _, make_scorer = scorer_factory(options)
        band = _band(options)
        k = int(options.get("k", DEFAULT_TOP_K))
        tasks = []
        for record in records:
            tasks.extend(
                build_tasks(
                    [record], index, make_scorer(record["id"]), band=band, k=k
                )
            )
        store = TaskStore(
            log_path=store_log, dataset_name=options.get("dataset_name", "annotated")
        )
        store.initialize(tasks)
    app = create_app(store, ui_dir=options.get("ui_dir"))
    return store, app


def cmd_serve(options: Options) -> dict:
    store, app = prepare_serve(options)
    host = options.get("host", DEFAULT_HOST)
    port = int(options.get("port", DEFAULT_PORT))
    progress = store.progress()
    payload = {
        "command": "serve",
        "host": host,
        "port": port,
        "tasks": progress["total"],
        "pending": progress["pending"],
    }
    _say(f"serving {progress['total']} tasks on http://{host}:{port}")
    if not options.get("build_only"):
        _emit(payload, options.get("out"))
        import uvicorn

        uvicorn.run(app, host=host, port=port, log_level="warning")
        return {}
    return payload


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvqg",
        description="Knowledge-aware question dataset pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON output here instead of stdout")
    common.add_argument("--config", help="JSON config file; explicit flags win")
    common.add_argument("--seed", type=int, help="seed for every stochastic step (default 0)")

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("--scorer", choices=SCORER_KINDS, help="similarity backend (default lexical)")
    scoring.add_argument("--score-file", dest="score_file", help="JSONL score table for --scorer score-file")
    scoring.add_argument("--remote-url", dest="remote_url", help=f"scoring service URL (or ${REMOTE_URL_ENV})")
    scoring.add_argument("--band-lo", dest="band_lo", type=float, help="score band lower bound (default 0.2)")
    scoring.add_argument("--band-hi", dest="band_hi", type=float, help="score band upper bound (default 0.8)")
    scoring.add_argument("--k", type=int, help="candidates kept per caption (default 10)")

    p = sub.add_parser("index", parents=[common], help="parse a knowledge dump into a query index")
    p.add_argument("--dump", required=True, help="assertion TSV dump, optionally .gz")
    p.add_argument("--index-out", dest="index_out", required=True, help="index file to write (.gz supported)")
    p.add_argument("--skip-report", dest="skip_report", help="write skipped-line report here")
    p.add_argument("--relation", action="append", help="restrict to this relation (repeatable)")
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser("candidates", parents=[common], help="retrieve unscored candidate triplets")
    p.add_argument("--captions", required=True, help="caption records JSON array")
    p.add_argument("--index", required=True, help="index file from the index subcommand")
    p.set_defaults(handler=cmd_candidates)

    p = sub.add_parser("rank", parents=[common, scoring], help="filter and rank triplets per caption")
    p.add_argument("--captions", required=True)
    p.add_argument("--index", required=True)
    p.set_defaults(handler=cmd_rank)

    p = sub.add_parser("verbalize", parents=[common], help="render a triplet as a knowledge sentence")
    p.add_argument("--head")
    p.add_argument("--relation")
    p.add_argument("--tail")
    p.add_argument("--answer", help="answer chunk to substitute for a matching endpoint")
    p.add_argument("--templates", action="store_const", const=True, help="print the full template table")
    p.set_defaults(handler=cmd_verbalize)

    p = sub.add_parser("assemble", parents=[common], help="validate samples and write a dataset file")
    p.add_argument("--samples", help="JSON array of sample records")
    p.add_argument("--annotation-log", dest="annotation_log", help="annotation store JSONL log")
    p.add_argument("--dataset-out", dest="dataset_out", required=True)
    p.set_defaults(handler=cmd_assemble)

    p = sub.add_parser("split", parents=[common], help="seeded train/validation split")
    p.add_argument("--in", dest="in_path", required=True, help="dataset JSON file")
    p.add_argument("--train-ratio", dest="train_ratio", type=int)
    p.add_argument("--val-ratio", dest="val_ratio", type=int)
    p.add_argument("--out-dir", dest="out_dir", help="directory for the split files (default: input's)")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics")
    p.add_argument("--in", dest="in_path", required=True, help="dataset JSON file")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("eval", parents=[common], help="score generated questions against references")
    p.add_argument("--in", dest="in_path", required=True, help="JSONL with id/candidate/references")
    p.add_argument("--max-n", dest="max_n", type=int, help="highest n-gram order (default 4)")
    p.add_argument("--smoothing", choices=SMOOTHING_MODES)
    p.add_argument("--rouge-beta", dest="rouge_beta", type=float)
    p.add_argument("--cider-scale", dest="cider_scale", type=float)
    p.add_argument("--per-item", dest="per_item", action="store_const", const=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("serve", parents=[common, scoring], help="run the annotation HTTP service")
    p.add_argument("--captions", help="caption records to build tasks from")
    p.add_argument("--index", help="index file for task building")
    p.add_argument("--log", help="existing annotation log to resume")
    p.add_argument("--store-log", dest="store_log", help="JSONL log path for new annotations")
    p.add_argument("--dataset-name", dest="dataset_name", help="provenance name for new samples")
    p.add_argument("--ui-dir", dest="ui_dir", help="static directory with the annotation UI build")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument(
        "--build-only",
        dest="build_only",
        action="store_const",
        const=True,
        help="build the store, print the report, and exit without serving",
    )
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        options = Options(args)
        payload = args.handler(options)
    except (OSError, ValueError, LookupError, RuntimeError) as exc:
        _emit({"command": args.command, "error": str(exc)}, None)
        return 1
    if payload:
        _emit(payload, options.get("out"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
