"""End-to-end tests for the command line interface.

Every subcommand's JSON output is validated against its published
schema file.
"""

from __future__ import annotations

import json
from importlib import resources

import jsonschema
import pytest

from kvqgkit.cli import main, per_image_seed
from kvqgkit.dataset import Provenance, Sample, load_samples
from kvqgkit.kg import KnowledgeIndex, KnowledgeTriplet, Relation
from kvqgkit.service import TaskStore

DUMP_LINES = [
    "/a/x1\t/r/AtLocation\t/c/en/boat\t/c/en/water\t{\"weight\": 2.0}",
    "/a/x2\t/r/UsedFor\t/c/en/boat\t/c/en/fishing\t{\"weight\": 1.0}",
    "/a/x3\t/r/HasProperty\t/c/en/water\t/c/en/blue\t{\"weight\": 1.0}",
    "not a real line",
]

CAPTION_RECORDS = [
    {"id": "c1", "image": "img/1.jpg", "caption": "Two boats are on the water."},
    {
        "id": "c2",
        "image": "img/2.jpg",
        "captions": ["A boat sails.", "The water is blue."],
        "source": "textrs",
    },
    {
        "id": "c3",
        "image": "img/3.jpg",
        "captions": ["one boat", "two boats", "three boats"],
        "source": "nwpu",
    },
]


def check_schema(payload: dict, name: str) -> None:
    schema = json.loads(
        resources.files("kvqgkit").joinpath(f"schemas/{name}.schema.json").read_text("utf-8")
    )
    jsonschema.validate(payload, schema)


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def dump_file(tmp_path):
    path = tmp_path / "assertions.tsv"
    path.write_text("\n".join(DUMP_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def index_file(tmp_path, dump_file, capsys):
    path = tmp_path / "kg.idx"
    assert main(["index", "--dump", str(dump_file), "--index-out", str(path)]) == 0
    capsys.readouterr()
    return path


@pytest.fixture()
def captions_file(tmp_path):
    path = tmp_path / "captions.json"
    path.write_text(json.dumps(CAPTION_RECORDS), encoding="utf-8")
    return path


def make_sample(i: int, answer: str = "boats") -> Sample:
    return Sample(
        id=f"s{i}",
        image=f"img/{i}.jpg",
        caption="Two boats are on the water near the dock.",
        triplet=KnowledgeTriplet("boat", Relation.AT_LOCATION, "water"),
        knowledge_sentence="boat is at location of water",
        question="What are the boats on?",
        answer=answer,
        provenance=Provenance(dataset_name="demo"),
    )


@pytest.fixture()
def dataset_file(tmp_path):
    from kvqgkit.dataset import save_samples

    path = tmp_path / "dataset.json"
    save_samples([make_sample(i) for i in range(10)], path)
    return path


def test_index_reports_counts_and_writes_index(dump_file, tmp_path, capsys):
    index_out = tmp_path / "kg.idx"
    report = tmp_path / "skipped.txt"
    code, out, err = run(
        [
            "index",
            "--dump",
            str(dump_file),
            "--index-out",
            str(index_out),
            "--skip-report",
            str(report),
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "index")
    assert payload["lines_read"] == 4
    assert payload["edges_kept"] == 3
    assert payload["skipped"] == 1
    assert payload["counts"]["triplets"] == 3
    assert "indexed 3 edges" in err
    assert "line 4" in report.read_text(encoding="utf-8")
    loaded = KnowledgeIndex.load(index_out)
    assert loaded.counts().triplets == 3


def test_index_relation_restriction(dump_file, tmp_path, capsys):
    index_out = tmp_path / "kg.idx"
    code, out, _ = run(
        ["index", "--dump", str(dump_file), "--index-out", str(index_out), "--relation", "AtLocation"],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["edges_kept"] == 1


def test_index_unreadable_dump_is_data_error(tmp_path, capsys):
    code, out, _ = run(
        ["index", "--dump", str(tmp_path / "none.tsv"), "--index-out", str(tmp_path / "o.idx")],
        capsys,
    )
    assert code == 1
    payload = json.loads(out)
    assert payload["command"] == "index"
    assert "error" in payload


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["rank", "--captions", "only.json"])
    assert err.value.code == 2


def test_unknown_relation_flag_is_data_error(dump_file, tmp_path, capsys):
    code, out, _ = run(
        [
            "index",
            "--dump",
            str(dump_file),
            "--index-out",
            str(tmp_path / "o.idx"),
            "--relation",
            "PartOf",
        ],
        capsys,
    )
    assert code == 1
    assert "unknown relation" in json.loads(out)["error"]


def test_candidates_lists_unscored_triplets(index_file, captions_file, capsys):
    code, out, err = run(
        ["candidates", "--captions", str(captions_file), "--index", str(index_file)],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "candidates")
    assert [item["id"] for item in payload["items"]] == ["c1", "c2", "c3"]
    first = payload["items"][0]
    assert "boat" in first["objects"] and "water" in first["objects"]
    assert len(first["candidates"]) == 3
    for candidate in first["candidates"]:
        assert "topic_score" not in candidate
        assert "sentence_score" not in candidate
    assert "candidate triplets" in err


def test_rank_lexical_is_deterministic(index_file, captions_file, capsys):
    argv = [
        "rank",
        "--captions",
        str(captions_file),
        "--index",
        str(index_file),
        "--band-lo",
        "0.0",
        "--band-hi",
        "1.0",
    ]
    code, out1, _ = run(argv, capsys)
    assert code == 0
    payload = json.loads(out1)
    check_schema(payload, "rank")
    assert payload["scorer"] == "lexical"
    assert payload["k"] == 10
    for item in payload["items"]:
        scores = [c["sentence_score"] for c in item["candidates"]]
        assert scores == sorted(scores, reverse=True)
        assert len(item["candidates"]) <= payload["k"]
    code, out2, _ = run(argv, capsys)
    assert code == 0
    assert out1 == out2


def test_rank_band_defaults_filter_scores(index_file, captions_file, capsys):
    code, out, _ = run(
        ["rank", "--captions", str(captions_file), "--index", str(index_file)],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["band"] == {"lo": 0.2, "hi": 0.8}
    for item in payload["items"]:
        for candidate in item["candidates"]:
            assert 0.2 <= candidate["topic_score"] <= 0.8
            assert 0.2 <= candidate["sentence_score"] <= 0.8


def test_rank_with_score_file(index_file, captions_file, tmp_path, capsys):
    rows = []
    # c1 externals and sentences; other captions get no candidates kept
    for caption_id, externals in {
        "c1": ["water", "fishing", "blue"],
        "c2": ["water", "fishing", "blue"],
        "c3": ["water", "fishing"],
    }.items():
        for key in externals:
            rows.append({"caption_id": caption_id, "key": key, "score": 0.5, "phase": "topic"})
    for caption_id in ("c1", "c2", "c3"):
        for sentence, score in {
            "boat is at location of water": 0.7,
            "boat is used for fishing": 0.3,
            "water has a property blue": 0.5,
        }.items():
            rows.append(
                {"caption_id": caption_id, "key": sentence, "score": score, "phase": "sentence"}
            )
    score_file = tmp_path / "scores.jsonl"
    score_file.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    code, out, _ = run(
        [
            "rank",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--scorer",
            "score-file",
            "--score-file",
            str(score_file),
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "rank")
    first = payload["items"][0]
    assert [c["sentence_score"] for c in first["candidates"]] == [0.7, 0.5, 0.3]
    assert first["candidates"][0]["sentence"] == "boat is at location of water"


def test_rank_score_file_missing_key_is_data_error(index_file, captions_file, tmp_path, capsys):
    score_file = tmp_path / "scores.jsonl"
    score_file.write_text(
        json.dumps({"caption_id": "c1", "key": "water", "score": 0.5}) + "\n", encoding="utf-8"
    )
    code, out, _ = run(
        [
            "rank",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--scorer",
            "score-file",
            "--score-file",
            str(score_file),
        ],
        capsys,
    )
    assert code == 1
    assert json.loads(out)["command"] == "rank"


def test_rank_remote_url_from_environment(index_file, captions_file, capsys, monkeypatch):
    monkeypatch.setenv("KVQG_REMOTE_SCORER_URL", "http://127.0.0.1:1")
    code, out, _ = run(
        ["rank", "--captions", str(captions_file), "--index", str(index_file), "--scorer", "remote"],
        capsys,
    )
    # URL resolved from the environment; the refused connection is a data error
    assert code == 1
    assert json.loads(out)["command"] == "rank"


def test_rank_remote_without_url_is_data_error(index_file, captions_file, capsys, monkeypatch):
    monkeypatch.delenv("KVQG_REMOTE_SCORER_URL", raising=False)
    code, out, _ = run(
        ["rank", "--captions", str(captions_file), "--index", str(index_file), "--scorer", "remote"],
        capsys,
    )
    assert code == 1
    assert "remote" in json.loads(out)["error"]


def test_config_file_supplies_defaults_and_flags_win(index_file, captions_file, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"k": 1, "band_lo": 0.0, "band_hi": 1.0}), encoding="utf-8")
    code, out, _ = run(
        ["rank", "--captions", str(captions_file), "--index", str(index_file), "--config", str(config)],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["k"] == 1
    assert payload["band"] == {"lo": 0.0, "hi": 1.0}
    assert all(len(item["candidates"]) <= 1 for item in payload["items"])
    code, out, _ = run(
        [
            "rank",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--config",
            str(config),
            "--k",
            "2",
        ],
        capsys,
    )
    assert json.loads(out)["k"] == 2


def test_out_flag_writes_file_instead_of_stdout(index_file, captions_file, tmp_path, capsys):
    out_path = tmp_path / "rank.json"
    code, out, _ = run(
        [
            "rank",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--out",
            str(out_path),
        ],
        capsys,
    )
    assert code == 0
    assert out == ""
    payload = json.loads(out_path.read_text(encoding="utf-8"))
    check_schema(payload, "rank")


def test_verbalize_single_triplet(capsys):
    code, out, err = run(
        ["verbalize", "--head", "boat", "--relation", "AtLocation", "--tail", "water"],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "verbalize")
    assert payload["sentence"] == "boat is at location of water"
    assert "boat is at location of water" in err


def test_verbalize_with_answer_substitution(capsys):
    code, out, _ = run(
        [
            "verbalize",
            "--head",
            "boat",
            "--relation",
            "AtLocation",
            "--tail",
            "water",
            "--answer",
            "two boats",
        ],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["sentence"] == "two boats is at location of water"


def test_verbalize_templates_table(capsys):
    code, out, _ = run(["verbalize", "--templates"], capsys)
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "verbalize")
    assert payload["templates"]["AtLocation"] == "is at location of"
    assert len(payload["templates"]) == 14


def test_verbalize_requires_triplet_or_templates(capsys):
    code, out, _ = run(["verbalize", "--head", "boat"], capsys)
    assert code == 1
    assert "verbalize needs" in json.loads(out)["error"]


def test_assemble_merges_sources_and_rejects_invalid(tmp_path, capsys):
    from kvqgkit.dataset import save_samples
    from kvqgkit.service import AnnotationTask

    samples_path = tmp_path / "samples.json"
    save_samples([make_sample(1), make_sample(2, answer="submarine")], samples_path)

    store = TaskStore(log_path=tmp_path / "log.jsonl")
    from kvqgkit.ranking import RankedCandidate

    candidate = RankedCandidate(
        triplet=KnowledgeTriplet("boat", Relation.AT_LOCATION, "water"),
        object_entity="boat",
        external_entity="water",
        topic_score=0.5,
        sentence_score=0.5,
    )
    store.initialize(
        [
            AnnotationTask(
                id="t1",
                image_ref="img/9.jpg",
                caption="Two boats are on the water.",
                ranked_candidates=[candidate],
            )
        ],
        dataset_name="demo",
    )
    store.submit_annotation("t1", 0, "What are the boats on?", "water")

    dataset_out = tmp_path / "dataset.json"
    code, out, err = run(
        [
            "assemble",
            "--samples",
            str(samples_path),
            "--annotation-log",
            str(tmp_path / "log.jsonl"),
            "--dataset-out",
            str(dataset_out),
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "assemble")
    assert payload["total"] == 3
    assert payload["accepted"] == 2
    assert payload["rejected"] == [{"id": "s2", "violations": ["answer-not-in-caption"]}]
    saved = load_samples(dataset_out)
    assert [s.id for s in saved] == ["s1", "t1"]
    assert "assembled 2 samples" in err


def test_assemble_requires_a_source(tmp_path, capsys):
    code, out, _ = run(["assemble", "--dataset-out", str(tmp_path / "d.json")], capsys)
    assert code == 1
    assert "assemble needs" in json.loads(out)["error"]


def test_split_writes_files_and_manifest(dataset_file, tmp_path, capsys):
    argv = ["split", "--in", str(dataset_file), "--seed", "7"]
    code, out1, err = run(argv, capsys)
    assert code == 0
    payload = json.loads(out1)
    check_schema(payload, "split")
    assert payload["train_count"] == 8
    assert payload["val_count"] == 2
    train = load_samples(payload["train_path"])
    val = load_samples(payload["val_path"])
    assert len(train) == 8 and len(val) == 2
    assert {s.id for s in train} | {s.id for s in val} == {f"s{i}" for i in range(10)}
    assert {s.id for s in train} & {s.id for s in val} == set()
    manifest = json.loads((tmp_path / "dataset_split.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 7
    assert len(manifest["train_ids"]) == 8
    # identical rerun, byte for byte
    train_bytes = (tmp_path / "dataset_train.json").read_bytes()
    code, out2, _ = run(argv, capsys)
    assert out1 == out2
    assert (tmp_path / "dataset_train.json").read_bytes() == train_bytes


def test_stats_reports_dataset_statistics(dataset_file, capsys):
    code, out, err = run(["stats", "--in", str(dataset_file)], capsys)
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "stats")
    assert payload["samples"] == 10
    assert payload["avg_len_question"] == 5.0
    assert payload["question_length_histogram"] == {"5": 10}
    assert payload["kg_triplets"] == 1
    assert "avg question length 5.00" in err


def test_eval_identity_predictions(tmp_path, capsys):
    rows = [
        {"id": "q1", "candidate": "what is on the water", "references": ["what is on the water"]},
        {"id": "q2", "candidate": "where are the boats", "references": ["where are the boats"]},
    ]
    path = tmp_path / "preds.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    code, out, err = run(["eval", "--in", str(path), "--per-item"], capsys)
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "eval")
    assert payload["bleu"] == [1.0, 1.0, 1.0, 1.0]
    assert payload["rouge_l"] == 1.0
    assert len(payload["items"]) == 2
    assert "BLEU-1 1.0000" in err


def test_serve_build_only_reports_tasks(index_file, captions_file, tmp_path, capsys):
    store_log = tmp_path / "store.jsonl"
    code, out, err = run(
        [
            "serve",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--store-log",
            str(store_log),
            "--band-lo",
            "0.0",
            "--band-hi",
            "1.0",
            "--build-only",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "serve")
    assert payload["tasks"] == 3
    assert payload["pending"] == 3
    reopened = TaskStore.open(store_log)
    assert reopened.progress()["total"] == 3
    assert "serving 3 tasks" in err


def test_serve_resumes_from_existing_log(index_file, captions_file, tmp_path, capsys):
    store_log = tmp_path / "store.jsonl"
    run(
        [
            "serve",
            "--captions",
            str(captions_file),
            "--index",
            str(index_file),
            "--store-log",
            str(store_log),
            "--build-only",
        ],
        capsys,
    )
    code, out, _ = run(["serve", "--log", str(store_log), "--build-only"], capsys)
    assert code == 0
    assert json.loads(out)["tasks"] == 3


def test_serve_without_sources_is_data_error(capsys):
    code, out, _ = run(["serve", "--build-only"], capsys)
    assert code == 1
    assert "serve needs" in json.loads(out)["error"]


def test_nwpu_caption_choice_is_seed_stable(captions_file, index_file, capsys):
    code, out1, _ = run(
        ["candidates", "--captions", str(captions_file), "--index", str(index_file), "--seed", "3"],
        capsys,
    )
    code2, out2, _ = run(
        ["candidates", "--captions", str(captions_file), "--index", str(index_file), "--seed", "3"],
        capsys,
    )
    assert code == code2 == 0
    assert out1 == out2
    chosen = json.loads(out1)["items"][2]["caption"]
    assert chosen in ["one boat", "two boats", "three boats"]
    code, out3, _ = run(
        ["candidates", "--captions", str(captions_file), "--index", str(index_file), "--seed", "4"],
        capsys,
    )
    assert code == 0


def test_textrs_captions_join(captions_file, index_file, capsys):
    code, out, _ = run(
        ["candidates", "--captions", str(captions_file), "--index", str(index_file)],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["items"][1]["caption"] == "A boat sails. The water is blue."


def test_per_image_seed_is_stable_and_id_sensitive():
    assert per_image_seed(0, "a") == per_image_seed(0, "a")
    assert per_image_seed(0, "a") != per_image_seed(1, "a")
    assert per_image_seed(0, "a") != per_image_seed(0, "b")
