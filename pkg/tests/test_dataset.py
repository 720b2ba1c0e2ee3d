"""Tests for sample validation, ingestion, split, stats, and file IO."""

from __future__ import annotations

import json
import random

import pytest

from kvqgkit.dataset import (
    DatasetFormatError,
    Provenance,
    Sample,
    SplitSpec,
    compute_stats,
    dumps_samples,
    ingest_nwpu_caption,
    ingest_textrs_caption,
    load_samples,
    question_token_length,
    sample_from_dict,
    save_samples,
    split,
    validate,
)
from kvqgkit.kg import KnowledgeTriplet, Relation


def _sample(**overrides) -> Sample:
    base = dict(
        id="s1",
        image="images/harbor_001.jpg",
        caption="A large ship floating in the water",
        triplet=KnowledgeTriplet("ship", Relation.AT_LOCATION, "water"),
        knowledge_sentence="ship is at location of water",
        question="What is at the location of water?",
        answer="ship",
        provenance=Provenance(dataset_name="demo", scene_class="harbor"),
    )
    base.update(overrides)
    return Sample(**base)


def test_validate_accepts_well_formed_sample() -> None:
    assert validate(_sample()) == []


def test_validate_accepts_chunk_substituted_sentence() -> None:
    sample = _sample(
        answer="A large ship",
        knowledge_sentence="A large ship is at location of water",
    )
    assert validate(sample) == []
    tail_side = _sample(
        triplet=KnowledgeTriplet("cargo", Relation.AT_LOCATION, "ship"),
        answer="A large ship",
        knowledge_sentence="cargo is at location of A large ship",
    )
    assert validate(tail_side) == []


def test_validate_reports_all_violations() -> None:
    sample = _sample(question="", answer="submarine")
    violations = validate(sample)
    assert "question-empty" in violations
    assert "answer-not-in-caption" in violations
    assert len(violations) == 2


def test_validate_answer_substring_is_case_insensitive() -> None:
    assert validate(_sample(answer="a LARGE ship", knowledge_sentence="a LARGE ship is at location of water")) == []


def test_validate_relation_not_in_set() -> None:
    bad = _sample(triplet=KnowledgeTriplet("ship", "PartOf", "fleet"))  # type: ignore[arg-type]
    assert "relation-not-in-R" in validate(bad)


def test_validate_knowledge_sentence_mismatch() -> None:
    sample = _sample(knowledge_sentence="ship is in the water")
    assert validate(sample) == ["knowledge-sentence-not-reproducible"]


def test_ingest_nwpu_is_seeded_uniform_choice() -> None:
    captions = [f"caption {i}" for i in range(5)]
    first = ingest_nwpu_caption(captions, seed=42)
    assert first in captions
    assert ingest_nwpu_caption(captions, seed=42) == first
    picks = {ingest_nwpu_caption(captions, seed=s) for s in range(60)}
    assert picks == set(captions)
    with pytest.raises(ValueError):
        ingest_nwpu_caption([], seed=0)


def test_ingest_textrs_joins_sentences() -> None:
    assert (
        ingest_textrs_caption(["a harbor with boats", "the water is blue"])
        == "a harbor with boats. the water is blue"
    )
    assert (
        ingest_textrs_caption(["a harbor with boats.", "the water is blue."])
        == "a harbor with boats. the water is blue."
    )
    assert ingest_textrs_caption(["one sentence."]) == "one sentence."
    assert ingest_textrs_caption(["double..", "ending.."]) == "double. ending."
    with pytest.raises(ValueError):
        ingest_textrs_caption(["", "  "])


def test_split_300_gives_240_60() -> None:
    samples = [_sample(id=f"s{i}") for i in range(300)]
    train, val = split(samples, SplitSpec(seed=13))
    assert len(train) == 240 and len(val) == 60


def test_split_disjoint_exhaustive_deterministic_random_sizes() -> None:
    rng = random.Random(99)
    for _ in range(100):
        n = rng.randint(1, 1000)
        samples = [_sample(id=f"s{i}") for i in range(n)]
        seed = rng.randint(0, 10_000)
        train, val = split(samples, SplitSpec(seed=seed))
        again = split(samples, SplitSpec(seed=seed))
        assert (train, val) == again
        assert len(val) == round(n / 5)
        ids = [s.id for s in train] + [s.id for s in val]
        assert sorted(ids) == sorted(s.id for s in samples)
        assert len(set(ids)) == n


def test_split_rejects_bad_ratios() -> None:
    with pytest.raises(ValueError):
        SplitSpec(train_ratio=0)


def test_question_token_length_excludes_terminal_mark() -> None:
    assert question_token_length("What is this?") == 3
    assert question_token_length("What is this ?") == 3
    assert question_token_length("What is this") == 3
    assert question_token_length("") == 0


def test_compute_stats_small_fixture() -> None:
    samples = [
        _sample(
            id="a",
            caption="A large ship floating in the water",
            question="What is the ship used for?",
            triplet=KnowledgeTriplet("ship", Relation.USED_FOR, "fishing"),
            knowledge_sentence="ship is used for fishing",
            answer="ship",
        ),
        _sample(
            id="b",
            caption="Two white planes parked near a terminal",
            question="Where are the white planes parked?",
            triplet=KnowledgeTriplet("plane", Relation.AT_LOCATION, "airport"),
            knowledge_sentence="plane is at location of airport",
            answer="Two white planes",
        ),
    ]
    stats = compute_stats(samples)
    assert stats.samples == 2
    assert stats.avg_len_caption == 7.0
    assert stats.avg_len_question == pytest.approx((6 + 6) / 2)
    assert stats.question_length_histogram == {6: 2}
    # ship, water | plane, terminal
    assert stats.avg_objects_per_caption == 2.0
    # nouns: ship, plane; verbs: is, are, used, parked; adjectives: white
    assert stats.vocab_nouns == 2
    assert stats.vocab_verbs == 4
    assert stats.vocab_adjectives == 1
    assert stats.kg_entities == 4
    assert stats.kg_relations == 2
    assert stats.kg_triplets == 2
    with pytest.raises(ValueError):
        compute_stats([])


def test_save_load_round_trip_byte_identical(tmp_path) -> None:
    samples = [_sample(id="s1"), _sample(id="s2", provenance=Provenance("demo"))]
    path = tmp_path / "data.json"
    save_samples(samples, path)
    first_bytes = path.read_bytes()
    loaded = load_samples(path)
    assert loaded == samples
    save_samples(loaded, path)
    assert path.read_bytes() == first_bytes


def test_load_names_missing_field_and_position(tmp_path) -> None:
    record = _sample().to_dict()
    del record["question"]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps([_sample().to_dict(), record]), encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="missing field question at sample 1"):
        load_samples(path)


def test_load_rejects_unknown_relation(tmp_path) -> None:
    record = _sample().to_dict()
    record["triplet"]["relation"] = "PartOf"
    path = tmp_path / "broken.json"
    path.write_text(json.dumps([record]), encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="triplet.relation"):
        load_samples(path)


def test_load_rejects_non_array(tmp_path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{"id": "x"}', encoding="utf-8")
    with pytest.raises(DatasetFormatError):
        load_samples(path)


def test_scene_class_optional_in_round_trip() -> None:
    with_scene = _sample()
    without_scene = _sample(provenance=Provenance("demo"))
    assert "scene_class" in with_scene.to_dict()["provenance"]
    assert "scene_class" not in without_scene.to_dict()["provenance"]
    rebuilt = sample_from_dict(without_scene.to_dict(), 0)
    assert rebuilt.provenance.scene_class is None
