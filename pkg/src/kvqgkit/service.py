"""Annotation backend: task store with append-only log and HTTP API.

Tasks pair one caption with its top-ranked knowledge triplets; a human
picks a triplet, writes a question, and names an answer chunk.  Valid
submissions become dataset samples.  All state changes are appended to
a JSON Lines log; replaying the log reconstructs the store exactly.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from pydantic import BaseModel

from .dataset import Provenance, Sample, sample_from_dict, validate
from .kg import KnowledgeIndex, KnowledgeTriplet, Relation, normalize_concept
from .nlp import Lexicon, NounChunk, extract_noun_chunks, extract_nouns
from .ranking import DEFAULT_TOP_K, RankedCandidate, ScoreBand, rank_candidates
from .scorers import Scorer
from .templates import TEMPLATES, render

PENDING = "pending"
DONE = "done"
SKIPPED = "skipped"
STATUSES = frozenset({PENDING, DONE, SKIPPED})

DEFAULT_PAGE_SIZE = 20


class StoreNotInitializedError(RuntimeError):
    """The store holds no tasks yet; run an assembly step first."""


class TaskNotFoundError(KeyError):
    """No task with the requested id."""


class TaskConflictError(RuntimeError):
    """The task already left the pending state."""


class SubmissionRejectedError(ValueError):
    """The submitted annotation failed sample validation."""

    def __init__(self, violations: Sequence[str]):
        super().__init__(f"annotation rejected: {', '.join(violations)}")
        self.violations = list(violations)


def _candidate_to_dict(candidate: RankedCandidate) -> dict:
    out = candidate.to_dict()
    out["triplet"]["weight"] = candidate.triplet.weight
    return out


def _candidate_from_dict(record: dict) -> RankedCandidate:
    t = record["triplet"]
    relation = Relation.from_label(t["relation"])
    if relation is None:
        raise ValueError(f"unknown relation {t['relation']!r} in task record")
    triplet = KnowledgeTriplet(
        head=t["head"],
        relation=relation,
        tail=t["tail"],
        weight=float(t.get("weight", 1.0)),
    )
    return RankedCandidate(
        triplet=triplet,
        object_entity=record["object_entity"],
        external_entity=record["external_entity"],
        topic_score=record.get("topic_score"),
        sentence_score=record.get("sentence_score"),
    )


def _chunk_to_dict(chunk: NounChunk) -> dict:
    return {
        "head_noun": chunk.head_noun,
        "surface": chunk.surface,
        "start": chunk.start,
        "end": chunk.end,
    }


def _chunk_from_dict(record: dict) -> NounChunk:
    return NounChunk(
        head_noun=record["head_noun"],
        surface=record["surface"],
        start=record["start"],
        end=record["end"],
    )


@dataclass
class AnnotationTask:
    """One caption awaiting a triplet choice and a question."""

    id: str
    image_ref: str
    caption: str
    ranked_candidates: list[RankedCandidate]
    suggested_answer_chunks: list[NounChunk] = field(default_factory=list)
    status: str = PENDING
    scene_class: str | None = None

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown task status {self.status!r}")
        scores = [
            c.sentence_score for c in self.ranked_candidates if c.sentence_score is not None
        ]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"task {self.id}: candidates not sorted by sentence score")

    def summary(self) -> dict:
        return {
            "id": self.id,
            "image_ref": self.image_ref,
            "caption": self.caption,
            "status": self.status,
            "candidate_count": len(self.ranked_candidates),
        }

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "image_ref": self.image_ref,
            "caption": self.caption,
            "ranked_candidates": [_candidate_to_dict(c) for c in self.ranked_candidates],
            "suggested_answer_chunks": [_chunk_to_dict(c) for c in self.suggested_answer_chunks],
            "status": self.status,
        }
        if self.scene_class is not None:
            out["scene_class"] = self.scene_class
        return out

    @classmethod
    def from_dict(cls, record: dict) -> "AnnotationTask":
        return cls(
            id=record["id"],
            image_ref=record["image_ref"],
            caption=record["caption"],
            ranked_candidates=[_candidate_from_dict(c) for c in record["ranked_candidates"]],
            suggested_answer_chunks=[
                _chunk_from_dict(c) for c in record.get("suggested_answer_chunks", [])
            ],
            status=record.get("status", PENDING),
            scene_class=record.get("scene_class"),
        )


def build_tasks(
    records: Iterable[dict],
    index: KnowledgeIndex,
    topic_scorer: Scorer,
    sentence_scorer: Scorer | None = None,
    band: ScoreBand = ScoreBand(),
    k: int = DEFAULT_TOP_K,
    lexicon: Lexicon | None = None,
) -> list[AnnotationTask]:
    """Rank triplets for each caption record and package it as a task.

    Each record needs ``id``, ``image``, and ``caption`` keys; an
    optional ``scene_class`` is carried through to sample provenance.
    Answer suggestions are the caption noun chunks whose head is one of
    the object entities a ranked candidate was retrieved for.
    """
    tasks: list[AnnotationTask] = []
    for record in records:
        caption = record["caption"]
        objects = extract_nouns(caption, lexicon)
        ranked = rank_candidates(
            caption, objects, index, topic_scorer, sentence_scorer, band, k
        )
        object_entities = {c.object_entity for c in ranked}
        chunks = [
            chunk
            for chunk in extract_noun_chunks(caption, lexicon)
            if normalize_concept(chunk.head_noun) in object_entities
        ]
        tasks.append(
            AnnotationTask(
                id=str(record["id"]),
                image_ref=record["image"],
                caption=caption,
                ranked_candidates=ranked,
                suggested_answer_chunks=chunks,
                scene_class=record.get("scene_class"),
            )
        )
    return tasks


def knowledge_sentence_for(
    triplet: KnowledgeTriplet,
    answer: str,
    chunks: Sequence[NounChunk] = (),
    lexicon: Lexicon | None = None,
) -> str:
    """Render the triplet, substituting the answer for a matching endpoint.

    The answer's head noun comes from the suggested chunk with the same
    surface text, else from chunking the answer itself.  If the head
    matches neither endpoint the plain rendering is returned.
    """
    cleaned = " ".join(answer.split())
    head_label = None
    for chunk in chunks:
        if chunk.surface.casefold() == cleaned.casefold():
            head_label = normalize_concept(chunk.head_noun)
            break
    if head_label is None:
        own = extract_noun_chunks(cleaned, lexicon)
        if own:
            head_label = normalize_concept(own[-1].head_noun)
    predicate = TEMPLATES[triplet.relation]
    if head_label == triplet.head:
        return f"{cleaned} {predicate} {triplet.tail}"
    if head_label == triplet.tail:
        return f"{triplet.head} {predicate} {cleaned}"
    return render(triplet)


class TaskStore:
    """Annotation state: tasks, accepted samples, and their event log.

    Every mutation is an event dict applied to in-memory state and, when
    a log path is set, appended as one JSON line.  Reads are lock-free;
    writes serialize through a single lock, and a submit either fully
    lands (validate + append + status flip) or changes nothing.
    """

    def __init__(self, log_path: Union[str, Path, None] = None, dataset_name: str = "annotated"):
        self._log_path = Path(log_path) if log_path is not None else None
        self._lock = threading.Lock()
        self._initialized = False
        self.dataset_name = dataset_name
        self._tasks: dict[str, AnnotationTask] = {}
        self._samples: list[Sample] = []

    # --- construction ---

    @classmethod
    def open(cls, log_path: Union[str, Path]) -> "TaskStore":
        """Open a store at ``log_path``, replaying the log if it exists."""
        store = cls(log_path=log_path)
        path = Path(log_path)
        if path.exists() and path.stat().st_size > 0:
            with path.open("r", encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        event = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ValueError(f"corrupt log line {line_no}: {exc}") from exc
                    store._apply(event)
        return store

    def initialize(self, tasks: Sequence[AnnotationTask], dataset_name: str | None = None) -> None:
        """Load tasks into a fresh store, logging one event per task."""
        with self._lock:
            if self._initialized:
                raise TaskConflictError("store already initialized")
            events = [
                {"event": "init", "dataset_name": dataset_name or self.dataset_name}
            ]
            events.extend({"event": "task", "task": task.to_dict()} for task in tasks)
            for event in events:
                self._apply(event)
                self._append(event)

    # --- event machinery ---

    def _apply(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "init":
            self._initialized = True
            self.dataset_name = event["dataset_name"]
        elif kind == "task":
            task = AnnotationTask.from_dict(event["task"])
            if task.id in self._tasks:
                raise ValueError(f"duplicate task id {task.id!r}")
            self._tasks[task.id] = task
            self._initialized = True
        elif kind == "annotation":
            self._tasks[event["task_id"]].status = DONE
            self._samples.append(sample_from_dict(event["sample"], len(self._samples)))
        elif kind == "skip":
            self._tasks[event["task_id"]].status = SKIPPED
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _append(self, event: dict) -> None:
        if self._log_path is None:
            return
        line = json.dumps(event, ensure_ascii=False, sort_keys=True)
        with self._log_path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    # --- reads ---

    @property
    def initialized(self) -> bool:
        return self._initialized

    @property
    def samples(self) -> list[Sample]:
        return list(self._samples)

    def list_tasks(
        self,
        status: str | None = None,
        page: int = 0,
        page_size: int = DEFAULT_PAGE_SIZE,
    ) -> list[dict]:
        """Task summaries ordered by id; pages beyond the end are empty."""
        if not self._initialized:
            raise StoreNotInitializedError("no tasks loaded")
        if status is not None and status not in STATUSES:
            raise ValueError(f"unknown status filter {status!r}")
        if page < 0 or page_size <= 0:
            raise ValueError("page must be >= 0 and page_size > 0")
        tasks = [t for _, t in sorted(self._tasks.items())]
        if status is not None:
            tasks = [t for t in tasks if t.status == status]
        start = page * page_size
        return [t.summary() for t in tasks[start : start + page_size]]

    def get_task(self, task_id: str) -> AnnotationTask:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise TaskNotFoundError(task_id) from None

    def progress(self) -> dict:
        counts = {PENDING: 0, DONE: 0, SKIPPED: 0}
        for task in self._tasks.values():
            counts[task.status] += 1
        counts["total"] = len(self._tasks)
        return counts

    def state_dict(self) -> dict:
        """Full state snapshot used to compare replayed stores."""
        return {
            "dataset_name": self.dataset_name,
            "initialized": self._initialized,
            "tasks": [task.to_dict() for _, task in sorted(self._tasks.items())],
            "samples": [sample.to_dict() for sample in self._samples],
        }

    # --- writes ---

    def submit_annotation(
        self, task_id: str, candidate_index: int, question: str, answer: str
    ) -> Sample:
        """Validate and persist one human annotation; reject bad ones.

        Rejections leave the task pending and append nothing.
        """
        if not self._initialized:
            raise StoreNotInitializedError("no tasks loaded")
        with self._lock:
            task = self.get_task(task_id)
            if task.status != PENDING:
                raise TaskConflictError(f"task {task_id} is {task.status}")
            if not 0 <= candidate_index < len(task.ranked_candidates):
                raise ValueError(
                    f"candidate_index {candidate_index} out of range "
                    f"[0, {len(task.ranked_candidates)})"
                )
            chosen = task.ranked_candidates[candidate_index]
            cleaned_answer = " ".join(answer.split())
            sentence = knowledge_sentence_for(
                chosen.triplet, cleaned_answer, task.suggested_answer_chunks
            )
            sample = Sample(
                id=task.id,
                image=task.image_ref,
                caption=task.caption,
                triplet=chosen.triplet,
                knowledge_sentence=sentence,
                question=question.strip(),
                answer=cleaned_answer,
                provenance=Provenance(
                    dataset_name=self.dataset_name, scene_class=task.scene_class
                ),
            )
            violations = validate(sample)
            if violations:
                raise SubmissionRejectedError(violations)
            event = {
                "event": "annotation",
                "task_id": task_id,
                "sample": sample.to_dict(),
            }
            self._apply(event)
            self._append(event)
            return sample

    def skip_task(self, task_id: str) -> AnnotationTask:
        if not self._initialized:
            raise StoreNotInitializedError("no tasks loaded")
        with self._lock:
            task = self.get_task(task_id)
            if task.status != PENDING:
                raise TaskConflictError(f"task {task_id} is {task.status}")
            event = {"event": "skip", "task_id": task_id}
            self._apply(event)
            self._append(event)
            return task


class AnnotationBody(BaseModel):
    candidate_index: int
    question: str
    answer: str


def create_app(store: TaskStore, ui_dir: Union[str, Path, None] = None):
    """Build the FastAPI app for a store; optionally serve a UI bundle."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse

    app = FastAPI(title="knowledge question annotation", version="0.1.0")

    @app.get("/progress")
    def progress() -> dict:
        return store.progress()

    @app.get("/tasks")
    def list_tasks(
        status: str | None = None,
        page: int = 0,
        page_size: int = DEFAULT_PAGE_SIZE,
    ) -> dict:
        try:
            summaries = store.list_tasks(status=status, page=page, page_size=page_size)
        except StoreNotInitializedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"tasks": summaries, "page": page, "page_size": page_size}

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str) -> dict:
        try:
            return store.get_task(task_id).to_dict()
        except TaskNotFoundError:
            raise HTTPException(status_code=404, detail=f"no task {task_id!r}")

    @app.post("/tasks/{task_id}/annotation")
    def submit(task_id: str, body: AnnotationBody):
        try:
            sample = store.submit_annotation(
                task_id, body.candidate_index, body.question, body.answer
            )
        except TaskNotFoundError:
            raise HTTPException(status_code=404, detail=f"no task {task_id!r}")
        except (StoreNotInitializedError, TaskConflictError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except SubmissionRejectedError as exc:
            return JSONResponse(status_code=422, content={"violations": exc.violations})
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"sample": sample.to_dict(), "status": DONE}

    @app.post("/tasks/{task_id}/skip")
    def skip(task_id: str) -> dict:
        try:
            task = store.skip_task(task_id)
        except TaskNotFoundError:
            raise HTTPException(status_code=404, detail=f"no task {task_id!r}")
        except (StoreNotInitializedError, TaskConflictError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"id": task.id, "status": task.status}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
