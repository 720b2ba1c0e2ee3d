/**
 * Application wiring: one annotator session in one browser tab.
 *
 * The server stays authoritative over task state; this module only
 * keeps the current task, a locally persisted draft, and the handlers
 * that talk to the annotation API.
 */

import { ApiError, Client, type Progress, type Submission } from "./api.js";
import { render, syncControls, type Handlers } from "./render.js";
import {
  applyNetworkError,
  applyViolations,
  beginSubmit,
  canSubmit,
  clearDraft,
  clientViolations,
  initialState,
  keyToCandidateIndex,
  loadDraft,
  saveDraft,
  selectCandidate,
  setAnswer,
  setQuestion,
  withFinished,
  withTask,
  type StorageLike,
  type ViewState,
} from "./state.js";
import { cleanAnswer } from "./validate.js";

export interface AppOptions {
  client?: Client;
  root?: HTMLElement;
  storage?: StorageLike;
  doc?: Document;
}

export interface App {
  /** Resolves once the first task (or the finished state) is shown. */
  ready: Promise<void>;
}

export function createApp(options: AppOptions = {}): App {
  const doc = options.doc ?? document;
  const root = options.root ?? (doc.getElementById("app") as HTMLElement);
  const client = options.client ?? new Client();
  const storage = options.storage ?? window.localStorage;

  let view: ViewState = initialState();
  let progress: Progress | null = null;

  function paint(): void {
    render(root, view, progress, handlers);
  }

  function persist(): void {
    if (view.task) {
      saveDraft(storage, view.task.id, view.draft);
    }
  }

  async function refreshProgress(): Promise<void> {
    try {
      progress = await client.progress();
    } catch {
      progress = null;
    }
  }

  async function loadNext(): Promise<void> {
    const page = await client.listTasks("pending", 0, 1);
    await refreshProgress();
    if (page.tasks.length === 0) {
      view = withFinished(view);
      paint();
      return;
    }
    const task = await client.getTask(page.tasks[0].id);
    view = withTask(view, task, loadDraft(storage, task.id));
    paint();
  }

  async function submit(): Promise<void> {
    if (!canSubmit(view) || !view.task) {
      return;
    }
    const pending = clientViolations(view);
    if (pending.length > 0) {
      view = applyViolations(view, pending);
      paint();
      return;
    }
    const task = view.task;
    const body: Submission = {
      candidate_index: view.draft.candidateIndex as number,
      question: view.draft.question.trim(),
      answer: cleanAnswer(view.draft.answer),
    };
    view = beginSubmit(view);
    paint();
    try {
      await client.submit(task.id, body);
      clearDraft(storage, task.id);
      view = { ...view, submitting: false };
      await loadNext();
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        view = applyViolations(view, error.violations);
      } else if (error instanceof ApiError) {
        view = applyNetworkError(view, error.message);
      } else {
        view = applyNetworkError(view, "network failure, the draft was kept");
      }
      paint();
    }
  }

  async function skip(): Promise<void> {
    if (!view.task) {
      return;
    }
    const task = view.task;
    try {
      await client.skip(task.id);
      clearDraft(storage, task.id);
      await loadNext();
    } catch {
      view = applyNetworkError(view, "network failure, the task was not skipped");
      paint();
    }
  }

  const handlers: Handlers = {
    onSelect(index) {
      view = selectCandidate(view, index);
      persist();
      paint();
    },
    onQuestion(value) {
      view = setQuestion(view, value);
      persist();
      syncControls(root, view);
    },
    onAnswer(value) {
      view = setAnswer(view, value);
      persist();
      syncControls(root, view);
    },
    onPickChunk(surface) {
      view = setAnswer(view, surface);
      persist();
      paint();
    },
    onSubmit() {
      void submit();
    },
    onSkip() {
      void skip();
    },
    onRetry() {
      view = { ...view, networkError: null };
      if (view.task) {
        void submit();
      } else {
        void start();
      }
    },
  };

  doc.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    const typing =
      target !== null && (target.tagName === "INPUT" || target.tagName === "TEXTAREA");
    if (typing) {
      if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) {
        event.preventDefault();
        void submit();
      }
      return;
    }
    if (!view.task) {
      return;
    }
    const index = keyToCandidateIndex(event.key, view.task.ranked_candidates.length);
    if (index !== null) {
      event.preventDefault();
      handlers.onSelect(index);
    }
  });

  function start(): Promise<void> {
    return loadNext().catch(() => {
      view = applyNetworkError(view, "cannot reach the annotation service");
      paint();
    });
  }

  paint();
  return { ready: start() };
}

// boot in the browser; tests construct the app explicitly
if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  createApp();
}
