/**
 * DOM rendering. One render() call rebuilds the whole view from
 * state; syncControls() refreshes only the submit gate so typing in
 * the question box never rebuilds (and never loses focus on) the
 * inputs.
 */

import type { Progress } from "./api.js";
import { canSubmit, type ViewState } from "./state.js";

export interface Handlers {
  onSelect(index: number): void;
  onQuestion(value: string): void;
  onAnswer(value: string): void;
  onPickChunk(surface: string): void;
  onSubmit(): void;
  onSkip(): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderProgress(doc: Document, progress: Progress): HTMLElement {
  const finished = progress.done + progress.skipped;
  const box = el(doc, "div", { id: "progress" });
  box.appendChild(
    el(
      doc,
      "span",
      { class: "progress-text" },
      `${progress.done} done, ${progress.skipped} skipped, ${progress.pending} pending of ${progress.total}`,
    ),
  );
  const track = el(doc, "div", { class: "progress-track" });
  const fill = el(doc, "div", { class: "progress-fill" });
  fill.style.width = progress.total > 0 ? `${(100 * finished) / progress.total}%` : "0%";
  track.appendChild(fill);
  box.appendChild(track);
  return box;
}

export function render(
  root: HTMLElement,
  state: ViewState,
  progress: Progress | null,
  handlers: Handlers,
): void {
  const doc = root.ownerDocument;
  root.replaceChildren();

  if (progress) {
    root.appendChild(renderProgress(doc, progress));
  }

  if (state.networkError) {
    const banner = el(doc, "div", { id: "network-banner", class: "banner error" });
    banner.appendChild(el(doc, "span", {}, state.networkError));
    const retry = el(doc, "button", { id: "retry", type: "button" }, "Retry");
    retry.addEventListener("click", () => handlers.onRetry());
    banner.appendChild(retry);
    root.appendChild(banner);
  }

  if (state.finished) {
    root.appendChild(
      el(doc, "div", { id: "done-banner", class: "banner" }, "All tasks are annotated."),
    );
    return;
  }

  const task = state.task;
  if (!task) {
    if (!state.networkError) {
      root.appendChild(el(doc, "p", { id: "loading" }, "Loading tasks..."));
    }
    return;
  }

  const header = el(doc, "div", { class: "task-header" });
  header.appendChild(el(doc, "span", { id: "image-ref" }, task.image_ref));
  if (task.scene_class) {
    header.appendChild(el(doc, "span", { id: "scene-class" }, task.scene_class));
  }
  root.appendChild(header);
  root.appendChild(el(doc, "p", { id: "caption" }, task.caption));

  const candidates = el(doc, "ol", { id: "candidates" });
  task.ranked_candidates.forEach((candidate, index) => {
    const item = el(doc, "li", {});
    const selected = state.draft.candidateIndex === index;
    const button = el(doc, "button", {
      class: selected ? "candidate selected" : "candidate",
      type: "button",
      "data-index": String(index),
    });
    const keyLabel = index < 9 ? String(index + 1) : index === 9 ? "0" : "";
    button.appendChild(el(doc, "span", { class: "key" }, keyLabel));
    button.appendChild(el(doc, "span", { class: "sentence" }, candidate.sentence));
    if (candidate.sentence_score !== undefined) {
      button.appendChild(el(doc, "span", { class: "score" }, candidate.sentence_score.toFixed(3)));
    }
    button.addEventListener("click", () => handlers.onSelect(index));
    item.appendChild(button);
    candidates.appendChild(item);
  });
  root.appendChild(candidates);

  const chosen =
    state.draft.candidateIndex !== null
      ? task.ranked_candidates[state.draft.candidateIndex]
      : null;
  root.appendChild(
    el(
      doc,
      "p",
      { id: "preview", class: chosen ? "preview" : "preview empty" },
      chosen ? chosen.sentence : "Select a triplet (number keys 1-9, 0 for the tenth).",
    ),
  );

  root.appendChild(el(doc, "label", { for: "question" }, "Question"));
  const question = el(doc, "textarea", {
    id: "question",
    rows: "2",
    placeholder: "What are the boats on?",
  });
  question.value = state.draft.question;
  question.addEventListener("input", () => handlers.onQuestion(question.value));
  root.appendChild(question);

  root.appendChild(el(doc, "label", { for: "answer" }, "Answer (must appear in the caption)"));
  const answer = el(doc, "input", { id: "answer", type: "text" });
  answer.value = state.draft.answer;
  answer.addEventListener("input", () => handlers.onAnswer(answer.value));
  root.appendChild(answer);

  const chunks = el(doc, "div", { id: "chunks" });
  for (const chunk of task.suggested_answer_chunks) {
    const pick = el(doc, "button", { class: "chunk", type: "button" }, chunk.surface);
    pick.addEventListener("click", () => handlers.onPickChunk(chunk.surface));
    chunks.appendChild(pick);
  }
  root.appendChild(chunks);

  if (state.violations.length > 0) {
    const list = el(doc, "ul", { id: "violations" });
    for (const code of state.violations) {
      list.appendChild(el(doc, "li", {}, code));
    }
    root.appendChild(list);
  }

  const actions = el(doc, "div", { class: "actions" });
  const submit = el(doc, "button", { id: "submit", type: "button" },
    state.submitting ? "Submitting..." : "Submit");
  submit.disabled = !canSubmit(state);
  submit.addEventListener("click", () => handlers.onSubmit());
  const skip = el(doc, "button", { id: "skip", type: "button" }, "Skip");
  skip.addEventListener("click", () => handlers.onSkip());
  actions.appendChild(submit);
  actions.appendChild(skip);
  root.appendChild(actions);
}

/** Refresh the submit gate in place, without rebuilding the inputs. */
export function syncControls(root: HTMLElement, state: ViewState): void {
  const submit = root.querySelector<HTMLButtonElement>("#submit");
  if (submit) {
    submit.disabled = !canSubmit(state);
  }
}
