/**
 * View state for one annotation session.
 *
 * All transitions are pure functions over ViewState so the gating
 * rules (when submit is allowed, what survives a rejection) are
 * testable without a DOM.
 */

import type { Task } from "./api.js";
import { validateDraft } from "./validate.js";

export interface Draft {
  candidateIndex: number | null;
  question: string;
  answer: string;
}

export interface ViewState {
  task: Task | null;
  draft: Draft;
  violations: string[];
  networkError: string | null;
  submitting: boolean;
  finished: boolean;
}

export function emptyDraft(): Draft {
  return { candidateIndex: null, question: "", answer: "" };
}

export function initialState(): ViewState {
  return {
    task: null,
    draft: emptyDraft(),
    violations: [],
    networkError: null,
    submitting: false,
    finished: false,
  };
}

/** Install a task, carrying over a restored draft when one is given. */
export function withTask(state: ViewState, task: Task, draft?: Draft | null): ViewState {
  return {
    ...state,
    task,
    draft: draft ?? emptyDraft(),
    violations: [],
    networkError: null,
    submitting: false,
    finished: false,
  };
}

export function withFinished(state: ViewState): ViewState {
  return { ...state, task: null, draft: emptyDraft(), violations: [], finished: true };
}

export function selectCandidate(state: ViewState, index: number): ViewState {
  if (!state.task || index < 0 || index >= state.task.ranked_candidates.length) {
    return state;
  }
  return { ...state, draft: { ...state.draft, candidateIndex: index } };
}

export function setQuestion(state: ViewState, question: string): ViewState {
  return { ...state, draft: { ...state.draft, question } };
}

export function setAnswer(state: ViewState, answer: string): ViewState {
  return { ...state, draft: { ...state.draft, answer } };
}

/** Submit stays disabled until a candidate is picked and the question is nonempty. */
export function canSubmit(state: ViewState): boolean {
  return (
    state.task !== null &&
    !state.submitting &&
    state.draft.candidateIndex !== null &&
    state.draft.question.trim() !== ""
  );
}

/** Every structural violation the server would report for this draft. */
export function clientViolations(state: ViewState): string[] {
  if (!state.task) {
    return [];
  }
  return validateDraft(state.task.caption, state.draft.question, state.draft.answer);
}

/** Record rejection codes; the draft is deliberately left untouched. */
export function applyViolations(state: ViewState, violations: string[]): ViewState {
  return { ...state, violations: [...violations], submitting: false, networkError: null };
}

export function applyNetworkError(state: ViewState, message: string): ViewState {
  return { ...state, networkError: message, submitting: false };
}

export function beginSubmit(state: ViewState): ViewState {
  return { ...state, submitting: true, violations: [], networkError: null };
}

/** Map a number key to a candidate index: 1..9 pick the first nine, 0 picks the tenth. */
export function keyToCandidateIndex(key: string, candidateCount: number): number | null {
  if (!/^[0-9]$/.test(key)) {
    return null;
  }
  const index = key === "0" ? 9 : Number(key) - 1;
  return index < candidateCount ? index : null;
}

// --- draft persistence ---

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function draftKey(taskId: string): string {
  return `kvqg-draft:${taskId}`;
}

export function saveDraft(storage: StorageLike, taskId: string, draft: Draft): void {
  storage.setItem(draftKey(taskId), JSON.stringify(draft));
}

export function loadDraft(storage: StorageLike, taskId: string): Draft | null {
  const raw = storage.getItem(draftKey(taskId));
  if (raw === null) {
    return null;
  }
  try {
    const parsed: unknown = JSON.parse(raw);
    if (!parsed || typeof parsed !== "object") {
      return null;
    }
    const record = parsed as Record<string, unknown>;
    const candidateIndex =
      typeof record.candidateIndex === "number" ? record.candidateIndex : null;
    return {
      candidateIndex,
      question: typeof record.question === "string" ? record.question : "",
      answer: typeof record.answer === "string" ? record.answer : "",
    };
  } catch {
    return null;
  }
}

export function clearDraft(storage: StorageLike, taskId: string): void {
  storage.removeItem(draftKey(taskId));
}
