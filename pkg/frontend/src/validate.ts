/**
 * Client-side mirror of the server's structural sample checks.
 *
 * The server stays authoritative; these checks only stop the UI from
 * sending a submission the server is guaranteed to reject.
 */

/** Collapse runs of whitespace, exactly like the server does. */
export function cleanAnswer(answer: string): string {
  return answer.split(/\s+/).filter(Boolean).join(" ");
}

export function validateDraft(caption: string, question: string, answer: string): string[] {
  const violations: string[] = [];
  if (question.trim() === "") {
    violations.push("question-empty");
  }
  const cleaned = cleanAnswer(answer);
  if (cleaned === "") {
    violations.push("answer-empty");
  } else if (!caption.toLowerCase().includes(cleaned.toLowerCase())) {
    violations.push("answer-not-in-caption");
  }
  return violations;
}
