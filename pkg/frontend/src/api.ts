/**
 * Typed client for the annotation service HTTP API.
 *
 * All request and response shapes mirror the server's JSON exactly;
 * the UI never invents fields the service would not accept.
 */

export interface Triplet {
  head: string;
  relation: string;
  tail: string;
  weight?: number;
}

export interface Candidate {
  triplet: Triplet;
  object_entity: string;
  external_entity: string;
  sentence: string;
  topic_score?: number;
  sentence_score?: number;
}

export interface AnswerChunk {
  head_noun: string;
  surface: string;
  start: number;
  end: number;
}

export interface TaskSummary {
  id: string;
  image_ref: string;
  caption: string;
  status: string;
  candidate_count: number;
}

export interface Task {
  id: string;
  image_ref: string;
  caption: string;
  ranked_candidates: Candidate[];
  suggested_answer_chunks: AnswerChunk[];
  status: string;
  scene_class?: string;
}

export interface TaskPage {
  tasks: TaskSummary[];
  page: number;
  page_size: number;
}

export interface Progress {
  pending: number;
  done: number;
  skipped: number;
  total: number;
}

export interface Submission {
  candidate_index: number;
  question: string;
  answer: string;
}

export interface SubmitResult {
  sample: Record<string, unknown>;
  status: string;
}

/** Non-2xx response; carries the violation codes of a 422 rejection. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly violations: string[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  private readonly fetchImpl: FetchLike;

  constructor(
    private readonly base = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let violations: string[] = [];
      let message = `request failed with status ${response.status}`;
      try {
        const body: unknown = await response.json();
        if (body && typeof body === "object") {
          const record = body as Record<string, unknown>;
          if (Array.isArray(record.violations)) {
            violations = record.violations.map(String);
            message = `submission rejected: ${violations.join(", ")}`;
          } else if (typeof record.detail === "string") {
            message = record.detail;
          }
        }
      } catch {
        // body was not JSON; keep the status message
      }
      throw new ApiError(response.status, message, violations);
    }
    return (await response.json()) as T;
  }

  listTasks(status?: string, page = 0, pageSize = 20): Promise<TaskPage> {
    const params = new URLSearchParams({
      page: String(page),
      page_size: String(pageSize),
    });
    if (status !== undefined) {
      params.set("status", status);
    }
    return this.request(`/tasks?${params.toString()}`);
  }

  getTask(id: string): Promise<Task> {
    return this.request(`/tasks/${encodeURIComponent(id)}`);
  }

  submit(id: string, body: Submission): Promise<SubmitResult> {
    return this.request(`/tasks/${encodeURIComponent(id)}/annotation`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  skip(id: string): Promise<{ id: string; status: string }> {
    return this.request(`/tasks/${encodeURIComponent(id)}/skip`, { method: "POST" });
  }

  progress(): Promise<Progress> {
    return this.request("/progress");
  }
}
