/** Thin fetch client for the annotation-service JSON API. */

import type {
  Choice,
  FeatureMeans,
  FeatureTaskPayload,
  HumanRankReport,
  IaaReport,
  ProgressReport,
  TaskPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string | null = null,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Annotator-Token"] = this.token;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; run_id: string }> {
    return this.request("GET", "/api/health");
  }

  nextTask(): Promise<TaskPayload> {
    return this.request("GET", "/api/task");
  }

  submitChoice(tournamentId: string, choice: Choice, supersede = false): Promise<{ ok: boolean }> {
    return this.request("POST", "/api/choice", {
      tournament_id: tournamentId,
      choice,
      supersede,
    });
  }

  nextFeatureTask(): Promise<FeatureTaskPayload> {
    return this.request("GET", "/api/feature-task");
  }

  submitFeature(taskId: string, values: Record<string, number>, supersede = false): Promise<{ ok: boolean }> {
    return this.request("POST", "/api/feature", { task_id: taskId, supersede, ...values });
  }

  progress(): Promise<ProgressReport> {
    return this.request("GET", "/api/progress");
  }

  iaaReport(): Promise<IaaReport> {
    return this.request("GET", "/api/reports/iaa");
  }

  humanRank(partial = false): Promise<HumanRankReport> {
    return this.request("GET", `/api/reports/human-rank${partial ? "?partial=true" : ""}`);
  }

  featureMeans(): Promise<FeatureMeans> {
    return this.request("GET", "/api/reports/features");
  }
}
