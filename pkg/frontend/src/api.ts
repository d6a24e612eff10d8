/** Thin typed client for the annotation service HTTP API. */

import type { AnnotationSubmission, ProgressPayload, TaskPayload } from "./types.js";

export interface SubmitResult {
  status: number;
  violations?: string[];
  error?: string;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly evaluatorId: string,
    private readonly token: string,
  ) {}

  private headers(): Record<string, string> {
    return { "X-Evaluator-Token": this.token, "Content-Type": "application/json" };
  }

  async instructions(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/instructions`);
    if (!response.ok) throw new ApiError("could not load instructions", response.status);
    return response.text();
  }

  /** Next unfinished task, or null when the evaluator is done. */
  async nextTask(): Promise<TaskPayload | null> {
    const response = await fetch(
      `${this.baseUrl}/api/tasks/next?evaluator=${encodeURIComponent(this.evaluatorId)}`,
      { headers: this.headers() },
    );
    if (response.status === 204) return null;
    if (response.status === 401) throw new ApiError("invalid evaluator token", 401);
    if (response.status === 404) throw new ApiError("unknown evaluator", 404);
    if (!response.ok) throw new ApiError(`task fetch failed (${response.status})`, response.status);
    return (await response.json()) as TaskPayload;
  }

  async submit(record: AnnotationSubmission): Promise<SubmitResult> {
    const response = await fetch(`${this.baseUrl}/api/annotations`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(record),
    });
    if (response.status === 201) return { status: 201 };
    if (response.status === 422) {
      const body = (await response.json()) as { violations?: string[] };
      return { status: 422, violations: body.violations ?? [] };
    }
    if (response.status === 409) return { status: 409, error: "duplicate submission" };
    return { status: response.status, error: `submission failed (${response.status})` };
  }

  async progress(): Promise<ProgressPayload> {
    const response = await fetch(`${this.baseUrl}/api/progress`);
    if (!response.ok) throw new ApiError("could not load progress", response.status);
    return (await response.json()) as ProgressPayload;
  }
}
