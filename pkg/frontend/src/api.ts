/** Typed client for the annotation service HTTP API. */

import type {
  AgreementReport,
  ExportResponse,
  NextTaskResponse,
  Progress,
  SubmitResponse,
  Verdict,
} from "./types.js";

/** A non-2xx response with the service's machine-readable error envelope. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  /** Present on version-conflict (409) responses. */
  readonly currentVersion: number | null;

  constructor(status: number, code: string, message: string, currentVersion: number | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.currentVersion = currentVersion;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let code = "http-error";
  let message = `${response.status} ${response.statusText}`;
  let currentVersion: number | null = null;
  try {
    const body = await response.json();
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
    if (typeof body.current_version === "number") currentVersion = body.current_version;
    // FastAPI schema-validation errors use {"detail": [...]}.
    if (body.detail !== undefined && code === "http-error") {
      code = "schema-error";
      message = JSON.stringify(body.detail);
    }
  } catch {
    // Non-JSON body; keep the status-line message.
  }
  return new ApiError(response.status, code, message, currentVersion);
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // Wrapped so native fetch is never called with the client as `this`.
    this.fetchFn = (input, init) => fetchFn(input, init);
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as T;
  }

  nextTask(annotator: string): Promise<NextTaskResponse> {
    return this.get(`/api/tasks/next?annotator=${encodeURIComponent(annotator)}`);
  }

  async submit(verdict: Verdict): Promise<SubmitResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    });
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as SubmitResponse;
  }

  agreement(): Promise<AgreementReport> {
    return this.get("/api/agreement");
  }

  progress(annotator: string): Promise<Progress> {
    return this.get(`/api/progress?annotator=${encodeURIComponent(annotator)}`);
  }

  exportRecords(): Promise<ExportResponse> {
    return this.get("/api/export");
  }
}
