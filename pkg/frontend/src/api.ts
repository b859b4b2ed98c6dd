/** Thin REST client for the verification service. */

import { SignatureDocument } from "./types.js";

export interface EnrollStartResponse {
  session_id: string;
  samples_needed: number;
  samples_cap: number;
}

export interface EnrollSampleResponse {
  state: "collecting" | "needs_replacement" | "enrolled" | "failed_to_enroll";
  feedback: string;
  samples_used: number;
  samples_remaining_cap: number;
}

export interface VerifyResponse {
  decision: "accept" | "reject";
  fused_score: number;
  per_reference_scores: number[];
  threshold_used: number;
  threshold_mode: string;
}

export interface UserStatus {
  enrolled: boolean;
  refs_count: number;
  it: number | null;
  enrollment_mode: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let payload: any = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload.detail === "string"
          ? payload.detail
          : JSON.stringify(payload ?? response.statusText);
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  health(): Promise<{ model_loaded: boolean; calibrated: boolean }> {
    return this.request("GET", "/api/health");
  }

  enrollStart(userId: string, refsCount?: number, replace = false): Promise<EnrollStartResponse> {
    return this.request("POST", "/api/enroll/start", {
      user_id: userId,
      refs_count: refsCount ?? null,
      replace,
    });
  }

  enrollSample(sessionId: string, signature: SignatureDocument): Promise<EnrollSampleResponse> {
    return this.request("POST", `/api/enroll/${sessionId}/sample`, signature);
  }

  verify(
    userId: string,
    signature: SignatureDocument,
    thresholdMode?: "ct" | "it",
  ): Promise<VerifyResponse> {
    return this.request("POST", "/api/verify", {
      user_id: userId,
      signature,
      threshold_mode: thresholdMode ?? null,
    });
  }

  userStatus(userId: string): Promise<UserStatus> {
    return this.request("GET", `/api/users/${encodeURIComponent(userId)}/status`);
  }
}
