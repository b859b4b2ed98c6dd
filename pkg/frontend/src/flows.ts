/**
 * Flow controllers: the sample-by-sample enrollment conversation and the
 * single-shot verification, each exposing a plain view model the UI renders.
 * Network failures keep the captured sample so the user can retry without
 * signing again.
 */

import { ApiClient, ApiError, EnrollSampleResponse, VerifyResponse } from "./api.js";
import { SignatureDocument } from "./types.js";

export type EnrollmentScreen =
  | "idle"
  | "capturing"
  | "enrolled"
  | "failed_to_enroll";

export interface EnrollmentView {
  screen: EnrollmentScreen;
  message: string;
  userId: string;
  samplesUsed: number;
  samplesNeeded: number;
  samplesCap: number;
  awaitingReplacement: boolean;
  pendingRetry: boolean;
}

const START_MESSAGE = "sign on the pad and submit your first sample";

export class EnrollmentFlow {
  private sessionId: string | null = null;
  private retrySample: SignatureDocument | null = null;
  view: EnrollmentView = {
    screen: "idle",
    message: "",
    userId: "",
    samplesUsed: 0,
    samplesNeeded: 0,
    samplesCap: 0,
    awaitingReplacement: false,
    pendingRetry: false,
  };

  constructor(private api: ApiClient) {}

  async start(userId: string, refsCount?: number, replace = false): Promise<EnrollmentView> {
    const response = await this.api.enrollStart(userId, refsCount, replace);
    this.sessionId = response.session_id;
    this.retrySample = null;
    this.view = {
      screen: "capturing",
      message: START_MESSAGE,
      userId,
      samplesUsed: 0,
      samplesNeeded: response.samples_needed,
      samplesCap: response.samples_cap,
      awaitingReplacement: false,
      pendingRetry: false,
    };
    return this.view;
  }

  /** Submit one captured sample; returns the updated view model. */
  async submitSample(signature: SignatureDocument): Promise<EnrollmentView> {
    if (this.sessionId === null) throw new Error("enrollment has not started");
    let response: EnrollSampleResponse;
    try {
      response = await this.api.enrollSample(this.sessionId, signature);
    } catch (error) {
      if (error instanceof ApiError) {
        // Capture-level rejections (degenerate, malformed) do not consume
        // the sample budget; surface the reason and let the user re-sign.
        this.view = {
          ...this.view,
          message: `sample not usable: ${error.detail}`,
          pendingRetry: false,
        };
        return this.view;
      }
      // Network failure: keep the sample for a retry without re-signing.
      this.retrySample = signature;
      this.view = {
        ...this.view,
        message: "network problem, sample kept; press retry",
        pendingRetry: true,
      };
      return this.view;
    }
    this.retrySample = null;
    this.view = {
      ...this.view,
      screen:
        response.state === "enrolled"
          ? "enrolled"
          : response.state === "failed_to_enroll"
            ? "failed_to_enroll"
            : "capturing",
      message: response.feedback,
      samplesUsed: response.samples_used,
      samplesCap: this.view.samplesCap,
      awaitingReplacement: response.state === "needs_replacement",
      pendingRetry: false,
    };
    return this.view;
  }

  async retry(): Promise<EnrollmentView> {
    if (this.retrySample === null) return this.view;
    return this.submitSample(this.retrySample);
  }

  reset(): EnrollmentView {
    this.sessionId = null;
    this.retrySample = null;
    this.view = { ...this.view, screen: "idle", message: "", samplesUsed: 0 };
    return this.view;
  }
}

export interface VerificationView {
  state: "idle" | "accepted" | "rejected" | "not_enrolled" | "error";
  message: string;
  fusedScore: number | null;
  thresholdUsed: number | null;
  referenceScores: number[];
}

export class VerificationFlow {
  view: VerificationView = {
    state: "idle",
    message: "",
    fusedScore: null,
    thresholdUsed: null,
    referenceScores: [],
  };

  constructor(private api: ApiClient) {}

  async verify(
    userId: string,
    signature: SignatureDocument,
    thresholdMode?: "ct" | "it",
  ): Promise<VerificationView> {
    let response: VerifyResponse;
    try {
      response = await this.api.verify(userId, signature, thresholdMode);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.view = {
          state: "not_enrolled",
          message: `${userId} is not enrolled yet; switch to the enrollment tab`,
          fusedScore: null,
          thresholdUsed: null,
          referenceScores: [],
        };
        return this.view;
      }
      this.view = {
        state: "error",
        message: error instanceof Error ? error.message : String(error),
        fusedScore: null,
        thresholdUsed: null,
        referenceScores: [],
      };
      return this.view;
    }
    this.view = {
      state: response.decision === "accept" ? "accepted" : "rejected",
      message:
        response.decision === "accept"
          ? "signature accepted"
          : "signature rejected, you may retry",
      fusedScore: response.fused_score,
      thresholdUsed: response.threshold_used,
      referenceScores: response.per_reference_scores,
    };
    return this.view;
  }
}
