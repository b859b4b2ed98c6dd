import { ApiClient } from "./api.js";
import { resampleAndEncode, TooShortCaptureError, validateInterchange } from "./encode.js";
import { EnrollmentFlow, VerificationFlow } from "./flows.js";
import { SignaturePad } from "./pad.js";
import { renderEnrollment, renderVerification } from "./render.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function boot(): void {
  const api = new ApiClient("");
  const pad = new SignaturePad(element<HTMLCanvasElement>("pad"));
  const enrollment = new EnrollmentFlow(api);
  const verification = new VerificationFlow(api);
  const enrollRoot = element<HTMLElement>("enroll-panel");
  const verifyRoot = element<HTMLElement>("verify-panel");
  const userInput = element<HTMLInputElement>("user-id");
  const refsSelect = element<HTMLSelectElement>("refs-count");
  const status = element<HTMLElement>("connection");

  api
    .health()
    .then((h) => {
      status.textContent = h.calibrated ? "service ready" : "service model not calibrated";
    })
    .catch(() => {
      status.textContent = "service unreachable";
    });

  const encodeCurrent = () => {
    const userId = userInput.value.trim();
    if (!userId) throw new Error("enter a user id first");
    if (pad.isEmpty) throw new TooShortCaptureError("nothing captured yet");
    const doc = resampleAndEncode(pad.capture(), userId);
    const problems = validateInterchange(doc);
    if (problems.length > 0) throw new Error(problems.join("; "));
    return doc;
  };

  element<HTMLButtonElement>("clear").addEventListener("click", () => pad.clear());

  element<HTMLButtonElement>("enroll-start").addEventListener("click", async () => {
    try {
      await enrollment.start(
        userInput.value.trim(),
        Number(refsSelect.value) as 3 | 5,
        element<HTMLInputElement>("replace").checked,
      );
    } catch (error) {
      enrollment.view.message = error instanceof Error ? error.message : String(error);
    }
    renderEnrollment(enrollment.view, enrollRoot);
  });

  element<HTMLButtonElement>("enroll-submit").addEventListener("click", async () => {
    try {
      const doc = encodeCurrent();
      await enrollment.submitSample(doc);
      pad.clear();
    } catch (error) {
      // Local validation problems never reach the network; the ink stays.
      enrollment.view.message = error instanceof Error ? error.message : String(error);
    }
    renderEnrollment(enrollment.view, enrollRoot);
  });

  element<HTMLButtonElement>("enroll-restart").addEventListener("click", () => {
    enrollment.reset();
    pad.clear();
    renderEnrollment(enrollment.view, enrollRoot);
  });

  element<HTMLButtonElement>("verify-run").addEventListener("click", async () => {
    try {
      const doc = encodeCurrent();
      await verification.verify(userInput.value.trim(), doc);
      pad.clear();
    } catch (error) {
      verification.view = {
        state: "error",
        message: error instanceof Error ? error.message : String(error),
        fusedScore: null,
        thresholdUsed: null,
        referenceScores: [],
      };
    }
    renderVerification(verification.view, verifyRoot);
  });

  for (const name of ["enroll", "verify"] as const) {
    element<HTMLButtonElement>(`tab-${name}`).addEventListener("click", () => {
      element<HTMLElement>("enroll-section").hidden = name !== "enroll";
      element<HTMLElement>("verify-section").hidden = name !== "verify";
    });
  }
}

document.addEventListener("DOMContentLoaded", boot);
