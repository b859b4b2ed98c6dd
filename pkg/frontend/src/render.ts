/** Pure view-model renderers; the only code that touches the page DOM. */

import { EnrollmentView, VerificationView } from "./flows.js";

export function renderEnrollment(view: EnrollmentView, root: HTMLElement): void {
  const counter =
    view.screen === "idle"
      ? ""
      : `sample ${Math.min(view.samplesUsed + 1, view.samplesCap)} · used ${view.samplesUsed} of max ${view.samplesCap}`;
  const screens: Record<string, () => string> = {
    idle: () => `<p class="hint">enter a user id and press start</p>`,
    capturing: () => `
      <p class="counter">${counter}</p>
      <p class="feedback" data-role="feedback">${view.message}</p>`,
    enrolled: () => `
      <div class="banner ok">
        <h3>enrolled</h3>
        <p data-role="feedback">${view.message}</p>
        <p>references stored after ${view.samplesUsed} samples</p>
      </div>`,
    failed_to_enroll: () => `
      <div class="banner bad">
        <h3>enrollment failed</h3>
        <p data-role="feedback">${view.message}</p>
        <p>verification for this user must fall back to other biometrics or human checking</p>
      </div>`,
  };
  root.innerHTML = screens[view.screen]();
}

export function renderVerification(view: VerificationView, root: HTMLElement): void {
  if (view.state === "idle") {
    root.innerHTML = `<p class="hint">sign and press verify</p>`;
    return;
  }
  if (view.state === "not_enrolled" || view.state === "error") {
    root.innerHTML = `<div class="banner bad"><p data-role="feedback">${view.message}</p></div>`;
    return;
  }
  const cls = view.state === "accepted" ? "ok" : "bad";
  const bars = view.referenceScores
    .map((s) => {
      const width = Math.max(2, Math.min(100, 50 + s));
      return `<div class="bar"><span style="width:${width.toFixed(1)}%"></span><label>${s.toFixed(2)}</label></div>`;
    })
    .join("");
  root.innerHTML = `
    <div class="banner ${cls}">
      <h3 data-role="decision">${view.state}</h3>
      <p data-role="feedback">${view.message}</p>
      <p>fused score ${view.fusedScore?.toFixed(3)} vs threshold ${view.thresholdUsed?.toFixed(3)}</p>
      <div class="bars" data-role="bars">${bars}</div>
    </div>`;
}
