/**
 * Conversion of captured pointer strokes into the interchange format.
 *
 * The capture is resampled by linear interpolation onto a uniform 100 Hz
 * grid spanning the first to the last event. Positions are scaled into the
 * tablet ranges preserving aspect ratio (browser y points down, tablet y
 * up, so the vertical axis is flipped). Pen-up gaps between strokes encode
 * as pressure 0 with the position held at the last pen-down point.
 */

import {
  Capture,
  CapturedStroke,
  PointerSample,
  SignatureDocument,
  TABLET_RANGES,
} from "./types.js";

export const TARGET_RATE_HZ = 100;
export const MIN_CAPTURE_MS = 30;
export const MIN_EVENTS = 3;

export class TooShortCaptureError extends Error {}

interface TimelinePoint {
  t: number;
  x: number;
  y: number;
  p: number;
  tiltX: number | undefined;
  tiltY: number | undefined;
  penDown: boolean;
}

/** Flatten strokes into one timeline with synthetic pen-up boundary points. */
function buildTimeline(strokes: CapturedStroke[]): TimelinePoint[] {
  const timeline: TimelinePoint[] = [];
  for (const stroke of strokes) {
    for (let i = 0; i < stroke.events.length; i++) {
      const e = stroke.events[i];
      timeline.push({
        t: e.t_ms,
        x: e.x_px,
        y: e.y_px,
        p: e.pressure,
        tiltX: e.tilt_x,
        tiltY: e.tilt_y,
        penDown: true,
      });
    }
    const last = stroke.events[stroke.events.length - 1];
    if (last !== undefined) {
      // Boundary marker: the gap after this stroke holds position with p=0.
      timeline.push({
        t: last.t_ms,
        x: last.x_px,
        y: last.y_px,
        p: 0,
        tiltX: last.tilt_x,
        tiltY: last.tilt_y,
        penDown: false,
      });
    }
  }
  timeline.sort((a, b) => a.t - b.t);
  return timeline;
}

function interpolateAt(timeline: TimelinePoint[], t: number): TimelinePoint {
  if (t <= timeline[0].t) return timeline[0];
  if (t >= timeline[timeline.length - 1].t) return timeline[timeline.length - 1];
  let lo = 0;
  let hi = timeline.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (timeline[mid].t <= t) lo = mid;
    else hi = mid;
  }
  const a = timeline[lo];
  const b = timeline[hi];
  if (!a.penDown) {
    // Inside a pen-up gap: hold the position of the stroke that ended.
    return { ...a, t };
  }
  const span = b.t - a.t;
  const w = span > 0 ? (t - a.t) / span : 0;
  return {
    t,
    x: a.x + w * (b.x - a.x),
    y: a.y + w * (b.y - a.y),
    p: a.p + w * (b.p - a.p),
    tiltX: a.tiltX !== undefined && b.tiltX !== undefined ? a.tiltX + w * (b.tiltX - a.tiltX) : a.tiltX ?? b.tiltX,
    tiltY: a.tiltY !== undefined && b.tiltY !== undefined ? a.tiltY + w * (b.tiltY - a.tiltY) : a.tiltY ?? b.tiltY,
    penDown: true,
  };
}

/** Azimuth angle from pen tilt, in tablet units [0, 3600]. */
export function azimuthFromTilt(tiltX: number, tiltY: number): number {
  const radians = Math.atan2(tiltY, tiltX);
  const degrees = (radians * 180) / Math.PI;
  return Math.round(((degrees + 360) % 360) * 10);
}

/** Altitude angle from pen tilt: flat pen (90 degree tilt) maps to 300. */
export function altitudeFromTilt(tiltX: number, tiltY: number): number {
  const steepest = Math.min(90, Math.max(Math.abs(tiltX), Math.abs(tiltY)));
  return Math.round(900 - (steepest / 90) * 600);
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/**
 * Resample a capture onto the uniform grid and encode in tablet units.
 * Throws TooShortCaptureError for captures under 30 ms or 3 events.
 */
export function resampleAndEncode(
  capture: Capture,
  userId: string,
  targetRateHz: number = TARGET_RATE_HZ,
): SignatureDocument {
  const events: PointerSample[] = capture.strokes.flatMap((s) => s.events);
  if (events.length < MIN_EVENTS) {
    throw new TooShortCaptureError(`need at least ${MIN_EVENTS} pointer events`);
  }
  const timeline = buildTimeline(capture.strokes);
  const t0 = timeline[0].t;
  const t1 = timeline[timeline.length - 1].t;
  const durationMs = t1 - t0;
  if (durationMs < MIN_CAPTURE_MS) {
    throw new TooShortCaptureError(`capture lasted ${durationMs} ms, need ${MIN_CAPTURE_MS}`);
  }
  const stepMs = 1000 / targetRateHz;
  const count = Math.max(MIN_EVENTS, Math.round(durationMs / stepMs));
  const grid: TimelinePoint[] = [];
  for (let i = 0; i < count; i++) {
    grid.push(interpolateAt(timeline, t0 + i * stepMs));
  }

  // Pressure handling: devices without a real pressure channel report one
  // constant contact value; encode those as a binary {0, 512} signal.
  const contactPressures = new Set(
    events.map((e) => e.pressure).filter((p) => p > 0),
  );
  const binaryPressure = contactPressures.size <= 1;

  const xs = grid.map((g) => g.x);
  const ys = grid.map((g) => g.y);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const width = maxX - minX;
  const height = maxY - minY;
  const extent = Math.max(width, height);
  const scale =
    extent > 0
      ? Math.min(TABLET_RANGES.x[1] / Math.max(width, 1e-9), TABLET_RANGES.y[1] / Math.max(height, 1e-9))
      : 1;

  const doc: SignatureDocument = {
    user_id: userId,
    sample_rate_hz: targetRateHz,
    kind: "genuine",
    x: [],
    y: [],
    p: [],
    gamma: [],
    phi: [],
  };
  for (const g of grid) {
    doc.x.push(clamp(Math.round((g.x - minX) * scale), TABLET_RANGES.x[0], TABLET_RANGES.x[1]));
    // Browser y grows downward; flip so the signature is upright in tablet units.
    doc.y.push(clamp(Math.round((maxY - g.y) * scale), TABLET_RANGES.y[0], TABLET_RANGES.y[1]));
    const pressure = binaryPressure ? (g.p > 0 ? 0.5 : 0) : g.p;
    doc.p.push(clamp(Math.round(pressure * TABLET_RANGES.p[1]), TABLET_RANGES.p[0], TABLET_RANGES.p[1]));
    if (g.tiltX !== undefined && g.tiltY !== undefined && (g.tiltX !== 0 || g.tiltY !== 0)) {
      doc.gamma.push(clamp(azimuthFromTilt(g.tiltX, g.tiltY), TABLET_RANGES.gamma[0], TABLET_RANGES.gamma[1]));
      doc.phi.push(clamp(altitudeFromTilt(g.tiltX, g.tiltY), TABLET_RANGES.phi[0], TABLET_RANGES.phi[1]));
    } else {
      doc.gamma.push(0);
      doc.phi.push(900);
    }
  }
  return doc;
}

/** Schema check mirroring the service's expectations; returns problems. */
export function validateInterchange(doc: SignatureDocument): string[] {
  const problems: string[] = [];
  const n = doc.x.length;
  for (const channel of ["x", "y", "p", "gamma", "phi"] as const) {
    const values = doc[channel];
    if (values.length !== n) {
      problems.push(`channel ${channel} has length ${values.length}, expected ${n}`);
      continue;
    }
    const [lo, hi] = TABLET_RANGES[channel];
    for (const v of values) {
      if (!Number.isInteger(v) || v < lo || v > hi) {
        problems.push(`channel ${channel} value ${v} outside [${lo}, ${hi}]`);
        break;
      }
    }
  }
  if (n < 3) problems.push(`only ${n} samples, need at least 3`);
  if (!doc.user_id) problems.push("missing user_id");
  if (doc.sample_rate_hz <= 0) problems.push("bad sample_rate_hz");
  return problems;
}
