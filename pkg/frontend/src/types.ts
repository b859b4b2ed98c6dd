/** One pointer event inside a stroke, in canvas pixel coordinates. */
export interface PointerSample {
  t_ms: number;
  x_px: number;
  y_px: number;
  /** Contact pressure in [0, 1]; 0 means pen up. */
  pressure: number;
  tilt_x?: number;
  tilt_y?: number;
}

/** A contiguous pen-down trace. */
export interface CapturedStroke {
  events: PointerSample[];
}

/** Everything the pad hands to the encoder. */
export interface Capture {
  strokes: CapturedStroke[];
  devicePixelRatio: number;
  width: number;
  height: number;
}

/** The interchange signature document the service consumes. */
export interface SignatureDocument {
  user_id: string;
  sample_rate_hz: number;
  kind: "genuine" | "skilled_forgery";
  x: number[];
  y: number[];
  p: number[];
  gamma: number[];
  phi: number[];
}

export const TABLET_RANGES = {
  x: [0, 12700],
  y: [0, 9700],
  p: [0, 1024],
  gamma: [0, 3600],
  phi: [300, 900],
} as const;
