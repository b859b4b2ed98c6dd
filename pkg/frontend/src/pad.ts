/**
 * Canvas signature pad: collects pointer trajectories with pressure and
 * tilt, draws a functional ink trail, and hands the raw strokes to the
 * encoder. At most one stroke is open at a time; pen-up gaps between
 * strokes stay part of the capture.
 */

import { Capture, CapturedStroke, PointerSample } from "./types.js";

export class SignaturePad {
  private strokes: CapturedStroke[] = [];
  private current: CapturedStroke | null = null;
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.ctx.lineWidth = 2;
    this.ctx.lineCap = "round";
    this.ctx.strokeStyle = "#1a237e";
    canvas.style.touchAction = "none";
    canvas.addEventListener("pointerdown", this.onDown);
    canvas.addEventListener("pointermove", this.onMove);
    canvas.addEventListener("pointerup", this.onUp);
    canvas.addEventListener("pointercancel", this.onUp);
  }

  private sample(event: PointerEvent): PointerSample {
    const rect = this.canvas.getBoundingClientRect();
    return {
      t_ms: event.timeStamp,
      x_px: event.clientX - rect.left,
      y_px: event.clientY - rect.top,
      pressure: event.pressure,
      tilt_x: event.tiltX,
      tilt_y: event.tiltY,
    };
  }

  private onDown = (event: PointerEvent) => {
    this.canvas.setPointerCapture(event.pointerId);
    this.current = { events: [this.sample(event)] };
  };

  private onMove = (event: PointerEvent) => {
    if (!this.current) return;
    const previous = this.current.events[this.current.events.length - 1];
    const point = this.sample(event);
    this.current.events.push(point);
    this.ctx.beginPath();
    this.ctx.moveTo(previous.x_px, previous.y_px);
    this.ctx.lineTo(point.x_px, point.y_px);
    this.ctx.stroke();
  };

  private onUp = (event: PointerEvent) => {
    if (!this.current) return;
    this.current.events.push(this.sample(event));
    if (this.current.events.length >= 2) {
      this.strokes.push(this.current);
    }
    this.current = null;
  };

  capture(): Capture {
    return {
      strokes: this.strokes,
      devicePixelRatio: window.devicePixelRatio || 1,
      width: this.canvas.width,
      height: this.canvas.height,
    };
  }

  get isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  clear(): void {
    this.strokes = [];
    this.current = null;
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
  }
}
