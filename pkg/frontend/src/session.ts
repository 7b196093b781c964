import type { QuerySpecInfo, SeparateResponse } from "./types.js";

export const ALPHA_MIN = 1e-3;
export const ALPHA_MAX = 1.0;

/**
 * Mutable per-session selection and playback-relevant results.
 *
 * The interpolation parameter t stays in [0, 1] and the single-source
 * broadness alpha stays in [1e-3, 1]; setters clamp rather than throw so
 * slider handlers can pass raw values.
 */
export class SessionState {
  clipId: string | null = null;
  querySpec: QuerySpecInfo | null = null;
  mode: "oracle" | "model" = "oracle";
  lastResponse: SeparateResponse | null = null;

  private _t = 0.5;
  private _alpha = 1.0;

  get t(): number {
    return this._t;
  }

  set t(value: number) {
    if (!Number.isFinite(value)) throw new Error("t must be finite");
    this._t = Math.min(1.0, Math.max(0.0, value));
  }

  get alpha(): number {
    return this._alpha;
  }

  set alpha(value: number) {
    if (!Number.isFinite(value)) throw new Error("alpha must be finite");
    this._alpha = Math.min(ALPHA_MAX, Math.max(ALPHA_MIN, value));
  }

  selectClip(clipId: string) {
    this.clipId = clipId;
    this.querySpec = null;
    this.lastResponse = null;
  }

  selectQuery(spec: QuerySpecInfo) {
    this.querySpec = spec;
    this.lastResponse = null;
  }
}
