/** Payload shapes of the separation service HTTP API. */

export interface ClipInfo {
  clip_id: string;
  track: string;
  split: string;
}

export interface ProjectionPoint {
  stem_index: number;
  stem_id: string;
  class_label: string;
  x: number;
  y: number;
}

export interface ProjectionResponse {
  clip_id: string;
  points: ProjectionPoint[];
}

export interface QuerySpecInfo {
  query_index: number;
  dim: number;
  center: number[];
  axes: number[][]; // columns are principal directions
  inclusion_radii: number[];
  exclusion_radii: number[];
  target_indices: number[];
  non_target_indices: number[];
  eliminated_indices: number[];
}

export interface SeparateRequest {
  clip_id: string;
  query_index: number;
  axes_pair: [number, number];
  center: [number, number]; // offset within the cross-section plane
  radii: [number, number];
  t: number;
  mode: "oracle" | "model";
}

export interface SeparateResponse {
  clip_id: string;
  member_stems: string[];
  member_indices: number[];
  snr_db: number;
  scores: {
    members: Record<string, number>;
    non_members: Record<string, number>;
  };
  audio_url: string;
  mixture_audio_url: string;
}

/** The ellipse cross-section as manipulated on screen. */
export interface EllipseState {
  cx: number;
  cy: number;
  rx: number;
  ry: number;
}
