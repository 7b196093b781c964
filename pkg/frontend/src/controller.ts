import { StudioClient } from "./client.js";
import { Debouncer } from "./debounce.js";
import { SessionState } from "./session.js";
import type {
  EllipseState,
  ProjectionPoint,
  QuerySpecInfo,
  SeparateRequest,
  SeparateResponse,
} from "./types.js";

export interface ViewPoint extends ProjectionPoint {
  /** Mirrors the newest backend response; never computed client-side. */
  member: boolean;
}

export interface ProjectionView {
  points: ViewPoint[];
  ellipse: EllipseState;
  axesPair: [number, number];
  validationError: string | null;
  responseCount: number;
}

export function validateEllipse(e: EllipseState): string | null {
  for (const v of [e.cx, e.cy, e.rx, e.ry]) {
    if (!Number.isFinite(v)) return "ellipse parameters must be finite";
  }
  if (e.rx <= 0 || e.ry <= 0) return "radii must be positive";
  return null;
}

/**
 * Drives the query view: ellipse manipulation is debounced into separation
 * requests, at most one request is in flight, and responses that arrive out
 * of order are discarded so the display always reflects the request with the
 * highest sequence number.
 */
export class StudioController {
  readonly view: ProjectionView = {
    points: [],
    ellipse: { cx: 0, cy: 0, rx: 1, ry: 1 },
    axesPair: [0, 1],
    validationError: null,
    responseCount: 0,
  };

  private sequence = 0;
  private appliedSequence = 0;
  private inFlight = false;
  private pendingSend = false;
  private readonly debouncer: Debouncer;

  constructor(
    private readonly client: StudioClient,
    readonly session: SessionState,
    private readonly onUpdate: (view: ProjectionView) => void = () => {},
    debounceMs = 150,
  ) {
    this.debouncer = new Debouncer(debounceMs);
  }

  async loadClip(clipId: string) {
    this.session.selectClip(clipId);
    const [projection, queries] = await Promise.all([
      this.client.projection(clipId),
      this.client.queries(clipId),
    ]);
    this.view.points = projection.points.map((p) => ({ ...p, member: false }));
    if (queries.length > 0) this.selectQuery(queries[0]);
    this.onUpdate(this.view);
    return queries;
  }

  selectQuery(spec: QuerySpecInfo) {
    this.session.selectQuery(spec);
    const [i, j] = this.view.axesPair;
    this.view.ellipse = {
      cx: 0,
      cy: 0,
      rx: spec.inclusion_radii[i],
      ry: spec.inclusion_radii[j],
    };
    this.view.validationError = null;
    this.onUpdate(this.view);
  }

  /** Drag/scale handler: validates, then schedules a debounced request. */
  setEllipse(ellipse: EllipseState) {
    this.view.ellipse = ellipse;
    this.view.validationError = validateEllipse(ellipse);
    if (this.view.validationError !== null) {
      this.debouncer.cancel();
      this.onUpdate(this.view);
      return;
    }
    this.onUpdate(this.view);
    this.debouncer.schedule(() => this.requestSeparation());
  }

  /** Immediate (undebounced) request with the current state. */
  requestSeparation() {
    if (this.session.clipId === null || this.session.querySpec === null) return;
    if (this.view.validationError !== null) return;
    if (this.inFlight) {
      this.pendingSend = true;
      return;
    }
    const seq = ++this.sequence;
    this.inFlight = true;
    void this.client
      .separate(this.buildRequest())
      .then((resp) => this.ingestResponse(seq, resp))
      .catch(() => {})
      .then(() => {
        this.inFlight = false;
        if (this.pendingSend) {
          this.pendingSend = false;
          this.requestSeparation();
        }
      });
  }

  buildRequest(): SeparateRequest {
    const e = this.view.ellipse;
    return {
      clip_id: this.session.clipId!,
      query_index: this.session.querySpec!.query_index,
      axes_pair: this.view.axesPair,
      center: [e.cx, e.cy],
      radii: [e.rx, e.ry],
      t: this.session.t,
      mode: this.session.mode,
    };
  }

  /**
   * Single entry point for responses: anything whose sequence number is not
   * strictly newer than the last applied one is discarded, so the display
   * always reflects the highest acknowledged request.
   */
  ingestResponse(seq: number, resp: SeparateResponse) {
    if (seq <= this.appliedSequence) return;
    this.appliedSequence = seq;
    this.session.lastResponse = resp;
    const members = new Set(resp.member_indices);
    for (const p of this.view.points) p.member = members.has(p.stem_index);
    this.view.responseCount += 1;
    this.onUpdate(this.view);
  }
}
