import type { FetchLike } from "../src/client.js";
import type { QuerySpecInfo, SeparateRequest } from "../src/types.js";

/**
 * In-memory stand-in for the separation service used by the unit tests.
 *
 * It applies the same 2D-to-full-D lifting rule as the server — the pair's
 * radii replaced by the request, the remaining radii at the interpolation t,
 * the center offset along the selected axes — so membership assertions
 * exercise the real geometry, while the client code under test never
 * computes membership itself.
 */

export interface MockStem {
  stem_id: string;
  class_label: string;
  embedding: number[]; // full-D coordinates in the query's axis frame
}

export interface MockWorld {
  clipId: string;
  stems: MockStem[];
  query: QuerySpecInfo;
}

export function defaultWorld(): MockWorld {
  // Axes = identity, so embeddings are already in the principal frame.
  // Targets sit inside the unit inclusion ball; non-targets sit outside
  // the exclusion ball of radius 2.
  const dim = 4;
  const stems: MockStem[] = [
    { stem_id: "s0", class_label: "bass", embedding: [0.5, 0.0, 0.0, 0.0] },
    { stem_id: "s1", class_label: "keys", embedding: [-0.3, 0.2, 0.1, 0.0] },
    { stem_id: "s2", class_label: "drums", embedding: [3.0, 0.0, 0.0, 0.0] },
    { stem_id: "s3", class_label: "vocals", embedding: [0.0, 3.0, 0.5, 0.0] },
  ];
  const identity = Array.from({ length: dim }, (_, r) =>
    Array.from({ length: dim }, (_, c) => (r === c ? 1 : 0)),
  );
  return {
    clipId: "track_000:0",
    stems,
    query: {
      query_index: 0,
      dim,
      center: [0, 0, 0, 0],
      axes: identity,
      inclusion_radii: [1, 1, 1, 1],
      exclusion_radii: [2, 2, 2, 2],
      target_indices: [0, 1],
      non_target_indices: [2, 3],
      eliminated_indices: [],
    },
  };
}

function liftedMembers(world: MockWorld, req: SeparateRequest): number[] {
  const q = world.query;
  const [i, j] = req.axes_pair;
  const radii = q.inclusion_radii.map(
    (r, k) => r + req.t * (q.exclusion_radii[k] - r),
  );
  radii[i] = req.radii[0];
  radii[j] = req.radii[1];
  const center = q.center.map(
    (c, k) => c + q.axes[k][i] * req.center[0] + q.axes[k][j] * req.center[1],
  );
  const active = [...q.target_indices, ...q.non_target_indices].sort(
    (a, b) => a - b,
  );
  return active.filter((idx) => {
    const z = world.stems[idx].embedding;
    let d = 0;
    for (let a = 0; a < q.dim; a++) {
      let proj = 0;
      for (let k = 0; k < q.dim; k++) proj += q.axes[k][a] * (z[k] - center[k]);
      d += (proj / radii[a]) ** 2;
    }
    return d <= 1 + 1e-9;
  });
}

export interface MockOptions {
  /** Resolve order control: each /separate call awaits its gate. */
  separateGate?: (callIndex: number) => Promise<void>;
}

export class MockBackend {
  separateCalls: SeparateRequest[] = [];
  getCalls: string[] = [];

  constructor(
    readonly world: MockWorld = defaultWorld(),
    private readonly options: MockOptions = {},
  ) {}

  get fetch(): FetchLike {
    return (url, init) => this.dispatch(url, init);
  }

  private ok(body: unknown) {
    return { ok: true, status: 200, json: async () => body };
  }

  private async dispatch(
    url: string,
    init?: { method?: string; body?: string },
  ) {
    const w = this.world;
    if (init?.method === "POST" && url === "/separate") {
      const req = JSON.parse(init.body ?? "{}") as SeparateRequest;
      const callIndex = this.separateCalls.length;
      this.separateCalls.push(req);
      if (this.options.separateGate) await this.options.separateGate(callIndex);
      const members = liftedMembers(w, req);
      return this.ok({
        clip_id: req.clip_id,
        member_indices: members,
        member_stems: members.map((k) => w.stems[k].stem_id),
        snr_db: 60.0,
        scores: { members: {}, non_members: {} },
        audio_url: `/audio/est-${callIndex}`,
        mixture_audio_url: `/audio/mix-${req.clip_id}`,
      });
    }
    this.getCalls.push(url);
    if (url === "/clips") {
      return this.ok({
        clips: [{ clip_id: w.clipId, track: "track_000", split: "test" }],
      });
    }
    if (url === `/clips/${w.clipId}/projection`) {
      return this.ok({
        clip_id: w.clipId,
        points: w.stems.map((s, k) => ({
          stem_index: k,
          stem_id: s.stem_id,
          class_label: s.class_label,
          x: s.embedding[0],
          y: s.embedding[1],
        })),
      });
    }
    if (url === `/clips/${w.clipId}/queries`) {
      return this.ok({ queries: [w.query] });
    }
    return { ok: false, status: 404, json: async () => ({}) };
  }
}
