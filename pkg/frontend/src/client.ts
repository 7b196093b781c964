import type {
  ClipInfo,
  ProjectionResponse,
  QuerySpecInfo,
  SeparateRequest,
  SeparateResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/** Thin typed wrapper over the separation service HTTP API. */
export class StudioClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) throw new Error(`GET ${path} failed: ${resp.status}`);
    return (await resp.json()) as T;
  }

  async listClips(): Promise<ClipInfo[]> {
    const body = await this.get<{ clips: ClipInfo[] }>("/clips");
    return body.clips;
  }

  projection(clipId: string): Promise<ProjectionResponse> {
    return this.get(`/clips/${clipId}/projection`);
  }

  async queries(clipId: string): Promise<QuerySpecInfo[]> {
    const body = await this.get<{ queries: QuerySpecInfo[] }>(
      `/clips/${clipId}/queries`,
    );
    return body.queries;
  }

  async separate(req: SeparateRequest): Promise<SeparateResponse> {
    const resp = await this.fetchImpl(this.baseUrl + "/separate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw new Error(`POST /separate failed: ${resp.status}`);
    return (await resp.json()) as SeparateResponse;
  }

  audioUrl(path: string): string {
    return this.baseUrl + path;
  }
}
