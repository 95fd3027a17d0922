/** Thin typed client for the label-service HTTP API.
 *
 * The UI consumes exactly four endpoints: /api/next, /api/label,
 * /api/skip, /api/stats.  The display token is opaque to the client; the
 * position-to-algorithm mapping never reaches the browser.
 */

export interface Task {
  graph_id: string;
  /** Eight base64-encoded PNGs in display order. */
  images: string[];
  display_token: string;
  progress: { labeled: number };
}

export interface LabelRequest {
  annotator: string;
  graph_id: string;
  /** 1-based slot position as shown in the grid. */
  position: number;
  duration_ms: number;
  hard: boolean;
  display_token: string;
}

export interface LabelReply {
  ok: boolean;
  message: string | null;
}

export interface SkipRequest {
  annotator: string;
  graph_id: string;
  display_token: string;
}

export interface Stats {
  total_labels: number;
  graphs_labeled: number;
  mean_labels_per_graph: number;
  per_annotator: Record<string, number>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  /** Next task for the annotator, or null when the corpus is exhausted. */
  async next(annotator: string): Promise<Task | null> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/next?annotator=${encodeURIComponent(annotator)}`,
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw new ApiError(resp.status, `next failed: ${resp.status}`);
    return (await resp.json()) as Task;
  }

  async label(req: LabelRequest): Promise<LabelReply> {
    return (await this.post("/api/label", req)) as LabelReply;
  }

  async skip(req: SkipRequest): Promise<void> {
    await this.post("/api/skip", req);
  }

  async stats(): Promise<Stats> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/stats`);
    if (!resp.ok) throw new ApiError(resp.status, `stats failed: ${resp.status}`);
    return (await resp.json()) as Stats;
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new ApiError(resp.status, `${path} failed: ${resp.status}`);
    return resp.json();
  }
}
