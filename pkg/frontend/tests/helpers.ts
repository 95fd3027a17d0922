import type { Task } from "../src/api.js";

export function makeTask(graphId: string, labeled = 0): Task {
  return {
    graph_id: graphId,
    images: Array.from({ length: 8 }, (_, i) => btoa(`png-${graphId}-${i}`)),
    display_token: `token-${graphId}`,
    progress: { labeled },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

export type Responder = (req: RecordedRequest) => {
  status: number;
  json?: unknown;
} | Promise<{ status: number; json?: unknown }>;

/** A fetch stub that records requests and answers via a responder. */
export function mockFetch(responder: Responder) {
  const requests: RecordedRequest[] = [];
  const fetchFn = (async (input: string, init?: RequestInit) => {
    const req: RecordedRequest = {
      url: String(input),
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    };
    requests.push(req);
    const out = await responder(req);
    return {
      ok: out.status >= 200 && out.status < 300,
      status: out.status,
      json: async () => out.json,
    } as Response;
  }) as typeof fetch;
  return { fetchFn, requests };
}

export class MemoryStorage implements Storage {
  private map = new Map<string, string>();
  get length(): number {
    return this.map.size;
  }
  clear(): void {
    this.map.clear();
  }
  getItem(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }
  key(index: number): string | null {
    return [...this.map.keys()][index] ?? null;
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
}
