import type { EventRecord } from "../src/types.js";
import type { StreamOptions } from "../src/stream.js";
import type { StreamHandle } from "../src/app.js";

export function rec(
  seq: number,
  kind = "StageEntered",
  payload: Record<string, any> = {},
  extra: Partial<EventRecord> = {},
): EventRecord {
  return {
    seq,
    ts: `2026-08-14T08:00:${String(seq % 60).padStart(2, "0")}.000000Z`,
    project: "p-test",
    stage: "Coding",
    kind,
    payload,
    artifact_refs: [],
    ...extra,
  };
}

export function marker(seq: number, target: number): EventRecord {
  return rec(seq, "RollbackMarker", { target_seq: target }, { stage: null });
}

/** app-injectable stream the test drives by hand */
export class FakeStream implements StreamHandle {
  started = false;
  stopped = false;
  constructor(
    public projectId: string,
    public opts: StreamOptions,
  ) {}
  async start(): Promise<void> {
    this.started = true;
  }
  stop(): void {
    this.stopped = true;
  }
  push(r: EventRecord): void {
    this.opts.onEvent(r);
  }
}

export interface SeenRequest {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: any;
}

/** fetch double that records every request and answers from a route table */
export function fakeFetch(routes: Record<string, (req: SeenRequest) => any>) {
  const seen: SeenRequest[] = [];
  const fn = async (url: string, init?: RequestInit) => {
    const req: SeenRequest = {
      url,
      method: init?.method ?? "GET",
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body ? JSON.parse(init.body as string) : null,
    };
    seen.push(req);
    const path = url.replace(/^https?:\/\/[^/]+/, "").split("?")[0];
    const route = routes[`${req.method} ${path}`] ?? routes[path];
    if (!route) {
      return { ok: false, status: 404, statusText: "not found", json: async () => ({ detail: `no route ${path}` }) };
    }
    const out = route(req);
    if (out && out.__raw) return out.__raw;
    // {__kind, __body} simulates the artifact byte endpoint; anything else is JSON
    const kind = out?.__kind ?? null;
    const body = out?.__kind !== undefined ? out.__body : out;
    return {
      ok: true,
      status: 200,
      json: async () => body,
      text: async () => (typeof body === "string" ? body : JSON.stringify(body)),
      arrayBuffer: async () =>
        new TextEncoder().encode(typeof body === "string" ? body : JSON.stringify(body)).buffer,
      headers: { get: (k: string) => (k.toLowerCase() === "x-artifact-kind" ? kind : null) },
    };
  };
  return { fn, seen };
}

/** body for the stream reader: NDJSON chunks delivered on demand */
export function chunkedBody(chunks: (string | Uint8Array)[]) {
  let i = 0;
  return {
    getReader() {
      return {
        async read(): Promise<{ done: boolean; value?: Uint8Array }> {
          if (i >= chunks.length) return { done: true };
          const c = chunks[i++];
          return {
            done: false,
            value: typeof c === "string" ? new TextEncoder().encode(c) : c,
          };
        },
      };
    },
  };
}
