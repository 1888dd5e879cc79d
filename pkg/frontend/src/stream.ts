import type { EventRecord } from "./types.js";

export type StreamStatus = "connecting" | "open" | "retrying" | "stopped";

export interface StreamOptions {
  since?: number;
  follow?: boolean;
  retryDelayMs?: number;
  token?: string;
  fetchFn?: (url: string, init?: RequestInit) => Promise<any>;
  onEvent: (rec: EventRecord) => void;
  onStatus?: (status: StreamStatus) => void;
}

/**
 * Reads the server's NDJSON event feed. Lines can arrive split across
 * chunks, so bytes are buffered until a newline. On any disconnect the
 * reader re-requests with since=<last seq it saw>, and anything at or
 * below that cursor is dropped — reconnects can never duplicate a row.
 */
export class EventStream {
  cursor: number;
  private stopped = false;
  private abort: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private projectId: string,
    private opts: StreamOptions,
  ) {
    this.cursor = opts.since ?? 0;
  }

  private feedUrl(): string {
    const base = this.baseUrl.replace(/\/$/, "");
    const follow = this.opts.follow !== false;
    return `${base}/projects/${this.projectId}/events?since=${this.cursor}&follow=${follow}`;
  }

  private status(s: StreamStatus) {
    this.opts.onStatus?.(s);
  }

  /** Runs until stop() (or, with follow=false, until the feed ends). */
  async start(): Promise<void> {
    const fetchFn = this.opts.fetchFn ?? ((u: string, i?: RequestInit) => fetch(u, i));
    const retryDelay = this.opts.retryDelayMs ?? 1000;
    const headers: Record<string, string> = {};
    if (this.opts.token) headers["Authorization"] = `Bearer ${this.opts.token}`;

    while (!this.stopped) {
      this.status("connecting");
      this.abort = new AbortController();
      try {
        const resp = await fetchFn(this.feedUrl(), {
          headers,
          signal: this.abort.signal,
        });
        if (!resp.ok) throw new Error(`feed returned ${resp.status}`);
        this.status("open");
        await this.drain(resp.body.getReader());
      } catch (err) {
        if (this.stopped) break;
      }
      if (this.opts.follow === false) break;
      if (this.stopped) break;
      this.status("retrying");
      await new Promise((r) => setTimeout(r, retryDelay));
    }
    this.status("stopped");
  }

  private async drain(reader: { read(): Promise<{ done: boolean; value?: Uint8Array }> }) {
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let nl: number;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        if (!line) continue;
        this.emit(line);
      }
    }
    // a journal line is only written newline-terminated; anything left in
    // the buffer is a torn read and the reconnect will refetch it
  }

  private emit(line: string) {
    let rec: EventRecord;
    try {
      rec = JSON.parse(line);
    } catch {
      return;
    }
    if (typeof rec.seq !== "number" || rec.seq <= this.cursor) return;
    this.cursor = rec.seq;
    this.opts.onEvent(rec);
  }

  stop() {
    this.stopped = true;
    this.abort?.abort();
  }
}
