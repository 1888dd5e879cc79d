import type {
  ArtifactMeta,
  Command,
  EvalResponse,
  ProjectSummary,
  StateResponse,
} from "./types.js";

export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<any>;

/**
 * Thin client over the control plane. Every read is a GET and the only
 * mutations are POSTs to /projects, /projects/{id}/commands and /eval —
 * the dashboard owns no state the server can't reproduce.
 */
export class ApiClient {
  private fetchFn: FetchLike;

  constructor(
    public config: ApiConfig,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  headers(json = false): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.config.token) h["Authorization"] = `Bearer ${this.config.token}`;
    return h;
  }

  url(path: string): string {
    return this.config.baseUrl.replace(/\/$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<any> {
    const resp = await this.fetchFn(this.url(path), init);
    if (!resp.ok) {
      let detail = resp.statusText ?? "";
      try {
        const body = await resp.json();
        detail = body.detail ?? body.error ?? JSON.stringify(body);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  private async getJson(path: string): Promise<any> {
    const resp = await this.request(path, { headers: this.headers() });
    return resp.json();
  }

  private async postJson(path: string, body: unknown): Promise<any> {
    const resp = await this.request(path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    return resp.json();
  }

  async listProjects(): Promise<ProjectSummary[]> {
    const doc = await this.getJson("/projects");
    return doc.projects;
  }

  async createProject(prompt: string, mode: string, run = true): Promise<string> {
    const doc = await this.postJson("/projects", { prompt, mode, run });
    return doc.project_id;
  }

  async state(projectId: string): Promise<StateResponse> {
    return this.getJson(`/projects/${projectId}/state`);
  }

  async command(projectId: string, cmd: Command): Promise<any> {
    return this.postJson(`/projects/${projectId}/commands`, cmd);
  }

  rollback(projectId: string, targetSeq: number): Promise<any> {
    return this.command(projectId, { action: "rollback", target_seq: targetSeq });
  }

  run(projectId: string): Promise<any> {
    return this.command(projectId, { action: "run" });
  }

  pause(projectId: string): Promise<any> {
    return this.command(projectId, { action: "pause" });
  }

  resume(projectId: string): Promise<any> {
    return this.command(projectId, { action: "resume" });
  }

  intervene(projectId: string, stage: string, instruction: string): Promise<any> {
    return this.command(projectId, { action: "inject", stage, instruction });
  }

  async artifactMeta(artifactId: string): Promise<ArtifactMeta> {
    return this.getJson(`/artifacts/${artifactId}/meta`);
  }

  async artifactBytes(artifactId: string): Promise<{ kind: string; bytes: ArrayBuffer }> {
    const resp = await this.request(`/artifacts/${artifactId}`, {
      headers: this.headers(),
    });
    const kind = resp.headers?.get?.("x-artifact-kind") ?? "unknown";
    return { kind, bytes: await resp.arrayBuffer() };
  }

  async evaluate(
    papers: unknown[],
    baseline: string,
    candidate: string,
  ): Promise<EvalResponse> {
    return this.postJson("/eval", { papers, baseline, candidate });
  }
}
