import { ApiClient } from "./api.js";
import { EventStream, type StreamOptions, type StreamStatus } from "./stream.js";
import { Timeline } from "./timeline.js";
import { renderRadar } from "./radar.js";
import { escapeHtml, fmtTime, payloadGist, shortId } from "./format.js";
import type { EventRecord, ProjectSummary } from "./types.js";

const MODES = ["Explore", "Discussion", "Reproduce"];
const STAGES = ["Idea", "Planning", "Coding", "Experiment", "Writing"];

export interface StreamHandle {
  start(): Promise<void>;
  stop(): void;
}

export interface AppDeps {
  api: ApiClient;
  streamFactory?: (projectId: string, opts: StreamOptions) => StreamHandle;
}

const SKELETON = `
<div class="layout">
  <aside class="sidebar">
    <h1>lab</h1>
    <div id="launcher">
      <input id="new-prompt" type="text" placeholder="research prompt"/>
      <select id="new-mode">${MODES.map((m) => `<option>${m}</option>`).join("")}</select>
      <button id="new-run">Launch</button>
    </div>
    <ul id="project-list"></ul>
    <div id="radar-pane">
      <h3>Compare</h3>
      <select id="radar-baseline"></select>
      <select id="radar-candidate"></select>
      <button id="btn-compare">Score</button>
      <div id="radar-out"></div>
    </div>
  </aside>
  <main class="main">
    <div id="project-header">
      <span id="project-title">select a project</span>
      <span id="controls">
        <button id="btn-run">Run</button>
        <button id="btn-pause">Pause</button>
        <button id="btn-resume">Resume</button>
      </span>
      <span id="status-line"></span>
    </div>
    <div id="timeline"></div>
    <div id="intervene">
      <select id="intervene-stage">${STAGES.map((s) => `<option>${s}</option>`).join("")}</select>
      <input id="intervene-text" type="text" placeholder="instruction for the team"/>
      <button id="intervene-send">Intervene</button>
    </div>
  </main>
  <aside id="inspector"><div class="placeholder">artifact inspector</div></aside>
</div>`;

export class DashboardApp {
  timeline = new Timeline();
  selected: string | null = null;
  private stream: StreamHandle | null = null;
  private inflightRollbacks = new Set<number>();
  private makeStream: (projectId: string, opts: StreamOptions) => StreamHandle;

  constructor(
    private root: HTMLElement,
    private deps: AppDeps,
  ) {
    this.makeStream =
      deps.streamFactory ??
      ((pid, opts) =>
        new EventStream(deps.api.config.baseUrl, pid, {
          ...opts,
          token: deps.api.config.token,
        }));
  }

  private $<T extends HTMLElement>(sel: string): T {
    const el = this.root.querySelector(sel);
    if (!el) throw new Error(`missing element ${sel}`);
    return el as T;
  }

  async init(): Promise<void> {
    this.root.innerHTML = SKELETON;
    this.$("#new-run").addEventListener("click", () => this.launch());
    this.$("#btn-run").addEventListener("click", () => this.command("run"));
    this.$("#btn-pause").addEventListener("click", () => this.command("pause"));
    this.$("#btn-resume").addEventListener("click", () => this.command("resume"));
    this.$("#intervene-send").addEventListener("click", () => this.intervene());
    this.$("#btn-compare").addEventListener("click", () => this.compare());
    this.$("#project-list").addEventListener("click", (e) => {
      const li = (e.target as HTMLElement).closest("[data-project]");
      if (li) this.selectProject(li.getAttribute("data-project")!);
    });
    // one delegated handler; a row click can never fan out into several posts
    this.$("#timeline").addEventListener("click", (e) => {
      const target = e.target as HTMLElement;
      const rb = target.closest(".rollback-btn");
      if (rb) {
        this.rollbackTo(Number(rb.getAttribute("data-seq")));
        return;
      }
      const chip = target.closest(".artifact-chip");
      if (chip) this.inspect(chip.getAttribute("data-id")!);
    });
    await this.refreshProjects();
  }

  async refreshProjects(): Promise<ProjectSummary[]> {
    const projects = await this.deps.api.listProjects();
    this.$("#project-list").innerHTML = projects
      .map(
        (p) => `
      <li data-project="${escapeHtml(p.project_id)}" class="${p.project_id === this.selected ? "active" : ""}">
        <span class="pid">${escapeHtml(p.project_id)}</span>
        <span class="badge mode">${escapeHtml(p.mode)}</span>
        <span class="badge stage">${escapeHtml(p.stage ?? "-")}</span>
        ${p.completed ? '<span class="badge done">done</span>' : ""}
        ${p.paused ? '<span class="badge paused">paused</span>' : ""}
        ${p.risk_flags ? `<span class="badge risk">${p.risk_flags} risk</span>` : ""}
      </li>`,
      )
      .join("");
    const options = projects
      .map((p) => `<option>${escapeHtml(p.project_id)}</option>`)
      .join("");
    this.$("#radar-baseline").innerHTML = options;
    this.$("#radar-candidate").innerHTML = options;
    return projects;
  }

  selectProject(projectId: string): void {
    this.stream?.stop();
    this.selected = projectId;
    this.timeline.clear();
    this.inflightRollbacks.clear();
    this.$("#project-title").textContent = projectId;
    this.renderTimeline();
    this.stream = this.makeStream(projectId, {
      since: 0,
      follow: true,
      onEvent: (rec) => this.onEvent(rec),
      onStatus: (s) => this.onStatus(s),
    });
    void this.stream.start();
  }

  onEvent(rec: EventRecord): void {
    if (this.timeline.apply(rec)) this.renderTimeline();
  }

  private onStatus(s: StreamStatus): void {
    this.$("#status-line").textContent = `${s} · seq ${this.timeline.headSeq()}`;
  }

  renderTimeline(): void {
    const rows = this.timeline.all();
    this.$("#timeline").innerHTML = rows
      .map(({ record: r, masked, isMarker }) => {
        const cls = ["ev-row", isMarker ? "marker" : "", masked && !isMarker ? "masked" : ""]
          .filter(Boolean)
          .join(" ");
        const chips = r.artifact_refs
          .map(
            (a) =>
              `<button class="artifact-chip" data-id="${a}">${shortId(a)}</button>`,
          )
          .join("");
        const rollback =
          !masked && !isMarker
            ? `<button class="rollback-btn" data-seq="${r.seq}" title="rewind here">&#8617;</button>`
            : "";
        return `
      <div class="${cls}" data-seq="${r.seq}">
        <span class="seq">${r.seq}</span>
        <span class="time">${fmtTime(r.ts)}</span>
        <span class="stage">${escapeHtml(r.stage ?? "")}</span>
        <span class="kind">${escapeHtml(r.kind)}</span>
        <span class="gist">${escapeHtml(payloadGist(r.kind, r.payload))}</span>
        ${chips}${rollback}
      </div>`;
      })
      .join("");
  }

  async rollbackTo(seq: number): Promise<void> {
    const pid = this.selected;
    if (!pid || this.inflightRollbacks.has(seq)) return;
    this.inflightRollbacks.add(seq);
    try {
      await this.deps.api.rollback(pid, seq);
    } finally {
      this.inflightRollbacks.delete(seq);
    }
    // the marker arrives on the stream and remasks the timeline; nothing
    // to do locally — the server replay is the only truth
  }

  private async command(action: "run" | "pause" | "resume"): Promise<void> {
    if (!this.selected) return;
    await this.deps.api.command(this.selected, { action });
  }

  private async launch(): Promise<void> {
    const prompt = this.$<HTMLInputElement>("#new-prompt").value.trim();
    const mode = this.$<HTMLSelectElement>("#new-mode").value;
    if (!prompt) return;
    const pid = await this.deps.api.createProject(prompt, mode, true);
    await this.refreshProjects();
    this.selectProject(pid);
  }

  private async intervene(): Promise<void> {
    if (!this.selected) return;
    const stage = this.$<HTMLSelectElement>("#intervene-stage").value;
    const text = this.$<HTMLInputElement>("#intervene-text").value.trim();
    if (!text) return;
    await this.deps.api.intervene(this.selected, stage, text);
    this.$<HTMLInputElement>("#intervene-text").value = "";
  }

  async inspect(artifactId: string): Promise<void> {
    const api = this.deps.api;
    const meta = await api.artifactMeta(artifactId);
    const { kind, bytes } = await api.artifactBytes(artifactId);
    let body = "";
    if (kind === "figure") {
      body = `<div class="figure-slot" data-id="${artifactId}"></div>`;
    } else {
      const text = new TextDecoder().decode(bytes);
      body = `<pre class="artifact-text">${escapeHtml(text.slice(0, 20000))}</pre>`;
    }
    this.$("#inspector").innerHTML = `
      <h3>${shortId(artifactId, 16)}</h3>
      <table class="meta">
        <tr><td>kind</td><td>${escapeHtml(String(meta.kind))}</td></tr>
        <tr><td>size</td><td>${meta.size ?? bytes.byteLength}</td></tr>
        <tr><td>parents</td><td>${meta.parents.map((p) => shortId(p)).join(", ") || "-"}</td></tr>
        <tr><td>lineage</td><td>${meta.lineage.length} ancestors</td></tr>
      </table>
      ${body}`;
    if (kind === "figure" && typeof URL.createObjectURL === "function") {
      const img = document.createElement("img");
      img.src = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
      this.$(".figure-slot").appendChild(img);
    }
  }

  private async compare(): Promise<void> {
    const api = this.deps.api;
    const a = this.$<HTMLSelectElement>("#radar-baseline").value;
    const b = this.$<HTMLSelectElement>("#radar-candidate").value;
    const out = this.$("#radar-out");
    if (!a || !b || a === b) {
      out.innerHTML = `<span class="error">pick two different projects</span>`;
      return;
    }
    const texts: string[] = [];
    for (const pid of [a, b]) {
      const st = await api.state(pid);
      const ref = st.state.manuscript_ref;
      if (!ref) {
        out.innerHTML = `<span class="error">${escapeHtml(pid)} has no manuscript yet</span>`;
        return;
      }
      texts.push(new TextDecoder().decode((await api.artifactBytes(ref)).bytes));
    }
    const result = await api.evaluate(
      [{ paper_id: `${a} vs ${b}`, systems: { A: [texts[0]], B: [texts[1]] } }],
      "A",
      "B",
    );
    const gains = Object.entries(result.gains)
      .map(([p, g]) => `<li>${escapeHtml(p)}: ${g >= 0 ? "+" : ""}${g}</li>`)
      .join("");
    out.innerHTML =
      `<ul class="gains">${gains}</ul>` +
      result.radar.map((exp) => renderRadar(exp, { size: 300 })).join("");
  }

  dispose(): void {
    this.stream?.stop();
  }
}

export function mountApp(root: HTMLElement, deps: AppDeps): DashboardApp {
  const app = new DashboardApp(root, deps);
  void app.init();
  return app;
}

export function configFromLocation(loc: Location): { baseUrl: string; token?: string } {
  const params = new URLSearchParams(loc.search);
  return {
    baseUrl: params.get("api") ?? "",
    token: params.get("token") ?? undefined,
  };
}
