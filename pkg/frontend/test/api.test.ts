import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";
import { fakeFetch } from "./helpers.js";

const BASE = "http://engine:8700";

function client(routes: Parameters<typeof fakeFetch>[0], token?: string) {
  const { fn, seen } = fakeFetch(routes);
  return { api: new ApiClient({ baseUrl: BASE, token }, fn), seen };
}

describe("requests", () => {
  it("lists projects with a GET", async () => {
    const { api, seen } = client({
      "GET /projects": () => ({ projects: [{ project_id: "p-1", mode: "Explore", stage: "Idea", completed: false, paused: false, risk_flags: 0 }] }),
    });
    const projects = await api.listProjects();
    expect(projects[0].project_id).toBe("p-1");
    expect(seen[0].method).toBe("GET");
    expect(seen[0].url).toBe(`${BASE}/projects`);
  });

  it("attaches the bearer token when configured", async () => {
    const { api, seen } = client({ "GET /projects": () => ({ projects: [] }) }, "tok");
    await api.listProjects();
    expect(seen[0].headers.Authorization).toBe("Bearer tok");
  });

  it("sends no auth header without a token", async () => {
    const { api, seen } = client({ "GET /projects": () => ({ projects: [] }) });
    await api.listProjects();
    expect(seen[0].headers.Authorization).toBeUndefined();
  });

  it("surfaces engine errors with status and detail", async () => {
    const { api } = client({
      "POST /projects": () => ({
        __raw: { ok: false, status: 429, statusText: "too many", json: async () => ({ error: "BudgetExhausted", detail: "daily budget spent" }) },
      }),
    });
    const err = await api.createProject("x", "Explore").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(429);
    expect(err.detail).toBe("daily budget spent");
  });
});

describe("mutation audit", () => {
  it("a rollback click maps to exactly one POST command", async () => {
    const { api, seen } = client({
      "POST /projects/p-1/commands": (req) => req.body,
    });
    await api.rollback("p-1", 7);
    const posts = seen.filter((r) => r.method === "POST");
    expect(posts.length).toBe(1);
    expect(posts[0].body).toEqual({ action: "rollback", target_seq: 7 });
  });

  it("only ever mutates through the documented POST surfaces", async () => {
    const { api, seen } = client({
      "GET /projects": () => ({ projects: [] }),
      "GET /projects/p-1/state": () => ({ head_seq: 0, state: {} }),
      "GET /artifacts/abc/meta": () => ({ kind: "manuscript", parents: [], lineage: [] }),
      "POST /projects": () => ({ project_id: "p-9" }),
      "POST /projects/p-1/commands": (req) => req.body,
      "POST /eval": () => ({ baseline: "A", candidate: "B", gains: {}, radar: [] }),
    });
    await api.listProjects();
    await api.state("p-1");
    await api.artifactMeta("abc");
    await api.createProject("idea", "Discussion", false);
    await api.pause("p-1");
    await api.resume("p-1");
    await api.intervene("p-1", "Coding", "try a smaller model");
    await api.evaluate([], "A", "B");

    const mutating = seen.filter((r) => r.method !== "GET");
    for (const req of mutating) {
      expect(req.method).toBe("POST");
      expect(
        /\/projects$|\/projects\/[^/]+\/commands$|\/eval$/.test(req.url),
      ).toBe(true);
    }
    // and reads never smuggle a body
    for (const req of seen.filter((r) => r.method === "GET")) {
      expect(req.body).toBeNull();
    }
  });

  it("every command rides the commands endpoint with its action named", async () => {
    const { api, seen } = client({ "POST /projects/p-7/commands": (req) => req.body });
    await api.run("p-7");
    await api.pause("p-7");
    await api.resume("p-7");
    await api.intervene("p-7", "Experiment", "rerun with seed 2");
    expect(seen.map((r) => r.body.action)).toEqual(["run", "pause", "resume", "inject"]);
    expect(seen[3].body).toMatchObject({ stage: "Experiment", instruction: "rerun with seed 2" });
  });
});

describe("artifacts", () => {
  it("returns bytes plus the kind header", async () => {
    const { api } = client({
      "GET /artifacts/ff00": () => ({ __kind: "manuscript", __body: "# results\n" }),
    });
    const { kind, bytes } = await api.artifactBytes("ff00");
    expect(kind).toBe("manuscript");
    expect(new TextDecoder().decode(bytes)).toBe("# results\n");
  });

  it("meta comes back with lineage attached", async () => {
    const { api } = client({
      "GET /artifacts/ff00/meta": () => ({
        kind: "manuscript",
        size: 10,
        parents: ["a".repeat(64)],
        lineage: ["a".repeat(64), "b".repeat(64)],
      }),
    });
    const meta = await api.artifactMeta("ff00");
    expect(meta.lineage.length).toBe(2);
    expect(meta.parents.length).toBe(1);
  });
});
