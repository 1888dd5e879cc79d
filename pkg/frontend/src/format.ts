export function shortId(id: string | null | undefined, n = 10): string {
  return id ? id.slice(0, n) : "";
}

export function fmtTime(iso: string): string {
  const t = iso.indexOf("T");
  return t >= 0 ? iso.slice(t + 1, t + 9) : iso;
}

/** one-line gist of an event payload for the timeline row */
export function payloadGist(kind: string, payload: Record<string, any>): string {
  switch (kind) {
    case "ProjectCreated":
      return `${payload.mode}: ${payload.prompt}`;
    case "StageEntered":
      return `reason=${payload.reason}`;
    case "RollbackMarker":
      return `rewound to seq ${payload.target_seq}`;
    case "ValidationScored":
      return `score ${payload.score} (threshold ${payload.threshold})`;
    case "ModelInvoked":
      return `${payload.capability} via ${payload.backend}`;
    case "ToolExecuted":
      return `${payload.tool ?? ""} ${payload.step_id ?? ""}`.trim();
    case "MetricFinalized":
      return `${payload.name} = ${payload.value}`;
    case "ExperimentFinished":
      return `outcome=${payload.outcome}`;
    case "RiskFlag":
      return String(payload.reason ?? "");
    default: {
      const keys = Object.keys(payload ?? {});
      if (!keys.length) return "";
      const k = keys[0];
      const v = payload[k];
      const s = typeof v === "object" ? JSON.stringify(v) : String(v);
      return `${k}=${s.length > 60 ? s.slice(0, 57) + "..." : s}`;
    }
  }
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
