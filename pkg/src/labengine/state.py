"""Materialized per-project state and the event fold that builds it.

State is a pure function of the (mask-filtered) event sequence: applying the
same records in the same order always yields the same digest. Anything
nondeterministic (wall-clock timestamps, event seq numbers) stays out of the
canonical document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from .model import EventKind, Stage


def canonical_json(doc: Any) -> str:
    """Deterministic serialization: sorted keys, no whitespace."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_doc(doc: Any) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


@dataclass
class WorkflowState:
    project_id: str
    mode: str = ""
    prompt: str = ""
    current_stage: str | None = None
    plan: dict | None = None
    stage_iterations: dict[str, int] = field(default_factory=dict)
    budgets_snapshot: dict = field(default_factory=dict)
    pending_feedback: list[dict] = field(default_factory=list)
    stage_verdicts: dict[str, dict] = field(default_factory=dict)
    roster: list[dict] = field(default_factory=list)
    consensus: dict | None = None
    completed_steps: list[str] = field(default_factory=list)
    metrics_finalized: dict[str, float] = field(default_factory=dict)
    manuscript_ref: str | None = None
    journal_refs: list[str] = field(default_factory=list)
    figure_refs: list[str] = field(default_factory=list)
    interventions: list[dict] = field(default_factory=list)
    audit_findings: int = 0
    risk_flags: int = 0
    paused: bool = False
    completed: bool = False

    def to_doc(self) -> dict:
        return {
            "project_id": self.project_id,
            "mode": self.mode,
            "prompt": self.prompt,
            "current_stage": self.current_stage,
            "plan": self.plan,
            "stage_iterations": dict(self.stage_iterations),
            "budgets_snapshot": dict(self.budgets_snapshot),
            "pending_feedback": list(self.pending_feedback),
            "stage_verdicts": dict(self.stage_verdicts),
            "roster": list(self.roster),
            "consensus": self.consensus,
            "completed_steps": list(self.completed_steps),
            "metrics_finalized": dict(self.metrics_finalized),
            "manuscript_ref": self.manuscript_ref,
            "journal_refs": list(self.journal_refs),
            "figure_refs": list(self.figure_refs),
            "interventions": list(self.interventions),
            "audit_findings": self.audit_findings,
            "risk_flags": self.risk_flags,
            "paused": self.paused,
            "completed": self.completed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "WorkflowState":
        return cls(**doc)

    def digest(self) -> str:
        return digest_doc(self.to_doc())

    def iterations(self, stage: Stage | str) -> int:
        return self.stage_iterations.get(str(Stage(stage).value), 0)


def apply_event(state: WorkflowState, kind: str, stage: str | None,
                payload: dict, artifact_refs: list[str]) -> None:
    """Fold one event into the state. Unknown kinds are ignored on purpose:
    the log may carry informational kinds the state does not track."""
    if kind == EventKind.PROJECT_CREATED:
        state.mode = payload.get("mode", "")
        state.prompt = payload.get("prompt", "")
        state.budgets_snapshot = dict(payload.get("budgets", {}))

    elif kind == EventKind.STAGE_ENTERED:
        reason = payload.get("reason", "advance")
        state.current_stage = stage
        if reason == "feedback":
            state.stage_iterations[stage] = state.stage_iterations.get(stage, 0) + 1
            sig = payload.get("signal")
            if sig in state.pending_feedback:
                state.pending_feedback.remove(sig)
            # re-entry invalidates the stage's previous verdict
            state.stage_verdicts.pop(stage, None)
        elif reason == "rollback":
            # re-entry after a rollback marker: the masked state already has
            # this stage, so only the stage field is touched
            pass

    elif kind == EventKind.TEAM_INSTANTIATED:
        state.roster = list(payload.get("roles", []))

    elif kind == EventKind.CONSENSUS_REACHED:
        state.consensus = dict(payload)

    elif kind == EventKind.PLAN_VALIDATED:
        state.plan = payload.get("plan")

    elif kind == EventKind.VALIDATION_SCORED:
        it = int(payload.get("iteration", 1))
        state.stage_iterations[stage] = max(state.stage_iterations.get(stage, 0), it)
        state.stage_verdicts[stage] = {
            "score": payload.get("score"),
            "passed": bool(payload.get("passed")),
            "iteration": it,
            "forced": False,
        }

    elif kind == EventKind.RISK_FLAG:
        state.risk_flags += 1
        if payload.get("forces_advance") and stage in state.stage_verdicts:
            state.stage_verdicts[stage]["forced"] = True

    elif kind == EventKind.FEEDBACK_ROUTED:
        sig = {
            "origin": payload.get("origin"),
            "target": payload.get("target"),
            "reason": payload.get("reason"),
            "note": payload.get("note", ""),
        }
        # LIFO with dedup by (origin, target, reason): most recent signal wins
        key = (sig["origin"], sig["target"], sig["reason"])
        state.pending_feedback = [
            s for s in state.pending_feedback
            if (s["origin"], s["target"], s["reason"]) != key
        ]
        state.pending_feedback.insert(0, sig)

    elif kind == EventKind.TOOL_EXECUTED:
        step_id = payload.get("step_id")
        if step_id and step_id not in state.completed_steps:
            state.completed_steps.append(step_id)

    elif kind == EventKind.METRIC_FINALIZED:
        state.metrics_finalized[payload["name"]] = payload["value"]
        state.journal_refs.extend(r for r in artifact_refs if r not in state.journal_refs)

    elif kind == EventKind.FIGURE_RENDERED:
        state.figure_refs.extend(r for r in artifact_refs if r not in state.figure_refs)

    elif kind == EventKind.AUDIT_FINDING:
        state.audit_findings += 1

    elif kind == EventKind.DRAFT_ASSEMBLED:
        if artifact_refs:
            state.manuscript_ref = artifact_refs[0]

    elif kind == EventKind.INTERVENTION_APPLIED:
        state.interventions.append({
            "stage": payload.get("stage"),
            "instruction": payload.get("instruction", ""),
        })

    elif kind == EventKind.PROJECT_PAUSED:
        state.paused = bool(payload.get("paused", True))

    elif kind == EventKind.PROJECT_COMPLETED:
        state.completed = True
