"""Project engine.

Drives a research project through Idea, Planning, Coding, Experiment and
Writing, journaling every decision as events. The engine never keeps
authoritative state in memory: each stage pass re-materializes state from
the journal (checkpoint plus tail), which is what makes kill-and-resume a
non-event. Stage handlers are written to be re-entrant; re-executed work is
re-journaled, never silently replayed.

Every stage exit passes the validation gate from `workflow`; the coding
gate additionally folds the smoke test into the score (a draft that cannot
pass its own smoke run scores zero regardless of how plausible it reads).
"""

from __future__ import annotations

import hashlib
import time
import uuid
from pathlib import Path
from typing import Callable

from .artifacts import ArtifactStore
from .config import LabConfig
from .errors import (
    BudgetExhausted,
    Conflict,
    EmptyPrompt,
    IntegrityFailed,
    LabError,
    NoFinalizedMetrics,
)
from .evaluation import Aggregate, EvalHarness
from .events import ProjectLog, effective_records, list_projects
from .figures import render_metric_figure
from .gateway import DailyBudget, Gateway, fresh_session
from .harness import ToolKit, Workspace, run_experiment, smoke_test
from .harness.journal import parse_metric_text
from .harness.audit import nonfinite_findings, run_audit
from .harness.runner import RunOutcome
from .model import EventKind, FeedbackReason, Mode, Stage, next_stage
from .roster import default_team
from .state import WorkflowState, canonical_json
from .writing import assemble_manuscript, build_outline, verify_manuscript
from .workflow import (
    GatewayReviewer,
    ReviewerPort,
    plan_for_mode,
    pop_feedback,
    route_feedback,
    run_validation_loop,
)

ENGINE_LOG = "_lab"


class ProjectEngine:
    def __init__(self, home: str | Path, config: LabConfig | None = None,
                 reviewer: ReviewerPort | None = None,
                 backend_overrides: dict | None = None,
                 clock: Callable[[], float] = time.time):
        self.home = Path(home)
        self.config = config or LabConfig()
        self.projects_root = self.home / "projects"
        self.projects_root.mkdir(parents=True, exist_ok=True)
        self.store = ArtifactStore(self.home / "artifacts",
                                   event_probe=self._event_exists)
        self.budget = DailyBudget(self.config.daily_paper_budget,
                                  self.config.budget_timezone,
                                  clock=clock,
                                  state_path=self.home / "budget.json")
        self.gateway = Gateway.from_config(self.config,
                                           on_invoke=self._on_model_invoked,
                                           overrides=backend_overrides)
        self.reviewer: ReviewerPort = reviewer or GatewayReviewer(self.gateway)
        self._active_log: ProjectLog | None = None
        self._workspaces: dict[str, Workspace] = {}

    # -- plumbing -----------------------------------------------------------------

    def _event_exists(self, project: str, seq) -> bool:
        if not isinstance(seq, int) or seq < 1:
            return False
        log = ProjectLog(self.projects_root, project)
        if not log.exists():
            return False
        return seq <= len(log.read())

    def _on_model_invoked(self, info: dict) -> None:
        if self._active_log is not None:
            self._active_log.append(EventKind.MODEL_INVOKED, payload=info)

    def _engine_append(self, kind: EventKind, payload: dict) -> None:
        with ProjectLog(self.projects_root, ENGINE_LOG, writer=True) as log:
            if not log.exists():
                log.append(EventKind.PROJECT_CREATED,
                           payload={"mode": "", "prompt": "", "system": True})
            log.append(kind, payload=payload)

    def workspace(self, project_id: str) -> Workspace:
        if project_id not in self._workspaces:
            self._workspaces[project_id] = Workspace(
                self.home / "workspaces" / project_id)
        return self._workspaces[project_id]

    def open_log(self, project_id: str, writer: bool = False) -> ProjectLog:
        log = ProjectLog(self.projects_root, project_id, writer=writer)
        log.busy_probe = lambda: (project_id in self._workspaces
                                  and self._workspaces[project_id].busy())
        return log

    def list_projects(self) -> list[str]:
        return list_projects(self.projects_root)

    def project_state(self, project_id: str) -> WorkflowState:
        return self.open_log(project_id).resume()

    # -- lifecycle ----------------------------------------------------------------

    def create_project(self, prompt: str, mode: Mode | str,
                       project_id: str | None = None) -> str:
        if not prompt or not prompt.strip():
            raise EmptyPrompt("a project needs a non-empty research prompt")
        mode = Mode(mode)
        project_id = project_id or f"p-{uuid.uuid4().hex[:8]}"
        if (self.projects_root / project_id).exists():
            raise Conflict(f"project {project_id} already exists")
        if not self.budget.try_consume():
            self._engine_append(EventKind.BUDGET_REJECTED, {
                "prompt": prompt[:200],
                "mode": mode.value,
                "limit": self.config.daily_paper_budget,
            })
            raise BudgetExhausted(
                f"daily paper budget of {self.config.daily_paper_budget} is spent")
        # Reproduce projects have nothing to ideate: the prompt is the target
        # descriptor, so they enter at Planning
        first_stage = Stage.PLANNING if mode is Mode.REPRODUCE else Stage.IDEA
        with self.open_log(project_id, writer=True) as log:
            log.append(EventKind.PROJECT_CREATED, payload={
                "mode": mode.value,
                "prompt": prompt,
                "budgets": {
                    "daily_paper_budget": self.config.daily_paper_budget,
                    "remaining_today": self.budget.remaining(),
                    "experiment_time_budget_seconds":
                        self.config.experiment_time_budget_seconds,
                },
            })
            log.append(EventKind.STAGE_ENTERED, stage=first_stage,
                       payload={"reason": "start"})
            log.append(EventKind.TEAM_INSTANTIATED, stage=first_stage, payload={
                "roles": [a.to_doc() for a in default_team(mode)],
            })
        return project_id

    def run_project(self, project_id: str, max_stage_passes: int = 64) -> WorkflowState:
        """Drive the project until completion (or pause). Safe to call on a
        partially finished project: state is replayed from the journal and
        finished stages are skipped via their recorded verdicts."""
        with self.open_log(project_id, writer=True) as log:
            self._active_log = log
            try:
                state = log.resume()
                passes = 0
                while not state.completed and not state.paused:
                    passes += 1
                    if passes > max_stage_passes:
                        raise LabError(
                            f"project {project_id} did not settle after "
                            f"{max_stage_passes} stage passes")
                    self._run_stage(log, state)
                    state = log.resume()
            finally:
                self._active_log = None
        return state

    def rollback(self, project_id: str, target_seq: int) -> dict:
        with self.open_log(project_id, writer=True) as log:
            marker = log.rollback_to(target_seq)
        return marker.to_doc()

    # -- command channel ------------------------------------------------------------

    def apply_command(self, project_id: str, command: dict) -> dict:
        """Apply one operator command. Commands carrying an idempotency_key
        are deduplicated against the journal: replaying the same key returns
        the original event instead of appending a twin."""
        action = command.get("action")
        key = command.get("idempotency_key")
        with self.open_log(project_id, writer=True) as log:
            if key:
                for rec in log.read():
                    if rec.payload.get("idempotency_key") == key:
                        return rec.to_doc()
            if action == "pause":
                rec = log.append(EventKind.PROJECT_PAUSED, payload={
                    "paused": True, "idempotency_key": key})
            elif action == "resume":
                rec = log.append(EventKind.PROJECT_PAUSED, payload={
                    "paused": False, "idempotency_key": key})
            elif action == "rollback":
                rec = log.rollback_to(int(command["target_seq"]))
            elif action == "inject":
                rec = log.append(EventKind.INTERVENTION_APPLIED, payload={
                    "stage": command.get("stage"),
                    "instruction": command.get("instruction", ""),
                    "idempotency_key": key,
                })
            else:
                raise LabError(f"unknown command action {action!r}")
        return rec.to_doc()

    # -- stage handlers ------------------------------------------------------------

    def _run_stage(self, log: ProjectLog, state: WorkflowState) -> None:
        stage = Stage(state.current_stage)
        verdict = state.stage_verdicts.get(stage.value)
        if verdict and (verdict["passed"] or verdict["forced"]):
            # stage finished before an interruption; only the advance is due
            self._advance(log, stage, state)
            return
        handler = {
            Stage.IDEA: self._stage_idea,
            Stage.PLANNING: self._stage_planning,
            Stage.CODING: self._stage_coding,
            Stage.EXPERIMENT: self._stage_experiment,
            Stage.WRITING: self._stage_writing,
        }[stage]
        handler(log, state)

    def _emit(self, log: ProjectLog):
        return lambda kind, stage=None, payload=None, artifact_refs=None: log.append(
            kind, stage=stage, payload=payload, artifact_refs=artifact_refs)

    def _advance(self, log: ProjectLog, stage: Stage,
                 state: WorkflowState | None = None) -> None:
        nxt = next_stage(stage)
        if nxt is not None:
            log.append(EventKind.STAGE_ENTERED, stage=nxt,
                       payload={"reason": "advance"})
        log.checkpoint()

    def _title(self, state: WorkflowState) -> str:
        words = state.prompt.split()
        return " ".join(words[:8]) if words else state.project_id

    def _seed(self, project_id: str) -> int:
        return int(hashlib.sha256(project_id.encode()).hexdigest()[:8], 16) % 100_000

    def _gate(self, log: ProjectLog, stage: Stage, produce) -> None:
        run_validation_loop(
            stage, produce, self.reviewer, self._emit(log),
            threshold=self.config.quality_threshold,
            max_iterations=self.config.max_iterations,
        )

    # Idea: mode-specific proposal/critique/consensus round, then the gate.

    def _stage_idea(self, log: ProjectLog, state: WorkflowState) -> None:
        mode = Mode(state.mode)
        emit = self._emit(log)

        def produce(iteration: int) -> str:
            if mode is Mode.DISCUSSION:
                proposal = (f"Debated idea (as given): {state.prompt}")
                emit(EventKind.PROPOSAL_SUBMITTED, stage=Stage.IDEA, payload={
                    "by": "postdoc", "iteration": iteration, "text": proposal})
                for critic in ("postdoc_b", "pi"):
                    critique = self.gateway.invoke("primary", (
                        f"TASK: critique\nROLE: {critic}\nITERATION: {iteration}\n"
                        f"IDEA: {proposal}"), session=fresh_session("idea"))
                    emit(EventKind.CRITIQUE_RECORDED, stage=Stage.IDEA, payload={
                        "by": critic, "iteration": iteration, "text": critique})
            else:
                goal = ("faithful reproduction of the target result"
                        if mode is Mode.REPRODUCE else "a novel direction")
                proposal = self.gateway.invoke("primary", (
                    f"TASK: propose\nMODE: {mode.value}\nGOAL: {goal}\n"
                    f"ITERATION: {iteration}\nTOPIC: {state.prompt}"),
                    session=fresh_session("idea"))
                emit(EventKind.PROPOSAL_SUBMITTED, stage=Stage.IDEA, payload={
                    "by": "postdoc", "iteration": iteration, "text": proposal})
                critique = self.gateway.invoke("primary", (
                    f"TASK: critique\nROLE: pi\nITERATION: {iteration}\n"
                    f"PROPOSAL: {proposal}"), session=fresh_session("idea"))
                emit(EventKind.CRITIQUE_RECORDED, stage=Stage.IDEA, payload={
                    "by": "pi", "iteration": iteration, "text": critique})
            consensus = self.gateway.invoke("primary", (
                f"TASK: consensus\nITERATION: {iteration}\n"
                f"PROPOSAL: {proposal}"), session=fresh_session("idea"))
            emit(EventKind.CONSENSUS_REACHED, stage=Stage.IDEA, payload={
                "iteration": iteration, "summary": consensus})
            return proposal + "\n" + consensus

        self._gate(log, Stage.IDEA, produce)
        self._advance(log, Stage.IDEA)

    def _stage_planning(self, log: ProjectLog, state: WorkflowState) -> None:
        mode = Mode(state.mode)
        plan = plan_for_mode(mode, state.prompt)
        plan.validate()

        def produce(iteration: int) -> str:
            narrative = self.gateway.invoke("primary", (
                f"TASK: plan\nMODE: {mode.value}\nITERATION: {iteration}\n"
                f"PROMPT: {state.prompt}"), session=fresh_session("plan"))
            steps = "\n".join(f"- {s.step_id}: {s.description}"
                              for s in plan.order())
            return narrative + "\n" + steps

        self._gate(log, Stage.PLANNING, produce)
        log.append(EventKind.PLAN_VALIDATED, stage=Stage.PLANNING,
                   payload={"plan": plan.to_doc()})
        self._advance(log, Stage.PLANNING)

    def _stage_coding(self, log: ProjectLog, state: WorkflowState) -> None:
        ws = self.workspace(state.project_id)
        tk = ToolKit(ws)
        emit = self._emit(log)
        smoke_state = {"passed": False}

        def produce(iteration: int) -> str:
            code = self.gateway.invoke("coding", (
                f"TASK: code\nSEED: {self._seed(state.project_id)}\n"
                f"ITERATION: {iteration}\nPROMPT: {state.prompt}"),
                session=fresh_session("code"))
            outcome = tk.write_file("experiment.py", code)
            emit(EventKind.TOOL_EXECUTED, stage=Stage.CODING, payload={
                "tool": "WriteFile", "step_id": "coding:prepare",
                "ok": outcome.ok, "path": "experiment.py",
                "error": outcome.error,
            })
            if not outcome.ok:
                smoke_state["passed"] = False
                return code
            smoke = smoke_test(ws, "python3 experiment.py",
                               time_budget_s=min(
                                   120.0, self.config.experiment_time_budget_seconds),
                               grace_s=self.config.grace_seconds)
            emit(EventKind.TOOL_EXECUTED, stage=Stage.CODING, payload={
                "tool": "Bash", "step_id": "coding:smoke",
                "command": smoke.run.command, "ok": smoke.run.exit_code == 0,
                "runner": True,
            })
            emit(EventKind.SMOKE_TESTED, stage=Stage.CODING, payload={
                "passed": smoke.passed, "run_id": smoke.run.run_id,
                "metric_count": len(smoke.run.records),
                "exit_code": smoke.run.exit_code,
            })
            smoke_state["passed"] = smoke.passed
            return code

        engine = self

        class SmokeGatedReviewer:
            # code that cannot pass its own smoke run is not reviewable work
            def score(self, stage: Stage, output: str) -> float:
                if not smoke_state["passed"]:
                    return 0.0
                return engine.reviewer.score(stage, output)

        run_validation_loop(
            Stage.CODING, produce, SmokeGatedReviewer(), self._emit(log),
            threshold=self.config.quality_threshold,
            max_iterations=self.config.max_iterations,
        )
        self._advance(log, Stage.CODING)

    def _stage_experiment(self, log: ProjectLog, state: WorkflowState) -> None:
        emit = self._emit(log)
        if state.metrics_finalized:
            # resumed past the run; only the gate and advance are owed
            summary = ", ".join(f"{k}={v}" for k, v in
                                sorted(state.metrics_finalized.items()))
            self._gate(log, Stage.EXPERIMENT,
                       lambda it: f"finalized metrics: {summary}")
            self._advance(log, Stage.EXPERIMENT)
            return

        ws = self.workspace(state.project_id)
        run = run_experiment(ws, "python3 experiment.py",
                             self.config.experiment_time_budget_seconds,
                             grace_s=self.config.grace_seconds)
        launch = emit(EventKind.TOOL_EXECUTED, stage=Stage.EXPERIMENT, payload={
            "tool": "Bash", "step_id": "experiment:run",
            "command": run.command, "ok": run.exit_code == 0, "runner": True,
            "run_id": run.run_id, "outcome": run.outcome.value,
        })
        journal_ref = self.store.put(
            run.journal_path.read_bytes(), kind="metric-journal",
            creator="phd",
            source_event={"project": state.project_id, "seq": launch.seq})
        emit(EventKind.EXPERIMENT_FINISHED, stage=Stage.EXPERIMENT, payload={
            "outcome": run.outcome.value, "exit_code": run.exit_code,
            "run_id": run.run_id, "record_count": len(run.records),
            "duration_s": round(run.duration_s, 3),
        }, artifact_refs=[journal_ref])

        if run.outcome is not RunOutcome.FINALIZED:
            fresh = log.resume()
            routed = route_feedback(
                fresh, emit, Stage.EXPERIMENT, Stage.CODING,
                FeedbackReason.CODING_FAILURE,
                note=f"run {run.run_id} ended {run.outcome.value}",
                max_reentries=self.config.max_feedback_per_stage)
            if not routed:
                raise NoFinalizedMetrics(
                    f"project {state.project_id}: experiment never finalized "
                    f"and the coding stage is out of re-entries")
            sig = pop_feedback(log.resume())
            log.append(EventKind.STAGE_ENTERED, stage=Stage.CODING, payload={
                "reason": "feedback", "signal": sig})
            log.checkpoint()
            return

        tool_history = [r.payload for r in effective_records(log.read())
                        if r.kind == EventKind.TOOL_EXECUTED]
        findings = run_audit(run.final_results, run.records, tool_history,
                             code_dir=ws.work_dir)
        findings.extend(nonfinite_findings(run.records))
        for finding in findings:
            emit(EventKind.AUDIT_FINDING, stage=Stage.EXPERIMENT,
                 payload=finding.to_doc())
        errors = [f for f in findings if f.severity == "error"]
        if errors:
            raise IntegrityFailed(
                f"audit blocked finalization: {[f.code for f in errors]}")

        for name in sorted(run.final_results):
            log.append(EventKind.METRIC_FINALIZED, stage=Stage.EXPERIMENT,
                       payload={"name": name, "value": run.final_results[name]},
                       artifact_refs=[journal_ref])

        figure_path = render_metric_figure(
            run.records, ws.runs_dir / f"{run.run_id}.png",
            title=self._title(state))
        figure_ref = self.store.put(
            figure_path.read_bytes(), kind="figure", creator="ml_engineer",
            parents=[journal_ref])
        log.append(EventKind.FIGURE_RENDERED, stage=Stage.EXPERIMENT,
                   payload={"run_id": run.run_id},
                   artifact_refs=[figure_ref])

        summary = ", ".join(f"{k}={v}" for k, v in sorted(run.final_results.items()))
        self._gate(log, Stage.EXPERIMENT,
                   lambda it: f"run {run.run_id} {run.outcome.value}; {summary}")
        self._advance(log, Stage.EXPERIMENT)

    def _stage_writing(self, log: ProjectLog, state: WorkflowState) -> None:
        if not state.journal_refs or not state.metrics_finalized:
            raise NoFinalizedMetrics(
                f"project {state.project_id} reached Writing without metrics")
        journal_ref = state.journal_refs[-1]
        records = parse_metric_text(
            self.store.get(journal_ref).decode("utf-8"), origin=journal_ref)
        title = self._title(state)

        outline = build_outline(Mode(state.mode))
        outline_ref = self.store.put(
            canonical_json(outline.to_doc()).encode("utf-8"),
            kind="outline", creator="paper_writer")
        log.append(EventKind.OUTLINE_BUILT, stage=Stage.WRITING, payload={
            "sections": outline.titles(),
        }, artifact_refs=[outline_ref])

        def produce(iteration: int) -> str:
            sections = {}
            for section in outline.sections:
                sections[section.title] = self.gateway.invoke("primary", (
                    f"TASK: section\nSECTION: {section.title}\n"
                    f"INTENT: {section.intent}\nITERATION: {iteration}\n"
                    f"TITLE: {title}"), session=fresh_session("write"))
            return assemble_manuscript(
                title, state.mode, sections, state.metrics_finalized,
                journal_ref, records, figure_refs=state.figure_refs,
                outline=outline)

        output = {}

        def produce_and_keep(iteration: int) -> str:
            output["text"] = produce(iteration)
            return output["text"]

        run_validation_loop(
            Stage.WRITING, produce_and_keep, self.reviewer, self._emit(log),
            threshold=self.config.quality_threshold,
            max_iterations=self.config.max_iterations,
        )
        text = output["text"]

        report = verify_manuscript(
            text, lambda ref: parse_metric_text(
                self.store.get(ref).decode("utf-8"), origin=ref))
        if not report.ok:
            raise IntegrityFailed(
                f"manuscript has unresolved claims: {report.unresolved}")

        manuscript_ref = self.store.put(
            text.encode("utf-8"), kind="manuscript", creator="paper_writer",
            parents=[journal_ref, outline_ref, *state.figure_refs])
        log.append(EventKind.DRAFT_ASSEMBLED, stage=Stage.WRITING, payload={
            "verification": report.to_doc(),
        }, artifact_refs=[manuscript_ref])
        log.append(EventKind.PROJECT_COMPLETED, stage=Stage.WRITING, payload={
            "manuscript_ref": manuscript_ref,
        })
        log.checkpoint()

    # -- evaluation ---------------------------------------------------------------

    def evaluate(self, papers: list[dict], baseline: str, candidate: str,
                 reviewers_per_paper: int = 1) -> dict:
        """Review each (paper, system) text and report candidate-over-baseline
        gains plus radar exports. `papers` rows look like
        {"paper_id": ..., "systems": {"A": [text, ...], "B": [...]}}."""
        harness = EvalHarness(self.gateway)
        agg = Aggregate()
        for paper in papers:
            paper_id = paper["paper_id"]
            for system, texts in sorted(paper["systems"].items()):
                for i, text in enumerate(texts):
                    review = harness.review(
                        paper_id, system, text,
                        reviewer=f"reviewer-{(i % max(reviewers_per_paper, 1)) + 1}")
                    agg.add(review)
                    self._engine_append(EventKind.REVIEW_SCORED, review.to_doc())
        return {
            "baseline": baseline,
            "candidate": candidate,
            "gains": agg.gains(baseline, candidate),
            "radar": [agg.export_radar(p) for p in agg.papers()],
        }
