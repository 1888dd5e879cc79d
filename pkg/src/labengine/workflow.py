"""Stage progression mechanics.

The pieces here are deliberately pure: they take state and an `emit`
callable and never touch the journal directly, which keeps the validation
loop and feedback routing testable without a filesystem.

Every stage exit passes through a quality gate. A reviewer scores the
stage's output on a 0..5 scale; at or above the threshold the stage passes,
below it the producer gets another iteration. The gate cannot stall a
project forever: after max_iterations the workflow advances anyway and
records a risk flag so the forced transition stays visible downstream.

Feedback flows only backwards (a later stage may reopen an earlier one,
never the reverse) and each signal is deduplicated; a stage that keeps
getting reopened eventually stops accepting feedback and the signal
downgrades to a risk flag instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .errors import ValidationFailed
from .gateway import Gateway, fresh_session
from .model import EventKind, FeedbackReason, Mode, Stage, require_earlier
from .state import WorkflowState

Emit = Callable[..., object]  # emit(kind, stage=..., payload=...) -> record


# -- plan graph ----------------------------------------------------------------


@dataclass(frozen=True)
class PlanStep:
    step_id: str
    kind: str
    description: str
    depends_on: tuple[str, ...] = ()

    def to_doc(self) -> dict:
        return {
            "step_id": self.step_id,
            "kind": self.kind,
            "description": self.description,
            "depends_on": list(self.depends_on),
        }


@dataclass
class PlanGraph:
    steps: list[PlanStep] = field(default_factory=list)

    def validate(self) -> None:
        ids = [s.step_id for s in self.steps]
        if len(ids) != len(set(ids)):
            raise ValidationFailed("duplicate step ids in plan")
        known = set(ids)
        for step in self.steps:
            for dep in step.depends_on:
                if dep not in known:
                    raise ValidationFailed(
                        f"step {step.step_id} depends on unknown step {dep}")
        self.order()  # raises on cycles

    def order(self) -> list[PlanStep]:
        """Topological order, stable with respect to declaration order."""
        by_id = {s.step_id: s for s in self.steps}
        done: set[str] = set()
        out: list[PlanStep] = []
        visiting: set[str] = set()

        def visit(step: PlanStep) -> None:
            if step.step_id in done:
                return
            if step.step_id in visiting:
                raise ValidationFailed(f"plan cycle through {step.step_id}")
            visiting.add(step.step_id)
            for dep in step.depends_on:
                visit(by_id[dep])
            visiting.discard(step.step_id)
            done.add(step.step_id)
            out.append(step)

        for step in self.steps:
            visit(step)
        return out

    def to_doc(self) -> dict:
        return {"steps": [s.to_doc() for s in self.steps]}

    @classmethod
    def from_doc(cls, doc: dict) -> "PlanGraph":
        return cls(steps=[
            PlanStep(
                step_id=s["step_id"],
                kind=s["kind"],
                description=s["description"],
                depends_on=tuple(s.get("depends_on", ())),
            )
            for s in doc.get("steps", [])
        ])


def plan_for_mode(mode: Mode, prompt: str) -> PlanGraph:
    """Shared execution skeleton; the modes differ in how a project enters
    the pipeline, not in the mechanics of getting an experiment out the
    door. Reproduce projects skip the Idea stage entirely, so their plan is
    seeded with a descriptor step pinning what is being reproduced."""
    focus = {
        Mode.EXPLORE: "the selected direction",
        Mode.DISCUSSION: "the debated idea",
        Mode.REPRODUCE: "the target result",
    }[mode]
    steps = [
        PlanStep("prepare", "prepare", f"materialize the experiment code for {focus}"),
        PlanStep("smoke", "smoke", "run the reduced smoke configuration",
                 depends_on=("prepare",)),
        PlanStep("run", "experiment", "execute the full run under the time budget",
                 depends_on=("smoke",)),
        PlanStep("figures", "figures", "render the summary figure from the journal",
                 depends_on=("run",)),
        PlanStep("write", "write", "assemble the manuscript from finalized results",
                 depends_on=("figures",)),
    ]
    if mode is Mode.REPRODUCE:
        steps.insert(0, PlanStep(
            "target", "descriptor",
            f"reproduction target and claimed results: {prompt}"))
        steps[1] = PlanStep("prepare", "prepare",
                            f"materialize the experiment code for {focus}",
                            depends_on=("target",))
    return PlanGraph(steps=steps)


# -- validation loop -----------------------------------------------------------


@dataclass(frozen=True)
class ValidationVerdict:
    stage: Stage
    score: float
    passed: bool
    iteration: int
    forced: bool


class ReviewerPort(Protocol):
    def score(self, stage: Stage, output: str) -> float: ...


class ScriptedReviewer:
    """Feeds a fixed score sequence to the gate, for tests and rehearsals."""

    def __init__(self, scores: Sequence[float]):
        self._scores = list(scores)

    def score(self, stage: Stage, output: str) -> float:
        if not self._scores:
            raise ValidationFailed("scripted reviewer ran out of scores")
        return self._scores.pop(0)


_SCORE_RE = re.compile(r"SCORE:\s*([0-9]+(?:\.[0-9]+)?)")


class GatewayReviewer:
    """Asks a model to score the stage output. Each request runs in a fresh
    session so prior iterations cannot anchor the verdict."""

    def __init__(self, gateway: Gateway, capability: str = "primary"):
        self.gateway = gateway
        self.capability = capability

    def score(self, stage: Stage, output: str) -> float:
        prompt = (
            "TASK: validate\n"
            f"STAGE: {stage.value}\n"
            "Score the following stage output from 0 to 5 and answer with a "
            "line of the form SCORE: <number>.\n\n" + output
        )
        text = self.gateway.invoke(self.capability, prompt, session=fresh_session("validate"))
        match = _SCORE_RE.search(text)
        if not match:
            raise ValidationFailed(f"reviewer returned no parseable score: {text!r}")
        return float(match.group(1))


def run_validation_loop(stage: Stage, produce: Callable[[int], str],
                        reviewer: ReviewerPort, emit: Emit,
                        threshold: float = 3.0,
                        max_iterations: int = 3) -> tuple[str, ValidationVerdict]:
    """Quality gate for one stage. `produce(iteration)` regenerates the
    stage output; the reviewer scores it. Passing is inclusive at the
    threshold. Hitting the iteration cap forces the advance and flags it."""
    if max_iterations < 1:
        raise ValidationFailed("max_iterations must be at least 1")
    output = ""
    score = 0.0
    for iteration in range(1, max_iterations + 1):
        output = produce(iteration)
        score = float(reviewer.score(stage, output))
        if not (0.0 <= score <= 5.0):
            raise ValidationFailed(f"score {score} outside the 0..5 scale")
        passed = score >= threshold
        emit(EventKind.VALIDATION_SCORED, stage=stage, payload={
            "score": score,
            "threshold": threshold,
            "iteration": iteration,
            "passed": passed,
        })
        if passed:
            return output, ValidationVerdict(stage, score, True, iteration, forced=False)
        if iteration < max_iterations:
            emit(EventKind.REVISION_REQUESTED, stage=stage, payload={
                "iteration": iteration,
                "score": score,
            })
    emit(EventKind.RISK_FLAG, stage=stage, payload={
        "reason": "validation_cap",
        "forces_advance": True,
        "iterations": max_iterations,
        "last_score": score,
    })
    return output, ValidationVerdict(stage, score, False, max_iterations, forced=True)


# -- cross-layer feedback --------------------------------------------------------


def route_feedback(state: WorkflowState, emit: Emit, origin: Stage, target: Stage,
                   reason: FeedbackReason, note: str = "",
                   max_reentries: int = 3) -> bool:
    """Route a defect signal from a later stage back to an earlier one.

    Returns True when the signal was routed, False when it was downgraded to
    a risk flag because the target stage already burned its re-entry budget.
    Duplicate signals (same origin, target, reason) are recorded but do not
    grow the pending stack.
    """
    require_earlier(target, origin)
    if state.iterations(target) >= max_reentries:
        emit(EventKind.RISK_FLAG, stage=origin, payload={
            "reason": "feedback_cap",
            "forces_advance": False,
            "origin": origin.value,
            "target": target.value,
            "feedback_reason": reason.value,
            "note": note,
        })
        return False
    emit(EventKind.FEEDBACK_ROUTED, stage=origin, payload={
        "origin": origin.value,
        "target": target.value,
        "reason": reason.value,
        "note": note,
    })
    return True


def pop_feedback(state: WorkflowState) -> dict | None:
    """Most recent unserved feedback signal, if any (LIFO: the fold inserts
    new signals at the front)."""
    if not state.pending_feedback:
        return None
    return dict(state.pending_feedback[0])
