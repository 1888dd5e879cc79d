from __future__ import annotations

import pytest

from labengine.errors import InvalidTarget, ValidationFailed
from labengine.model import EventKind, FeedbackReason, Stage
from labengine.state import WorkflowState
from labengine.workflow import (
    PlanGraph,
    PlanStep,
    ScriptedReviewer,
    plan_for_mode,
    route_feedback,
    run_validation_loop,
)
from labengine.model import Mode


class EventSink:
    def __init__(self):
        self.events = []

    def __call__(self, kind, stage=None, payload=None, artifact_refs=None):
        self.events.append((kind, stage, payload or {}))

    def kinds(self):
        return [k for k, _, _ in self.events]


# -- validation loop ---------------------------------------------------------------


def test_pass_at_threshold_first_iteration():
    sink = EventSink()
    out, verdict = run_validation_loop(
        Stage.IDEA, lambda it: f"draft {it}", ScriptedReviewer([3.0]), sink,
        threshold=3.0, max_iterations=3)
    assert verdict.passed and not verdict.forced
    assert verdict.iteration == 1 and verdict.score == 3.0
    assert out == "draft 1"
    assert sink.kinds() == [EventKind.VALIDATION_SCORED]


def test_cap_forces_advance_with_risk_flag():
    sink = EventSink()
    out, verdict = run_validation_loop(
        Stage.PLANNING, lambda it: f"draft {it}",
        ScriptedReviewer([2.0, 2.5, 2.8]), sink,
        threshold=3.0, max_iterations=3)
    assert not verdict.passed and verdict.forced
    assert verdict.iteration == 3 and verdict.score == 2.8
    assert out == "draft 3"
    assert sink.kinds() == [
        EventKind.VALIDATION_SCORED, EventKind.REVISION_REQUESTED,
        EventKind.VALIDATION_SCORED, EventKind.REVISION_REQUESTED,
        EventKind.VALIDATION_SCORED, EventKind.RISK_FLAG,
    ]
    flag = sink.events[-1][2]
    assert flag["forces_advance"] is True


def test_recovery_on_second_iteration():
    sink = EventSink()
    _, verdict = run_validation_loop(
        Stage.CODING, lambda it: str(it), ScriptedReviewer([1.0, 4.5]), sink,
        threshold=3.0, max_iterations=3)
    assert verdict.passed and verdict.iteration == 2
    # no revision after the passing score, no risk flag
    assert sink.kinds() == [
        EventKind.VALIDATION_SCORED, EventKind.REVISION_REQUESTED,
        EventKind.VALIDATION_SCORED,
    ]


def test_out_of_scale_score_rejected():
    with pytest.raises(ValidationFailed):
        run_validation_loop(Stage.IDEA, lambda it: "x",
                            ScriptedReviewer([5.5]), EventSink())


# -- feedback routing ---------------------------------------------------------------


def test_feedback_must_point_backwards():
    state = WorkflowState(project_id="p")
    with pytest.raises(InvalidTarget):
        route_feedback(state, EventSink(), Stage.CODING, Stage.WRITING,
                       FeedbackReason.CODING_FAILURE)
    with pytest.raises(InvalidTarget):
        route_feedback(state, EventSink(), Stage.CODING, Stage.CODING,
                       FeedbackReason.CODING_FAILURE)


def test_feedback_routes_when_budget_left():
    state = WorkflowState(project_id="p")
    sink = EventSink()
    assert route_feedback(state, sink, Stage.EXPERIMENT, Stage.CODING,
                          FeedbackReason.UNEXPECTED_RESULT, note="odd curve")
    assert sink.kinds() == [EventKind.FEEDBACK_ROUTED]
    assert sink.events[0][2]["target"] == "Coding"


def test_feedback_downgrades_at_cap():
    state = WorkflowState(project_id="p")
    state.stage_iterations["Coding"] = 3
    sink = EventSink()
    assert not route_feedback(state, sink, Stage.EXPERIMENT, Stage.CODING,
                              FeedbackReason.REPEATED_FAILURE, max_reentries=3)
    assert sink.kinds() == [EventKind.RISK_FLAG]
    assert sink.events[0][2]["forces_advance"] is False


# -- plan graph --------------------------------------------------------------------


def test_plan_templates_validate_for_all_modes():
    for mode in Mode:
        plan = plan_for_mode(mode, "prompt")
        plan.validate()
        order = [s.step_id for s in plan.order()]
        assert order.index("smoke") < order.index("run") < order.index("write")


def test_plan_rejects_unknown_dependency():
    plan = PlanGraph([PlanStep("a", "x", "", depends_on=("missing",))])
    with pytest.raises(ValidationFailed):
        plan.validate()


def test_plan_rejects_cycle():
    plan = PlanGraph([
        PlanStep("a", "x", "", depends_on=("b",)),
        PlanStep("b", "x", "", depends_on=("a",)),
    ])
    with pytest.raises(ValidationFailed):
        plan.validate()


def test_plan_rejects_duplicate_ids():
    plan = PlanGraph([PlanStep("a", "x", ""), PlanStep("a", "y", "")])
    with pytest.raises(ValidationFailed):
        plan.validate()


def test_plan_roundtrip():
    plan = plan_for_mode(Mode.REPRODUCE, "prompt")
    assert PlanGraph.from_doc(plan.to_doc()).to_doc() == plan.to_doc()
