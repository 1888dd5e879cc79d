"""Fold semantics: the state document is a pure function of the events."""

from __future__ import annotations

from labengine.model import EventKind, Stage
from labengine.state import WorkflowState, apply_event, canonical_json, digest_doc


def fold(events, project_id="p"):
    state = WorkflowState(project_id=project_id)
    for kind, stage, payload in events:
        apply_event(state, kind, stage, payload, [])
    return state


def test_canonical_json_is_order_insensitive():
    a = canonical_json({"b": 1, "a": {"y": 2, "x": 3}})
    b = canonical_json({"a": {"x": 3, "y": 2}, "b": 1})
    assert a == b
    assert digest_doc({"b": 1, "a": 1}) == digest_doc({"a": 1, "b": 1})


def test_digest_ignores_nothing_in_doc():
    s1 = fold([(EventKind.PROJECT_CREATED, None, {"mode": "Explore", "prompt": "x"})])
    s2 = fold([(EventKind.PROJECT_CREATED, None, {"mode": "Explore", "prompt": "y"})])
    assert s1.digest() != s2.digest()


def test_roundtrip_through_doc():
    state = fold([
        (EventKind.PROJECT_CREATED, None, {"mode": "Explore", "prompt": "x"}),
        (EventKind.STAGE_ENTERED, "Idea", {"reason": "start"}),
        (EventKind.METRIC_FINALIZED, "Experiment", {"name": "loss", "value": 0.5}),
    ])
    assert WorkflowState.from_doc(state.to_doc()).digest() == state.digest()


def test_feedback_lifo_with_dedup():
    sig = lambda o, t, r: {"origin": o, "target": t, "reason": r, "note": ""}
    state = fold([
        (EventKind.FEEDBACK_ROUTED, "Experiment",
         {"origin": "Experiment", "target": "Coding", "reason": "CodingFailure"}),
        (EventKind.FEEDBACK_ROUTED, "Writing",
         {"origin": "Writing", "target": "Idea", "reason": "ReviewDefect"}),
        # duplicate of the first: must not grow the stack, moves to front
        (EventKind.FEEDBACK_ROUTED, "Experiment",
         {"origin": "Experiment", "target": "Coding", "reason": "CodingFailure"}),
    ])
    assert state.pending_feedback == [
        sig("Experiment", "Coding", "CodingFailure"),
        sig("Writing", "Idea", "ReviewDefect"),
    ]


def test_feedback_reentry_consumes_signal_and_bumps_iterations():
    served = {"origin": "Experiment", "target": "Coding",
              "reason": "CodingFailure", "note": ""}
    state = fold([
        (EventKind.FEEDBACK_ROUTED, "Experiment",
         {"origin": "Experiment", "target": "Coding", "reason": "CodingFailure"}),
        (EventKind.STAGE_ENTERED, "Coding", {"reason": "feedback", "signal": served}),
    ])
    assert state.pending_feedback == []
    assert state.stage_iterations["Coding"] == 1
    assert state.current_stage == "Coding"


def test_validation_verdict_and_forced_flag():
    state = fold([
        (EventKind.VALIDATION_SCORED, "Idea",
         {"score": 2.5, "iteration": 3, "passed": False}),
        (EventKind.RISK_FLAG, "Idea", {"forces_advance": True}),
    ])
    assert state.stage_verdicts["Idea"] == {
        "score": 2.5, "passed": False, "iteration": 3, "forced": True}
    assert state.risk_flags == 1


def test_unknown_kind_is_ignored():
    state = fold([(EventKind.MODEL_INVOKED, None, {"backend": "synthetic"})])
    assert state.digest() == WorkflowState(project_id="p").digest()
