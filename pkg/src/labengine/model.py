"""Shared vocabulary: pipeline stages, research modes, and event kinds."""

from __future__ import annotations

import enum

from .errors import InvalidTarget


class Stage(str, enum.Enum):
    IDEA = "Idea"
    PLANNING = "Planning"
    CODING = "Coding"
    EXPERIMENT = "Experiment"
    WRITING = "Writing"


STAGE_ORDER: tuple[Stage, ...] = (
    Stage.IDEA,
    Stage.PLANNING,
    Stage.CODING,
    Stage.EXPERIMENT,
    Stage.WRITING,
)


def stage_index(stage: Stage | str) -> int:
    return STAGE_ORDER.index(Stage(stage))


def next_stage(stage: Stage | str) -> Stage | None:
    """Stage after `stage` in forward order, or None from the terminal stage."""
    i = stage_index(stage)
    if i + 1 >= len(STAGE_ORDER):
        return None
    return STAGE_ORDER[i + 1]


def require_earlier(target: Stage | str, origin: Stage | str) -> None:
    """Feedback may only point backwards in the stage order."""
    if stage_index(target) >= stage_index(origin):
        raise InvalidTarget(f"feedback target {target} is not earlier than {origin}")


class Mode(str, enum.Enum):
    EXPLORE = "Explore"
    DISCUSSION = "Discussion"
    REPRODUCE = "Reproduce"


class EventKind(str, enum.Enum):
    # project lifecycle
    PROJECT_CREATED = "ProjectCreated"
    STAGE_ENTERED = "StageEntered"
    PROJECT_PAUSED = "ProjectPaused"
    PROJECT_COMPLETED = "ProjectCompleted"
    # idea layer
    TEAM_INSTANTIATED = "TeamInstantiated"
    PROPOSAL_SUBMITTED = "ProposalSubmitted"
    CRITIQUE_RECORDED = "CritiqueRecorded"
    CONSENSUS_REACHED = "ConsensusReached"
    # validation loop
    PLAN_VALIDATED = "PlanValidated"
    VALIDATION_SCORED = "ValidationScored"
    REVISION_REQUESTED = "RevisionRequested"
    RISK_FLAG = "RiskFlag"
    FEEDBACK_ROUTED = "FeedbackRouted"
    # coding / experiment
    TOOL_EXECUTED = "ToolExecuted"
    SMOKE_TESTED = "SmokeTested"
    EXPERIMENT_FINISHED = "ExperimentFinished"
    METRIC_FINALIZED = "MetricFinalized"
    AUDIT_FINDING = "AuditFinding"
    FIGURE_RENDERED = "FigureRendered"
    # writing / evaluation
    OUTLINE_BUILT = "OutlineBuilt"
    DRAFT_ASSEMBLED = "DraftAssembled"
    REVIEW_SCORED = "ReviewScored"
    # control
    ROLLBACK_MARKER = "RollbackMarker"
    INTERVENTION_APPLIED = "InterventionApplied"
    BUDGET_REJECTED = "BudgetRejected"
    MODEL_INVOKED = "ModelInvoked"


class FeedbackReason(str, enum.Enum):
    CODING_FAILURE = "CodingFailure"
    UNEXPECTED_RESULT = "UnexpectedResult"
    REPEATED_FAILURE = "RepeatedFailure"
    REVIEW_DEFECT = "ReviewDefect"


# review dimensions, each scored 0..100 and weighted uniformly
EVAL_DIMENSIONS: tuple[str, ...] = (
    "TechnicalDepthReproducibility",
    "StructureSectionFlow",
    "NoveltyContributions",
    "ClarityTerminology",
    "LogicalArgumentation",
    "CitationsEvidenceSupport",
)
