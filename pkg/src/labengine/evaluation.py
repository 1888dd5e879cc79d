"""Rubric-based manuscript evaluation.

Each review scores six fixed dimensions on 0..100; the total is the
uniformly weighted sum, so it also lands on 0..100. Reviews run in fresh
sessions: a session that has already seen any traffic is rejected outright,
because a reviewer primed with authoring context is not a reviewer.

Score extraction is strict. The reply must carry a fenced ``scores`` block
with all six dimensions; a malformed reply earns exactly one re-ask in the
same session, after which the review fails as unparseable rather than being
guessed at.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from statistics import mean
from typing import Callable

from .errors import (
    AllBackendsFailed,
    ReviewerUnavailable,
    SessionReused,
    UnparseableReview,
)
from .gateway import Gateway, Session, fresh_session
from .model import EVAL_DIMENSIONS

WEIGHT = 1.0 / len(EVAL_DIMENSIONS)

_SCORES_FENCE_RE = re.compile(r"```scores\s*\n(.*?)```", re.DOTALL)
_SCORE_LINE_RE = re.compile(r"^\s*([A-Za-z]+)\s*:\s*([0-9]+(?:\.[0-9]+)?)\s*$")


@dataclass(frozen=True)
class Review:
    paper_id: str
    system: str
    reviewer: str
    scores: dict[str, float]
    session_id: str

    @property
    def total(self) -> float:
        # uniform weights; summing before the single divide keeps integer
        # score sheets exact instead of accumulating 1/6 rounding error
        return sum(self.scores[d] for d in EVAL_DIMENSIONS) / len(EVAL_DIMENSIONS)

    def to_doc(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "system": self.system,
            "reviewer": self.reviewer,
            "scores": dict(self.scores),
            "total": self.total,
            "session": self.session_id,
        }


def parse_scores_block(text: str) -> dict[str, float] | None:
    """Extract the six dimension scores, or None when the reply does not
    contain a complete, in-range scores block."""
    match = _SCORES_FENCE_RE.search(text)
    if not match:
        return None
    scores: dict[str, float] = {}
    for line in match.group(1).splitlines():
        if not line.strip():
            continue
        m = _SCORE_LINE_RE.match(line)
        if not m:
            return None
        name, value = m.group(1), float(m.group(2))
        if name not in EVAL_DIMENSIONS or not (0.0 <= value <= 100.0):
            return None
        scores[name] = value
    if set(scores) != set(EVAL_DIMENSIONS):
        return None
    return scores


def _review_prompt(paper_id: str, paper_text: str) -> str:
    template = resources.files("labengine").joinpath("prompts/review.txt") \
        .read_text(encoding="utf-8")
    return template.format(
        paper_id=paper_id,
        dimensions="\n".join(f"- {d}" for d in EVAL_DIMENSIONS),
        paper_text=paper_text,
    )


class EvalHarness:
    def __init__(self, gateway: Gateway, capability: str = "primary",
                 emit: Callable[[dict], None] | None = None):
        self.gateway = gateway
        self.capability = capability
        self.emit = emit

    def review(self, paper_id: str, system: str, paper_text: str,
               reviewer: str = "reviewer-1",
               session: Session | None = None) -> Review:
        if session is None:
            session = fresh_session("review")
        if session.turns != 0:
            raise SessionReused(
                f"session {session.session_id} has {session.turns} prior turns")
        prompt = _review_prompt(paper_id, paper_text)
        try:
            reply = self.gateway.invoke(self.capability, prompt, session=session)
            scores = parse_scores_block(reply)
            if scores is None:
                # one clarifying re-ask in the same session, then give up
                reply = self.gateway.invoke(
                    self.capability,
                    "TASK: review\nYour previous reply had no valid scores "
                    "block. Re-emit only the fenced scores block with all "
                    "six dimensions.",
                    session=session)
                scores = parse_scores_block(reply)
        except AllBackendsFailed as exc:
            raise ReviewerUnavailable(str(exc)) from exc
        if scores is None:
            raise UnparseableReview(
                f"reviewer {reviewer} produced no parseable scores for {paper_id}")
        review = Review(paper_id=paper_id, system=system, reviewer=reviewer,
                        scores=scores, session_id=session.session_id)
        if self.emit is not None:
            self.emit(review.to_doc())
        return review


# -- aggregation -------------------------------------------------------------------


@dataclass
class Aggregate:
    """Reviews grouped by (paper, system) with per-paper system means."""
    reviews: list[Review] = field(default_factory=list)

    def add(self, review: Review) -> None:
        self.reviews.append(review)

    def papers(self) -> list[str]:
        return sorted({r.paper_id for r in self.reviews})

    def totals(self, paper_id: str, system: str) -> list[float]:
        return [r.total for r in self.reviews
                if r.paper_id == paper_id and r.system == system]

    def system_mean(self, paper_id: str, system: str) -> float:
        totals = self.totals(paper_id, system)
        if not totals:
            raise ValueError(f"no reviews for {paper_id}/{system}")
        return mean(totals)

    def gain(self, paper_id: str, baseline: str, candidate: str) -> float:
        """Candidate-over-baseline gain in total score for one paper."""
        return self.system_mean(paper_id, candidate) - self.system_mean(paper_id, baseline)

    def gains(self, baseline: str, candidate: str) -> dict[str, float]:
        return {p: self.gain(p, baseline, candidate) for p in self.papers()}

    def dimension_means(self, paper_id: str, system: str) -> list[float]:
        rows = [r.scores for r in self.reviews
                if r.paper_id == paper_id and r.system == system]
        if not rows:
            raise ValueError(f"no reviews for {paper_id}/{system}")
        return [mean(row[d] for row in rows) for d in EVAL_DIMENSIONS]

    def export_radar(self, paper_id: str) -> dict:
        systems = sorted({r.system for r in self.reviews if r.paper_id == paper_id})
        return {
            "paper_id": paper_id,
            "dimensions": list(EVAL_DIMENSIONS),
            "series": [
                {"system": s, "values": self.dimension_means(paper_id, s)}
                for s in systems
            ],
        }
