"""Research team composition.

A project is staffed by a small fixed-role team. Roles map to gateway
capabilities (which backend chain serves them) and to stage duties (who
produces a stage's output and who critiques it). Discussion mode seats a
second senior voice so the idea debate has a real counterparty.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import Mode, Stage


class Role(str, Enum):
    PI = "pi"
    POSTDOC = "postdoc"
    PHD = "phd"
    ML_ENGINEER = "ml_engineer"
    PAPER_WRITER = "paper_writer"
    REVIEWER = "reviewer"


@dataclass(frozen=True)
class AgentSpec:
    name: str
    role: Role
    capability: str = "primary"

    def to_doc(self) -> dict:
        return {"name": self.name, "role": self.role.value,
                "capability": self.capability}


# stage -> (producing role, critiquing role)
STAGE_DUTIES: dict[Stage, tuple[Role, Role]] = {
    Stage.IDEA: (Role.POSTDOC, Role.PI),
    Stage.PLANNING: (Role.POSTDOC, Role.PI),
    Stage.CODING: (Role.PHD, Role.ML_ENGINEER),
    Stage.EXPERIMENT: (Role.PHD, Role.ML_ENGINEER),
    Stage.WRITING: (Role.PAPER_WRITER, Role.PI),
}


def default_team(mode: Mode) -> list[AgentSpec]:
    team = [
        AgentSpec("pi", Role.PI),
        AgentSpec("postdoc", Role.POSTDOC),
        AgentSpec("phd", Role.PHD, capability="coding"),
        AgentSpec("ml_engineer", Role.ML_ENGINEER, capability="coding"),
        AgentSpec("paper_writer", Role.PAPER_WRITER),
    ]
    if mode is Mode.DISCUSSION:
        team.insert(2, AgentSpec("postdoc_b", Role.POSTDOC))
    return team


def members_for(team: list[AgentSpec], role: Role) -> list[AgentSpec]:
    return [a for a in team if a.role is role]
