"""Run configuration.

Everything that tunes engine behaviour lives in one dataclass so tests can
construct variants inline and the CLI can load overrides from a JSON file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class LabConfig:
    # validation loop
    quality_threshold: float = 3.0
    max_iterations: int = 3
    # feedback routing
    max_feedback_per_stage: int = 3
    # experiment harness
    experiment_time_budget_seconds: float = 2400.0
    grace_seconds: float = 5.0
    # model usage
    daily_paper_budget: int = 5
    budget_timezone: str = "Asia/Shanghai"
    # gateway capability chains: capability -> ordered backend names
    chains: dict[str, list[str]] = field(default_factory=lambda: {
        "primary": ["synthetic"],
        "coding": ["synthetic"],
        "image": ["synthetic"],
        "fallback": ["synthetic"],
    })
    # backend specs: name -> {"kind": ..., **options}
    backends: dict[str, dict] = field(default_factory=lambda: {
        "synthetic": {"kind": "synthetic"},
    })

    @classmethod
    def from_file(cls, path: str | Path) -> "LabConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_doc(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
