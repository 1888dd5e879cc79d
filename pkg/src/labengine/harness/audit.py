"""Result integrity audit.

Five rules, each targeting one way a written-up result can detach from what
actually ran:

  R1 ReportWithoutRun    results were declared but the journal is empty
  R2 FabricatedMetric    a declared number never appears in the journal
                         under that metric name (tolerance 1e-9)
  R3 PlaceholderCode     reporting code still contains stub markers
  R4 MockImplementation  metrics exist but no shell execution ever happened
  R5 ConstantMetric      10+ observations of a metric with zero variance
                         (warning: plausible but worth a human look)

R1-R4 are errors, R5 is a warning. The non-finite screen is separate: it
flags every NaN/Inf journal record individually.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .controller import CONTROLLER_FILENAME
from .journal import MetricRecord, records_by_name

PLACEHOLDER_MARKERS = ("TODO: implement", "placeholder", "mock result", "fake metric")
VALUE_TOLERANCE = 1e-9
CONSTANT_MIN_RECORDS = 10


@dataclass(frozen=True)
class AuditFinding:
    rule: str
    code: str
    severity: str
    message: str
    metric: str | None = None

    def to_doc(self) -> dict:
        return {
            "rule": self.rule,
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "metric": self.metric,
        }


def _values_match(claimed: float, observed: float) -> bool:
    if math.isnan(claimed) and math.isnan(observed):
        return True
    if math.isinf(claimed) or math.isinf(observed):
        return claimed == observed
    return abs(claimed - observed) <= VALUE_TOLERANCE


def run_audit(final_results: dict[str, float] | None,
              records: list[MetricRecord],
              tool_history: list[dict],
              code_dir: str | Path | None = None) -> list[AuditFinding]:
    findings: list[AuditFinding] = []
    declared = final_results or {}
    by_name = records_by_name(records)

    # R1: declaring results without a single journaled observation
    if declared and not records:
        findings.append(AuditFinding(
            rule="R1", code="ReportWithoutRun", severity="error",
            message="final results declared but the metric journal is empty"))

    # R2: every declared value must appear in the journal under its own name
    if records:
        for name, claimed in declared.items():
            observed = by_name.get(name, [])
            if not any(_values_match(claimed, rec.value) for rec in observed):
                findings.append(AuditFinding(
                    rule="R2", code="FabricatedMetric", severity="error",
                    metric=name,
                    message=f"declared {name}={claimed!r} has no matching "
                            f"journal record within {VALUE_TOLERANCE}"))

    # R3: stub markers inside reporting code
    if code_dir is not None:
        for path in sorted(Path(code_dir).rglob("*.py")):
            if path.name == CONTROLLER_FILENAME:
                continue
            try:
                text = path.read_text(encoding="utf-8", errors="ignore")
            except OSError:
                continue
            if "report_metric" not in text:
                continue
            lowered = text.lower()
            for marker in PLACEHOLDER_MARKERS:
                if marker.lower() in lowered:
                    findings.append(AuditFinding(
                        rule="R3", code="PlaceholderCode", severity="error",
                        message=f"{path.name} reports metrics but contains "
                                f"{marker!r}"))
                    break

    # R4: metrics without any shell execution in the recorded tool history
    if records and not any(h.get("tool") == "Bash" for h in tool_history):
        findings.append(AuditFinding(
            rule="R4", code="MockImplementation", severity="error",
            message="journal has records but no Bash execution was recorded"))

    # R5: suspiciously flat series
    for name, recs in sorted(by_name.items()):
        finite = [r.value for r in recs if math.isfinite(r.value)]
        if len(finite) >= CONSTANT_MIN_RECORDS and len(set(finite)) == 1:
            findings.append(AuditFinding(
                rule="R5", code="ConstantMetric", severity="warning",
                metric=name,
                message=f"{name} repeats {finite[0]!r} across "
                        f"{len(finite)} records with zero variance"))

    return findings


def nonfinite_findings(records: list[MetricRecord]) -> list[AuditFinding]:
    """One finding per NaN/Inf record; finite-only journals produce none."""
    out: list[AuditFinding] = []
    for rec in records:
        if not math.isfinite(rec.value):
            out.append(AuditFinding(
                rule="NF", code="NonFiniteMetric", severity="error",
                metric=rec.name,
                message=f"record {rec.seq}: {rec.name}={rec.value!r}"))
    return out
