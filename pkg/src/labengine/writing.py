"""Manuscript assembly and numeric claim verification.

A manuscript is markdown with a small front matter header. The header's
`rounding` key declares how prose may round numbers and must come from the
whitelist (`2dp` = two decimal places, `4sf` = four significant figures).

All result numbers enter the document through fenced ``metrics-table``
blocks whose rows are

    name | value | journal_ref

and those blocks are built mechanically from run results, never written by
a text backend. Verification re-derives every claim: a table cell resolves
when some record of the same name in the referenced journal matches the
claimed value exactly (tolerance 1e-9) or after the declared rounding.
Prose claims of the form `name = number` inside Results sections are held
to the same standard; loose numbers elsewhere are only warnings since prose
legitimately contains years, counts and section numbers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import MissingCell, UnparseableManuscript
from .harness.journal import MetricRecord, records_by_name
from .model import Mode

ROUNDING_MODES = ("2dp", "4sf")
CLAIM_TOLERANCE = 1e-9

# every manuscript carries these, whatever the mode
CORE_SECTIONS = ("Introduction", "Method", "Experiments", "Results")

_NUM = r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?"
_PROSE_CLAIM_RE = re.compile(rf"([A-Za-z_][\w./-]*)\s*=\s*({_NUM})")
_NUM_RE = re.compile(_NUM)
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*$")


def round_value(value: float, mode: str) -> float:
    if mode == "2dp":
        return round(value, 2)
    if mode == "4sf":
        if value == 0 or not math.isfinite(value):
            return value
        return float(f"{value:.4g}")
    raise UnparseableManuscript(f"unknown rounding mode {mode!r}")


def claim_resolves(claimed: float, observed: float, mode: str) -> bool:
    if abs(claimed - observed) <= CLAIM_TOLERANCE:
        return True
    return abs(claimed - round_value(observed, mode)) <= CLAIM_TOLERANCE


# -- outline ----------------------------------------------------------------------


@dataclass(frozen=True)
class OutlineSection:
    title: str
    intent: str
    media: tuple[str, ...] = ()

    def to_doc(self) -> dict:
        return {"title": self.title, "intent": self.intent,
                "media": list(self.media)}


@dataclass(frozen=True)
class Outline:
    mode: str
    sections: tuple[OutlineSection, ...]

    def titles(self) -> list[str]:
        return [s.title for s in self.sections]

    def to_doc(self) -> dict:
        return {"mode": self.mode, "sections": [s.to_doc() for s in self.sections]}


def build_outline(mode: Mode) -> Outline:
    """Deterministic section skeleton per mode. Every outline carries the
    core sections; Reproduce adds the target descriptor and a gap analysis,
    Discussion adds a section for the synthesized debate."""
    mode = Mode(mode)
    sections = [
        OutlineSection("Introduction", "motivate the question", ()),
        OutlineSection("Method", "describe the approach", ()),
        OutlineSection("Experiments", "describe the runs and budget", ()),
        OutlineSection("Results", "report journal-backed measurements",
                       ("metrics-table", "figure")),
    ]
    if mode is Mode.REPRODUCE:
        sections.insert(1, OutlineSection(
            "Reproduction Target", "pin the claim being reproduced", ()))
        sections.append(OutlineSection(
            "Gaps", "list deviations from the target setup", ()))
    elif mode is Mode.DISCUSSION:
        sections.append(OutlineSection(
            "Discussion", "synthesize the debate positions", ()))
    return Outline(mode=mode.value, sections=tuple(sections))


# -- document model ----------------------------------------------------------------


@dataclass(frozen=True)
class TableClaim:
    name: str
    value: float
    journal_ref: str
    line: int


@dataclass(frozen=True)
class ProseClaim:
    name: str
    value: float
    section: str
    line: int


@dataclass
class Manuscript:
    front: dict[str, str]
    body: str
    table_claims: list[TableClaim] = field(default_factory=list)
    prose_claims: list[ProseClaim] = field(default_factory=list)
    loose_numbers: list[tuple[int, str]] = field(default_factory=list)
    figure_refs: list[str] = field(default_factory=list)

    @property
    def rounding(self) -> str:
        return self.front["rounding"]


_FIGURE_REF_RE = re.compile(r"!\[[^\]]*\]\(artifact:([0-9a-f]{64})\)")


def parse_manuscript(text: str) -> Manuscript:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "---":
        raise UnparseableManuscript("missing front matter delimiter")
    front: dict[str, str] = {}
    idx = 1
    while idx < len(lines) and lines[idx].strip() != "---":
        line = lines[idx].strip()
        if line:
            key, sep, value = line.partition(":")
            if not sep:
                raise UnparseableManuscript(f"bad front matter line: {line!r}")
            front[key.strip()] = value.strip()
        idx += 1
    if idx >= len(lines):
        raise UnparseableManuscript("unterminated front matter")
    mode = front.get("rounding")
    if mode not in ROUNDING_MODES:
        raise UnparseableManuscript(
            f"rounding mode {mode!r} not in whitelist {ROUNDING_MODES}")

    body_lines = lines[idx + 1:]
    doc = Manuscript(front=front, body="\n".join(body_lines))

    section = ""
    in_results = False
    fence: str | None = None  # info string of the open fence, or None
    for offset, line in enumerate(body_lines):
        lineno = idx + 2 + offset
        stripped = line.strip()
        if stripped.startswith("```"):
            if fence is None:
                fence = stripped[3:].strip()
            else:
                fence = None
            continue
        if fence == "metrics-table":
            if not stripped or stripped.startswith("#"):
                continue
            parts = [p.strip() for p in stripped.split("|")]
            if len(parts) != 3:
                raise UnparseableManuscript(
                    f"line {lineno}: metrics-table rows need 3 cells")
            name, value_str, ref = parts
            try:
                value = float(value_str)
            except ValueError:
                raise UnparseableManuscript(
                    f"line {lineno}: bad table value {value_str!r}")
            doc.table_claims.append(TableClaim(name, value, ref, lineno))
            continue
        if fence is not None:
            continue  # other code blocks are opaque
        heading = _HEADING_RE.match(line)
        if heading:
            section = heading.group(2)
            in_results = section.lower().startswith("results")
            continue
        doc.figure_refs.extend(_FIGURE_REF_RE.findall(line))
        scrubbed = _FIGURE_REF_RE.sub("", line)
        claimed_spans: list[tuple[int, int]] = []
        if in_results:
            for m in _PROSE_CLAIM_RE.finditer(scrubbed):
                doc.prose_claims.append(ProseClaim(
                    m.group(1), float(m.group(2)), section, lineno))
                claimed_spans.append(m.span(2))
        for m in _NUM_RE.finditer(scrubbed):
            if any(s <= m.start() and m.end() <= e for s, e in claimed_spans):
                continue
            doc.loose_numbers.append((lineno, m.group(0)))
    return doc


# -- assembly ---------------------------------------------------------------------


def build_metrics_table(final_results: dict[str, float], journal_ref: str,
                        records: list[MetricRecord]) -> str:
    """Mechanical table from a run's declared results. Every value must be
    backed by a journal record of the same name or the table refuses to
    include it; writing never launders an unbacked number into the text."""
    by_name = records_by_name(records)
    rows = []
    for name in sorted(final_results):
        value = final_results[name]
        backing = by_name.get(name, [])
        if not any(abs(value - r.value) <= CLAIM_TOLERANCE for r in backing
                   if math.isfinite(r.value) and math.isfinite(value)):
            raise MissingCell(f"{name}={value!r} has no backing journal record")
        rows.append(f"{name} | {value!r} | {journal_ref}")
    return "```metrics-table\n" + "\n".join(rows) + "\n```"


def _outline_for(mode: str) -> Outline:
    try:
        return build_outline(Mode(mode))
    except ValueError:
        for m in Mode:
            if m.value.lower() == str(mode).lower():
                return build_outline(m)
    # unknown mode strings still get the core skeleton
    return Outline(mode=str(mode), sections=build_outline(Mode.EXPLORE).sections)


def assemble_manuscript(title: str, mode: str, sections: dict[str, str],
                        final_results: dict[str, float], journal_ref: str,
                        records: list[MetricRecord], figure_refs: Iterable[str] = (),
                        rounding: str = "2dp",
                        outline: Outline | None = None) -> str:
    """Render the manuscript along the outline. Section prose comes from
    `sections`; the Results section additionally gets the summary line, the
    mechanical metrics table, and the figure references. Provided sections
    whose heading is not in the outline are appended after it rather than
    dropped."""
    if rounding not in ROUNDING_MODES:
        raise UnparseableManuscript(f"rounding mode {rounding!r} not allowed")
    outline = outline or _outline_for(mode)
    parts = [
        "---",
        f"title: {title}",
        f"mode: {mode}",
        f"rounding: {rounding}",
        "---",
        "",
        f"# {title}",
    ]

    def emit_section(heading: str) -> None:
        parts.extend(["", f"## {heading}", ""])
        if sections.get(heading):
            parts.append(sections[heading])
        if heading != "Results":
            return
        if sections.get(heading):
            parts.append("")
        summary_bits = [f"{name} = {round_value(value, rounding)}"
                        for name, value in sorted(final_results.items())]
        if summary_bits:
            parts.append("Final measurements: " + ", ".join(summary_bits) + ".")
            parts.append("")
        parts.append(build_metrics_table(final_results, journal_ref, records))
        for ref in figure_refs:
            parts.extend(["", f"![metric summary](artifact:{ref})"])

    titles = outline.titles()
    for heading in titles:
        emit_section(heading)
    for heading in sections:
        if heading not in titles:
            emit_section(heading)
    return "\n".join(parts) + "\n"


# -- verification ------------------------------------------------------------------


@dataclass
class VerificationReport:
    resolved: list[TableClaim | ProseClaim] = field(default_factory=list)
    unresolved: list[dict] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.unresolved

    def to_doc(self) -> dict:
        return {
            "ok": self.ok,
            "resolved": len(self.resolved),
            "unresolved": self.unresolved,
            "warnings": self.warnings,
        }


def verify_manuscript(text: str,
                      load_journal: Callable[[str], list[MetricRecord]]) -> VerificationReport:
    """Re-derive every numeric claim. `load_journal` maps a journal_ref to
    its parsed records; it is called once per distinct ref."""
    doc = parse_manuscript(text)
    mode = doc.rounding
    report = VerificationReport()

    journals: dict[str, list[MetricRecord]] = {}

    def records_for(ref: str) -> list[MetricRecord] | None:
        if ref not in journals:
            try:
                journals[ref] = load_journal(ref)
            except Exception as exc:
                report.unresolved.append({
                    "kind": "missing_journal", "ref": ref, "detail": str(exc)})
                journals[ref] = []
                return None
        return journals[ref]

    for claim in doc.table_claims:
        recs = records_for(claim.journal_ref)
        if recs is None:
            continue
        matching = [r for r in recs if r.name == claim.name]
        if any(claim_resolves(claim.value, r.value, mode) for r in matching):
            report.resolved.append(claim)
        else:
            report.unresolved.append({
                "kind": "table_cell", "name": claim.name, "value": claim.value,
                "ref": claim.journal_ref, "line": claim.line,
            })

    all_records: list[MetricRecord] = []
    for claim in doc.table_claims:
        ref_records = journals.get(claim.journal_ref)
        if ref_records:
            all_records.extend(ref_records)
    by_name = records_by_name(all_records)

    for claim in doc.prose_claims:
        candidates = by_name.get(claim.name, [])
        if any(claim_resolves(claim.value, r.value, mode) for r in candidates):
            report.resolved.append(claim)
        else:
            report.unresolved.append({
                "kind": "prose_claim", "name": claim.name, "value": claim.value,
                "section": claim.section, "line": claim.line,
            })

    for lineno, token in doc.loose_numbers:
        report.warnings.append({"kind": "loose_number", "line": lineno,
                                "token": token})
    return report
