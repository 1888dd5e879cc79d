"""Metric journal format and parsing.

One record per line:

    seq|name|value|step|ts|checksum

seq counts from 1 with no gaps, value is printed with %.17e (so nan, inf
and -inf appear as those literals and finite values round-trip exactly),
step may be empty, ts is a unix timestamp, and checksum is the first 16 hex
chars of sha256 over everything before the final separator. A complete line
that fails any of these checks is CorruptJournal. A partial trailing line
without a newline is dropped: the writer may have been killed mid-write and
losing the in-flight record is the correct reading of the journal.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import CorruptJournal

CHECKSUM_HEX_CHARS = 16


@dataclass(frozen=True)
class MetricRecord:
    seq: int
    name: str
    value: float
    step: int | None
    ts: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def line_checksum(prefix: str) -> str:
    return hashlib.sha256(prefix.encode("utf-8")).hexdigest()[:CHECKSUM_HEX_CHARS]


def format_record(seq: int, name: str, value: float, step: int | None,
                  ts: float) -> str:
    value_str = "%.17e" % float(value)
    step_str = "" if step is None else str(int(step))
    prefix = f"{seq}|{name}|{value_str}|{step_str}|{ts:.6f}"
    return prefix + "|" + line_checksum(prefix)


def parse_metric_text(raw: str, origin: str = "journal") -> list[MetricRecord]:
    if raw and not raw.endswith("\n"):
        raw = raw[:raw.rfind("\n") + 1] if "\n" in raw else ""
    records: list[MetricRecord] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line:
            continue
        prefix, sep, checksum = line.rpartition("|")
        if not sep or line_checksum(prefix) != checksum:
            raise CorruptJournal(f"{origin}: checksum mismatch at line {lineno}")
        parts = prefix.split("|")
        if len(parts) != 5:
            raise CorruptJournal(f"{origin}: malformed record at line {lineno}")
        seq_str, name, value_str, step_str, ts_str = parts
        try:
            rec = MetricRecord(
                seq=int(seq_str),
                name=name,
                value=float(value_str),
                step=int(step_str) if step_str else None,
                ts=float(ts_str),
            )
        except ValueError as exc:
            raise CorruptJournal(f"{origin}: unparseable field at line {lineno}: {exc}")
        if rec.seq != len(records) + 1:
            raise CorruptJournal(
                f"{origin}: seq gap at line {lineno}: expected "
                f"{len(records) + 1}, found {rec.seq}")
        records.append(rec)
    return records


def parse_metric_journal(path: str | Path) -> list[MetricRecord]:
    path = Path(path)
    if not path.exists():
        raise CorruptJournal(f"metric journal missing: {path}")
    return parse_metric_text(path.read_text(encoding="utf-8"), origin=str(path))


def records_by_name(records: list[MetricRecord]) -> dict[str, list[MetricRecord]]:
    out: dict[str, list[MetricRecord]] = {}
    for rec in records:
        out.setdefault(rec.name, []).append(rec)
    return out
