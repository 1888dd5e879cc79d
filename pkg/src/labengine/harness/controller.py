"""Injected run controller.

`install_controller` drops a standalone, stdlib-only module into the
workspace's work directory and chmods it read-only. Experiment scripts
import it to report metrics and final results; the engine records its
sha256 at install time and refuses to ingest journals if the file changed,
since a tampered controller means the journal's provenance is gone.
"""

from __future__ import annotations

import hashlib
import os
import stat
from pathlib import Path

from ..errors import ControllerTampered

CONTROLLER_FILENAME = "lab_controller.py"

CONTROLLER_SOURCE = '''\
"""Run controller for experiment scripts. Installed read-only by the lab
harness; do not modify.

Usage from an experiment script:

    import lab_controller as lab

    lab.report_metric("loss", 0.42, step=10)
    ...
    lab.finalize({"loss": 0.31, "accuracy": 0.88})

Metrics stream to the journal named by LAB_METRIC_JOURNAL, one
checksummed line per call, flushed immediately so a killed run keeps
everything reported so far. finalize() writes the results document named
by LAB_FINAL_RESULTS atomically. LAB_DEADLINE_TS, when set, is the unix
time after which the harness will stop the run; poll remaining_seconds()
or should_stop() to wind down cleanly before that.
"""

import hashlib
import json
import os
import time

_seq = 0
_fh = None


def _journal_path():
    path = os.environ.get("LAB_METRIC_JOURNAL")
    if not path:
        raise RuntimeError("LAB_METRIC_JOURNAL is not set")
    return path


def report_metric(name, value, step=None):
    """Append one metric observation to the journal."""
    global _seq, _fh
    name = str(name)
    if "|" in name or "\\n" in name:
        raise ValueError("metric name may not contain '|' or newline")
    _seq += 1
    value_str = "%.17e" % float(value)
    step_str = "" if step is None else str(int(step))
    ts = "%.6f" % time.time()
    prefix = "%d|%s|%s|%s|%s" % (_seq, name, value_str, step_str, ts)
    checksum = hashlib.sha256(prefix.encode("utf-8")).hexdigest()[:16]
    if _fh is None:
        _fh = open(_journal_path(), "a")
    _fh.write(prefix + "|" + checksum + "\\n")
    _fh.flush()


def finalize(results):
    """Declare the run's final results. Values must be numbers already
    reported to the journal; the audit cross-checks that."""
    path = os.environ.get("LAB_FINAL_RESULTS")
    if not path:
        raise RuntimeError("LAB_FINAL_RESULTS is not set")
    doc = {"final_results": {str(k): float(v) for k, v in dict(results).items()}}
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    if _fh is not None:
        _fh.flush()


def remaining_seconds():
    deadline = float(os.environ.get("LAB_DEADLINE_TS", "0") or 0.0)
    if not deadline:
        return float("inf")
    return deadline - time.time()


def should_stop(margin=0.0):
    return remaining_seconds() <= margin


def is_smoke():
    return os.environ.get("SMOKE") == "1"
'''


def controller_sha() -> str:
    return hashlib.sha256(CONTROLLER_SOURCE.encode("utf-8")).hexdigest()


def install_controller(work_dir: str | Path) -> tuple[Path, str]:
    path = Path(work_dir) / CONTROLLER_FILENAME
    if path.exists():
        verify_controller(path)
    else:
        path.write_text(CONTROLLER_SOURCE, encoding="utf-8")
        path.chmod(stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
    return path, controller_sha()


def verify_controller(path: str | Path, expected_sha: str | None = None) -> None:
    path = Path(path)
    expected = expected_sha or controller_sha()
    if not path.exists():
        raise ControllerTampered(f"{path} is missing")
    actual = hashlib.sha256(path.read_bytes()).hexdigest()
    if actual != expected:
        raise ControllerTampered(f"{path} does not match the installed controller")
