"""Subprocess drivers shared by the integration and acceptance tests."""

from __future__ import annotations

import signal
import subprocess
import sys
import textwrap
import time
from pathlib import Path

SRC = str(Path(__file__).resolve().parents[1] / "src")

# Runs a project up to the middle of the Coding stage, prints MID_CODING,
# then stalls so the caller can SIGKILL it. Used to prove resume correctness.
KILL_DRIVER = """
import sys
sys.path.insert(0, {src!r})
from labengine import LabConfig, ProjectEngine
from labengine.model import EventKind

engine = ProjectEngine({home!r}, LabConfig(
    experiment_time_budget_seconds=60.0, grace_seconds=2.0))

class Tripwire:
    # report readiness the moment Coding work starts, then stall so the
    # parent can kill us mid-stage
    def __init__(self, log):
        self.log = log
    def append(self, kind, stage=None, payload=None, artifact_refs=None):
        rec = self._orig(kind, stage=stage, payload=payload,
                         artifact_refs=artifact_refs)
        if kind == EventKind.TOOL_EXECUTED and payload.get("step_id") == "coding:smoke":
            print("MID_CODING", flush=True)
            import time
            time.sleep(30)
        return rec

pid = engine.create_project("kill resilience", "Explore", project_id={pid!r})
orig_open = engine.open_log
def patched(project_id, writer=False):
    log = orig_open(project_id, writer)
    tw = Tripwire(log)
    tw._orig = log.append
    log.append = tw.append
    return log
engine.open_log = patched
engine.run_project(pid)
"""


def kill_mid_coding(home, tmp_path, project_id="victim", timeout_s=60.0) -> bool:
    """Start a project run in a child process and SIGKILL it in the middle
    of the Coding stage. Returns True when the kill landed mid-stage."""
    driver = Path(tmp_path) / "kill_driver.py"
    driver.write_text(textwrap.dedent(KILL_DRIVER.format(
        src=SRC, home=str(home), pid=project_id)))
    proc = subprocess.Popen([sys.executable, str(driver)],
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
                            text=True)
    deadline = time.monotonic() + timeout_s
    saw = False
    while time.monotonic() < deadline:
        line = proc.stdout.readline()
        if "MID_CODING" in line:
            saw = True
            break
        if proc.poll() is not None:
            break
    proc.send_signal(signal.SIGKILL)
    proc.wait(timeout=10)
    return saw
