"""Experiment launcher.

Commands run through `sh -c` in their own session (process group) with the
controller env wired up. At the time budget the whole group gets SIGTERM,
then SIGKILL after a short grace window, so a stuck child cannot outlive
its slot. A timed-out run is not an error state: its journal is parsed and
preserved, the outcome is just PartialTimedOut instead of Finalized.

Outcome classification: a run is Finalized only when it exits 0 AND wrote
the final results document. Exit 0 without finalize() means the script
never declared results and is treated as Crashed rather than guessed at.
"""

from __future__ import annotations

import json
import os
import signal
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..errors import CorruptJournal
from .controller import install_controller, verify_controller
from .journal import MetricRecord, parse_metric_journal
from .workspace import Workspace


class RunOutcome(str, Enum):
    FINALIZED = "Finalized"
    PARTIAL_TIMED_OUT = "PartialTimedOut"
    CRASHED = "Crashed"


@dataclass
class RunResult:
    run_id: str
    outcome: RunOutcome
    exit_code: int | None
    timed_out: bool
    duration_s: float
    command: str
    journal_path: Path
    results_path: Path
    stdout_path: Path
    stderr_path: Path
    controller_sha: str
    records: list[MetricRecord] = field(default_factory=list)
    final_results: dict[str, float] | None = None

    @property
    def finalized(self) -> bool:
        return self.outcome is RunOutcome.FINALIZED


def _next_run_id(ws: Workspace, prefix: str) -> str:
    n = 1 + sum(1 for _ in ws.journal_dir.glob(f"{prefix}-*.metrics"))
    return f"{prefix}-{n:04d}"


def run_experiment(ws: Workspace, command: str, time_budget_s: float,
                   grace_s: float = 5.0, extra_env: dict | None = None,
                   smoke: bool = False) -> RunResult:
    controller_path, controller_sha = install_controller(ws.work_dir)
    run_id = _next_run_id(ws, "smoke" if smoke else "run")
    journal_path = ws.journal_dir / f"{run_id}.metrics"
    results_path = ws.results_dir / f"{run_id}-results.json"
    stdout_path = ws.runs_dir / f"{run_id}.out"
    stderr_path = ws.runs_dir / f"{run_id}.err"
    journal_path.touch()

    start = time.monotonic()
    deadline = time.time() + time_budget_s
    env = os.environ.copy()
    env["LAB_METRIC_JOURNAL"] = str(journal_path)
    env["LAB_FINAL_RESULTS"] = str(results_path)
    env["LAB_DEADLINE_TS"] = f"{deadline:.6f}"
    if smoke:
        env["SMOKE"] = "1"
    if extra_env:
        env.update(extra_env)

    ws.acquire()
    timed_out = False
    try:
        with open(stdout_path, "wb") as out_fh, open(stderr_path, "wb") as err_fh:
            proc = subprocess.Popen(
                ["sh", "-c", command],
                cwd=ws.work_dir,
                env=env,
                stdout=out_fh,
                stderr=err_fh,
                start_new_session=True,
            )
            try:
                exit_code = proc.wait(timeout=time_budget_s)
            except subprocess.TimeoutExpired:
                timed_out = True
                _signal_group(proc.pid, signal.SIGTERM)
                try:
                    exit_code = proc.wait(timeout=grace_s)
                except subprocess.TimeoutExpired:
                    _signal_group(proc.pid, signal.SIGKILL)
                    exit_code = proc.wait()
    finally:
        ws.release()
    duration = time.monotonic() - start

    # provenance gate: never ingest a journal past a modified controller
    verify_controller(controller_path, controller_sha)
    records = parse_metric_journal(journal_path)

    final_results = None
    if results_path.exists():
        try:
            doc = json.loads(results_path.read_text(encoding="utf-8"))
            final_results = {str(k): float(v)
                             for k, v in doc["final_results"].items()}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptJournal(f"unreadable final results {results_path}: {exc}")

    if timed_out:
        outcome = RunOutcome.PARTIAL_TIMED_OUT
    elif exit_code == 0 and final_results is not None:
        outcome = RunOutcome.FINALIZED
    else:
        outcome = RunOutcome.CRASHED

    return RunResult(
        run_id=run_id,
        outcome=outcome,
        exit_code=exit_code,
        timed_out=timed_out,
        duration_s=duration,
        command=command,
        journal_path=journal_path,
        results_path=results_path,
        stdout_path=stdout_path,
        stderr_path=stderr_path,
        controller_sha=controller_sha,
        records=records,
        final_results=final_results,
    )


def _signal_group(pid: int, sig: int) -> None:
    try:
        os.killpg(pid, sig)
    except ProcessLookupError:
        pass


@dataclass
class SmokeResult:
    passed: bool
    run: RunResult


def smoke_test(ws: Workspace, command: str, time_budget_s: float = 120.0,
               grace_s: float = 5.0, extra_env: dict | None = None) -> SmokeResult:
    """Reduced rehearsal before the real run: SMOKE=1 in the environment,
    `--smoke` appended to the command, metrics to a separate smoke journal.
    Passing requires a clean exit and at least one reported metric."""
    run = run_experiment(ws, command + " --smoke", time_budget_s,
                         grace_s=grace_s, extra_env=extra_env, smoke=True)
    passed = run.exit_code == 0 and not run.timed_out and len(run.records) >= 1
    return SmokeResult(passed=passed, run=run)
