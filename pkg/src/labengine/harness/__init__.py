"""Sandboxed execution harness: workspace isolation, the six file/shell
tools, the injected run controller, experiment runner, and result audits."""

from .workspace import Workspace
from .tools import ToolKit, ToolOutcome, TOOL_NAMES
from .journal import MetricRecord, parse_metric_journal
from .runner import RunOutcome, RunResult, run_experiment, smoke_test
from .controller import CONTROLLER_FILENAME, install_controller, verify_controller
from .audit import AuditFinding, nonfinite_findings, run_audit

__all__ = [
    "Workspace", "ToolKit", "ToolOutcome", "TOOL_NAMES",
    "MetricRecord", "parse_metric_journal",
    "RunOutcome", "RunResult", "run_experiment", "smoke_test",
    "CONTROLLER_FILENAME", "install_controller", "verify_controller",
    "AuditFinding", "nonfinite_findings", "run_audit",
]
