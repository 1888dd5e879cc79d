"""The six agent-facing tools.

Exactly these are exposed: Bash, ReadFile, WriteFile, EditFile, GlobSearch,
GrepSearch. Two failure modes are kept apart on purpose: ordinary tool
failures (missing file, nonzero exit, ambiguous edit) come back as a failed
ToolOutcome the agent can react to, while contract violations (denied
command, path escape, concurrent use) raise and abort the step.
"""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field

from ..errors import DeniedCommand
from .workspace import Workspace

TOOL_NAMES = ("Bash", "ReadFile", "WriteFile", "EditFile", "GlobSearch", "GrepSearch")

# network clients, package managers, privilege escalation
DENYLIST = {
    "curl", "wget", "ssh", "scp", "sftp", "rsync", "nc", "ncat", "netcat",
    "telnet", "ftp", "pip", "pip3", "conda", "apt", "apt-get", "dpkg", "yum",
    "dnf", "brew", "npm", "npx", "yarn", "sudo", "su", "shutdown", "reboot",
    "mkfs", "mount", "umount",
}

MAX_READ_BYTES = 256_000
MAX_GREP_MATCHES = 200
MAX_FILE_SCAN_BYTES = 1_000_000


@dataclass(frozen=True)
class ToolOutcome:
    tool: str
    ok: bool
    output: str = ""
    error: str = ""
    meta: dict = field(default_factory=dict)


def check_command(command: str) -> None:
    """Reject commands whose tokens hit the denylist. shlex-level scan: we
    check every token, not just the first, so pipelines and `env X=1 curl`
    tricks are covered too."""
    try:
        tokens = shlex.split(command)
    except ValueError as exc:
        raise DeniedCommand(f"unparseable command: {exc}")
    for token in tokens:
        name = token.rsplit("/", 1)[-1]
        if name in DENYLIST:
            raise DeniedCommand(f"command uses denied program {name!r}")


class ToolKit:
    def __init__(self, workspace: Workspace):
        self.ws = workspace

    def _guard(self):
        self.ws.acquire()

    # -- Bash ---------------------------------------------------------------------

    def bash(self, command: str, timeout_s: float = 120.0) -> ToolOutcome:
        check_command(command)
        self._guard()
        try:
            proc = subprocess.run(
                ["sh", "-c", command],
                cwd=self.ws.work_dir,
                capture_output=True,
                text=True,
                timeout=timeout_s,
            )
        except subprocess.TimeoutExpired:
            return ToolOutcome("Bash", ok=False, error=f"timed out after {timeout_s}s",
                               meta={"command": command})
        finally:
            self.ws.release()
        return ToolOutcome(
            "Bash",
            ok=proc.returncode == 0,
            output=proc.stdout[-MAX_READ_BYTES:],
            error=proc.stderr[-MAX_READ_BYTES:],
            meta={"command": command, "exit_code": proc.returncode},
        )

    # -- file tools ------------------------------------------------------------------

    def read_file(self, path: str) -> ToolOutcome:
        self._guard()
        try:
            rp = self.ws.resolve(path)
            if not rp.is_file():
                return ToolOutcome("ReadFile", ok=False, error=f"{path}: not a file")
            data = rp.read_bytes()[:MAX_READ_BYTES]
            return ToolOutcome("ReadFile", ok=True,
                               output=data.decode("utf-8", errors="replace"),
                               meta={"path": str(rp)})
        finally:
            self.ws.release()

    def write_file(self, path: str, content: str) -> ToolOutcome:
        self._guard()
        try:
            try:
                rp = self.ws.resolve(path, for_write=True)
            except PermissionError as exc:
                return ToolOutcome("WriteFile", ok=False, error=str(exc))
            rp.parent.mkdir(parents=True, exist_ok=True)
            rp.write_text(content, encoding="utf-8")
            return ToolOutcome("WriteFile", ok=True, meta={"path": str(rp),
                                                           "bytes": len(content)})
        finally:
            self.ws.release()

    def edit_file(self, path: str, old_text: str, new_text: str) -> ToolOutcome:
        if not old_text:
            return ToolOutcome("EditFile", ok=False, error="old_text is empty")
        self._guard()
        try:
            try:
                rp = self.ws.resolve(path, for_write=True)
            except PermissionError as exc:
                return ToolOutcome("EditFile", ok=False, error=str(exc))
            if not rp.is_file():
                return ToolOutcome("EditFile", ok=False, error=f"{path}: not a file")
            text = rp.read_text(encoding="utf-8")
            count = text.count(old_text)
            if count == 0:
                return ToolOutcome("EditFile", ok=False,
                                   error="old_text not found in file")
            if count > 1:
                return ToolOutcome("EditFile", ok=False,
                                   error=f"old_text matches {count} times; must be unique")
            rp.write_text(text.replace(old_text, new_text, 1), encoding="utf-8")
            return ToolOutcome("EditFile", ok=True, meta={"path": str(rp)})
        finally:
            self.ws.release()

    # -- search tools ------------------------------------------------------------------

    def glob_search(self, pattern: str) -> ToolOutcome:
        self._guard()
        try:
            matches = sorted(
                str(p.relative_to(self.ws.work_dir))
                for p in self.ws.work_dir.glob(pattern) if p.is_file()
            )
            return ToolOutcome("GlobSearch", ok=True, output="\n".join(matches),
                               meta={"count": len(matches)})
        except (ValueError, NotImplementedError) as exc:
            return ToolOutcome("GlobSearch", ok=False, error=str(exc))
        finally:
            self.ws.release()

    def grep_search(self, pattern: str, glob: str = "**/*") -> ToolOutcome:
        try:
            rx = re.compile(pattern)
        except re.error as exc:
            return ToolOutcome("GrepSearch", ok=False, error=f"bad pattern: {exc}")
        self._guard()
        try:
            lines: list[str] = []
            for p in sorted(self.ws.work_dir.glob(glob)):
                if not p.is_file() or p.stat().st_size > MAX_FILE_SCAN_BYTES:
                    continue
                try:
                    text = p.read_text(encoding="utf-8", errors="ignore")
                except OSError:
                    continue
                rel = p.relative_to(self.ws.work_dir)
                for lineno, line in enumerate(text.splitlines(), start=1):
                    if rx.search(line):
                        lines.append(f"{rel}:{lineno}:{line}")
                        if len(lines) >= MAX_GREP_MATCHES:
                            break
                if len(lines) >= MAX_GREP_MATCHES:
                    break
            return ToolOutcome("GrepSearch", ok=True, output="\n".join(lines),
                               meta={"count": len(lines)})
        finally:
            self.ws.release()

    # dispatch by public tool name, used by the engine when executing plan steps
    def run(self, tool: str, **kwargs) -> ToolOutcome:
        handlers = {
            "Bash": self.bash,
            "ReadFile": self.read_file,
            "WriteFile": self.write_file,
            "EditFile": self.edit_file,
            "GlobSearch": self.glob_search,
            "GrepSearch": self.grep_search,
        }
        if tool not in handlers:
            raise ValueError(f"unknown tool {tool!r}")
        return handlers[tool](**kwargs)
