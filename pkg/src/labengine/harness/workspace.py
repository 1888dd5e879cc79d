"""Per-project execution workspace.

Layout under one root directory:

    work/      experiment code; cwd for every shell command
    mounts/    symlinks to approved external directories
    journal/   metric journals written by the run controller
    results/   final_results.json
    runs/      captured stdout/stderr per launch

File tools may only touch paths that resolve inside the workspace root or
inside an approved mount target. Resolution follows symlinks before the
containment check, so a link planted inside work/ cannot smuggle a write
outside. Read-only mounts refuse writes with PermissionError, which the
tool layer reports as a failed outcome; an actual escape attempt is a
contract violation and raises PathEscape.
"""

from __future__ import annotations

import threading
from pathlib import Path

from ..errors import MountMissing, PathEscape


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root).resolve()
        self.work_dir = self.root / "work"
        self.mounts_dir = self.root / "mounts"
        self.journal_dir = self.root / "journal"
        self.results_dir = self.root / "results"
        self.runs_dir = self.root / "runs"
        for d in (self.work_dir, self.mounts_dir, self.journal_dir,
                  self.results_dir, self.runs_dir):
            d.mkdir(parents=True, exist_ok=True)
        # name -> (resolved target, writable)
        self.mounts: dict[str, tuple[Path, bool]] = {}
        # one tool or run at a time; rollback checks this via busy()
        self._lock = threading.Lock()

    # -- mounts -----------------------------------------------------------------

    def add_mount(self, name: str, target: str | Path, writable: bool = False) -> Path:
        target = Path(target).resolve()
        if not target.is_dir():
            raise MountMissing(f"mount target {target} is not a directory")
        link = self.mounts_dir / name
        if link.is_symlink() or link.exists():
            link.unlink()
        link.symlink_to(target)
        self.mounts[name] = (target, writable)
        return link

    # -- path discipline ----------------------------------------------------------

    def resolve(self, path: str | Path, for_write: bool = False) -> Path:
        p = Path(path)
        if not p.is_absolute():
            p = self.work_dir / p
        rp = p.resolve()
        if rp == self.root or self.root in rp.parents:
            return rp
        for name, (target, writable) in self.mounts.items():
            if rp == target or target in rp.parents:
                if for_write and not writable:
                    raise PermissionError(f"mount {name!r} is read-only")
                return rp
        raise PathEscape(f"{path} resolves outside the workspace")

    # -- exclusivity ----------------------------------------------------------------

    def acquire(self) -> None:
        if not self._lock.acquire(blocking=False):
            from ..errors import WorkspaceBusy
            raise WorkspaceBusy("another tool or run is in flight")

    def release(self) -> None:
        self._lock.release()

    def busy(self) -> bool:
        return self._lock.locked()
