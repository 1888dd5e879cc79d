"""Content-addressed artifact store with lineage.

Artifact ids are the sha256 of the content, so identical bytes land on the
same object regardless of who produced them. Lineage (parents) lives in a
meta sidecar and is merged on re-put; the graph must stay acyclic. Reads
re-hash the object so on-disk corruption surfaces as CorruptArtifact rather
than as silently wrong bytes downstream.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Callable, Iterable

from .errors import CorruptArtifact, LineageCycle, NotFound, UnknownEvent


class ArtifactStore:
    def __init__(self, root: str | Path,
                 event_probe: Callable[[str, int], bool] | None = None):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        # optional hook: event_probe(project_id, seq) -> bool, lets the store
        # refuse meta that cites a journal event which does not exist
        self.event_probe = event_probe

    # -- paths ----------------------------------------------------------------

    def _object_path(self, artifact_id: str) -> Path:
        return self.root / "objects" / artifact_id[:2] / artifact_id

    def _meta_path(self, artifact_id: str) -> Path:
        return self._object_path(artifact_id).with_name(artifact_id + ".meta.json")

    # -- writes ---------------------------------------------------------------

    def put(self, content: bytes, kind: str, creator: str,
            parents: Iterable[str] = (), source_event: dict | None = None,
            extra: dict | None = None) -> str:
        if not isinstance(content, bytes):
            raise TypeError("artifact content must be bytes")
        artifact_id = hashlib.sha256(content).hexdigest()
        parents = sorted(set(parents))
        for parent in parents:
            if not self._object_path(parent).exists():
                raise NotFound(f"parent artifact {parent} not in store")
            if artifact_id == parent or artifact_id in self._ancestors(parent):
                raise LineageCycle(
                    f"{artifact_id[:12]} would become its own ancestor via {parent[:12]}")
        if source_event is not None and self.event_probe is not None:
            project = source_event.get("project")
            seq = source_event.get("seq")
            if not self.event_probe(project, seq):
                raise UnknownEvent(f"no event {seq} in project {project}")

        obj_path = self._object_path(artifact_id)
        obj_path.parent.mkdir(parents=True, exist_ok=True)
        if not obj_path.exists():
            self._atomic_write(obj_path, content)

        meta_path = self._meta_path(artifact_id)
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            merged = sorted(set(meta.get("parents", [])) | set(parents))
            meta["parents"] = merged
        else:
            meta = {
                "id": artifact_id,
                "kind": kind,
                "creator": creator,
                "parents": list(parents),
                "size": len(content),
            }
            if source_event is not None:
                meta["source_event"] = source_event
            if extra:
                meta.update(extra)
        self._atomic_write(meta_path, json.dumps(meta, sort_keys=True).encode())
        return artifact_id

    def _atomic_write(self, path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            os.write(fd, data)
            os.fsync(fd)
        finally:
            os.close(fd)
        os.replace(tmp, path)

    # -- reads ----------------------------------------------------------------

    def exists(self, artifact_id: str) -> bool:
        return self._object_path(artifact_id).exists()

    def get(self, artifact_id: str) -> bytes:
        path = self._object_path(artifact_id)
        if not path.exists():
            raise NotFound(f"artifact {artifact_id} not in store")
        content = path.read_bytes()
        if hashlib.sha256(content).hexdigest() != artifact_id:
            raise CorruptArtifact(f"artifact {artifact_id} fails hash verification")
        return content

    def meta(self, artifact_id: str) -> dict:
        path = self._meta_path(artifact_id)
        if not path.exists():
            raise NotFound(f"artifact {artifact_id} has no metadata")
        return json.loads(path.read_text(encoding="utf-8"))

    def _ancestors(self, artifact_id: str) -> set[str]:
        seen: set[str] = set()
        frontier = [artifact_id]
        while frontier:
            current = frontier.pop()
            meta_path = self._meta_path(current)
            if not meta_path.exists():
                continue
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            for parent in meta.get("parents", []):
                if parent not in seen:
                    seen.add(parent)
                    frontier.append(parent)
        return seen

    def lineage(self, artifact_id: str) -> list[str]:
        """Transitive ancestor set, sorted for stable output."""
        if not self.exists(artifact_id):
            raise NotFound(f"artifact {artifact_id} not in store")
        return sorted(self._ancestors(artifact_id))
