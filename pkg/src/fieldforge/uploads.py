"""Server side of the resumable chunked upload protocol.

Chunks are strictly offset-serialized: a chunk is accepted only when its
offset equals the session's committed offset, and it is durable (fsync) before
the acknowledgment goes out. The committed offset is derived from the size of
the on-disk part file, so a restarted server resumes exactly where it stopped.

Completion recomputes the SHA-256 of the received bytes; on mismatch the
session is aborted and the client must restart. A digest that is already
stored for the project short-circuits to an immediately-complete session, so
re-captured or re-uploaded media can never double-ingest.

Session state lives under <project>/uploads/<session_id>.json with the bytes
in <session_id>.part.
"""

from __future__ import annotations

import hashlib
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import (
    ChunkTooLarge,
    DigestMismatch,
    Incomplete,
    OffsetMismatch,
    QuotaExceeded,
    RecordInvalid,
    SessionClosed,
    UnknownSession,
)
from .jsoncanon import canonical_json, parse_json
from .manifest import DIGEST_RE
from .registry import ProjectRegistry, StoredObservation

MAX_CHUNK_BYTES = 4 * 1024 * 1024

SESSION_OPEN = "open"
SESSION_COMPLETE = "complete"
SESSION_ABORTED = "aborted"


@dataclass
class UploadSession:
    session_id: str
    observation_id: str
    project_id: str
    total_size: int
    content_digest: str
    state: str
    dir: Path
    lock: threading.Lock

    @property
    def meta_path(self) -> Path:
        return self.dir / f"{self.session_id}.json"

    @property
    def part_path(self) -> Path:
        return self.dir / f"{self.session_id}.part"

    def committed_offset(self) -> int:
        if self.state == SESSION_COMPLETE:
            return self.total_size
        if self.part_path.exists():
            return self.part_path.stat().st_size
        return 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "observation_id": self.observation_id,
            "project_id": self.project_id,
            "total_size": self.total_size,
            "committed_offset": self.committed_offset(),
            "content_digest": self.content_digest,
            "state": self.state,
        }

    def persist(self) -> None:
        payload = {
            "session_id": self.session_id,
            "observation_id": self.observation_id,
            "project_id": self.project_id,
            "total_size": self.total_size,
            "content_digest": self.content_digest,
            "state": self.state,
        }
        tmp = self.meta_path.with_suffix(".tmp")
        tmp.write_bytes(canonical_json(payload))
        tmp.replace(self.meta_path)


class UploadManager:
    def __init__(self, registry: ProjectRegistry):
        self.registry = registry
        self._lock = threading.RLock()
        self._sessions: dict[str, UploadSession] = {}
        # (project_id, observation_id) -> session_id for open sessions
        self._open_index: dict[tuple[str, str], str] = {}
        self._load()

    def _load(self) -> None:
        for project_id in self.registry.project_ids():
            uploads_dir = self.registry.root / "projects" / project_id / "uploads"
            if not uploads_dir.is_dir():
                continue
            for meta_path in sorted(uploads_dir.glob("*.json")):
                d = parse_json(meta_path.read_bytes())
                session = UploadSession(
                    session_id=d["session_id"],
                    observation_id=d["observation_id"],
                    project_id=d["project_id"],
                    total_size=d["total_size"],
                    content_digest=d["content_digest"],
                    state=d["state"],
                    dir=uploads_dir,
                    lock=threading.Lock(),
                )
                self._sessions[session.session_id] = session
                if session.state == SESSION_OPEN:
                    self._open_index[(session.project_id, session.observation_id)] = (
                        session.session_id
                    )

    def _session(self, session_id: str) -> UploadSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no upload session {session_id!r}")
        return session

    # -- protocol ---------------------------------------------------------

    def begin_upload(
        self,
        project_id: str,
        observation_id: str,
        content_digest: str,
        total_size: int,
    ) -> UploadSession:
        manifest = self.registry.manifest(project_id)  # raises UnknownProject
        assert manifest is not None
        if not isinstance(observation_id, str) or not observation_id:
            raise RecordInvalid("observation_id must be a non-empty string")
        if not isinstance(content_digest, str) or not DIGEST_RE.match(content_digest):
            raise RecordInvalid("content_digest must be 64 lowercase hex characters")
        if not isinstance(total_size, int) or isinstance(total_size, bool) or total_size < 1:
            raise RecordInvalid("total_size must be a positive integer")

        quota = self.registry.quota_bytes
        if quota is not None:
            used = self.registry.media_bytes_used(project_id)
            if used + total_size > quota:
                raise QuotaExceeded(
                    f"project {project_id!r} would exceed its {quota} byte quota"
                )

        with self._lock:
            existing_id = self._open_index.get((project_id, observation_id))
            if existing_id is not None:
                return self._sessions[existing_id]

            uploads_dir = self.registry.root / "projects" / project_id / "uploads"
            uploads_dir.mkdir(parents=True, exist_ok=True)
            session = UploadSession(
                session_id=str(uuid.uuid4()),
                observation_id=observation_id,
                project_id=project_id,
                total_size=total_size,
                content_digest=content_digest,
                state=SESSION_OPEN,
                dir=uploads_dir,
                lock=threading.Lock(),
            )
            if self.registry.has_digest(project_id, content_digest):
                # dedup short-circuit: nothing to transfer
                session.state = SESSION_COMPLETE
            session.persist()
            self._sessions[session.session_id] = session
            if session.state == SESSION_OPEN:
                self._open_index[(project_id, observation_id)] = session.session_id
        return session

    def get_session(self, session_id: str) -> UploadSession:
        return self._session(session_id)

    def put_chunk(self, session_id: str, offset: int, chunk: bytes) -> int:
        session = self._session(session_id)
        with session.lock:
            if session.state != SESSION_OPEN:
                raise SessionClosed(f"session is {session.state}")
            if len(chunk) > MAX_CHUNK_BYTES:
                raise ChunkTooLarge(f"chunk of {len(chunk)} bytes exceeds {MAX_CHUNK_BYTES}")
            committed = session.committed_offset()
            if offset != committed:
                raise OffsetMismatch(
                    f"expected offset {committed}, got {offset}",
                    committed_offset=committed,
                )
            if committed + len(chunk) > session.total_size:
                raise ChunkTooLarge(
                    f"chunk would overrun declared total_size {session.total_size}"
                )
            with open(session.part_path, "ab") as fh:
                fh.write(chunk)
                fh.flush()
                os.fsync(fh.fileno())
            return session.committed_offset()

    def complete_upload(self, session_id: str, record: Any) -> StoredObservation:
        session = self._session(session_id)
        with session.lock:
            if session.state == SESSION_COMPLETE:
                # idempotent completion: the record landed previously (or the
                # digest was already stored); return the stored observation
                existing = self.registry.find_by_digest(
                    session.project_id, session.content_digest
                )
                if existing is not None:
                    return existing
                # complete session without a stored record should not happen;
                # fall through and ingest below
            if session.state == SESSION_ABORTED:
                raise SessionClosed("session was aborted; begin a new upload")

            committed = session.committed_offset()
            if committed < session.total_size:
                raise Incomplete(
                    f"only {committed} of {session.total_size} bytes received"
                )
            media = session.part_path.read_bytes() if session.part_path.exists() else b""
            if session.state == SESSION_OPEN:
                received_digest = hashlib.sha256(media).hexdigest()
                if received_digest != session.content_digest:
                    session.state = SESSION_ABORTED
                    session.persist()
                    session.part_path.unlink(missing_ok=True)
                    with self._lock:
                        self._open_index.pop(
                            (session.project_id, session.observation_id), None
                        )
                    raise DigestMismatch(
                        "received bytes do not hash to the session content_digest"
                    )
            else:
                media = self.registry.observation_media(
                    session.project_id, session.content_digest
                )

            if not isinstance(record, dict) or record.get("content_digest") != session.content_digest:
                raise RecordInvalid("record content_digest does not match the session")
            stored = self.registry.ingest(session.project_id, media, record)

            session.state = SESSION_COMPLETE
            session.persist()
            session.part_path.unlink(missing_ok=True)
            with self._lock:
                self._open_index.pop((session.project_id, session.observation_id), None)
        return stored
