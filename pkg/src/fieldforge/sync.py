"""Client-side synchronization engine.

Drains the selected-observation queue over the resumable upload protocol,
marks observation states as it goes, and afterwards pulls a newer published
model bundle when the server has one. Partial progress survives across
invocations because sessions are resumed server-side by observation id.

Fault injection: a byte budget (``fail_after_bytes``) models a connection
that dies mid-transfer. Once the budget is spent the connection is dead for
the rest of the run; a partially-sent chunk counts as transmitted but is
never committed by the server.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import httpx

from . import errors as E
from .bundle import LoadedBundle, open_bundle
from .capture import Observation, ObservationStore
from .errors import FieldForgeError
from .jsoncanon import canonical_json
from .manifest import ProjectManifest, parse_manifest
from .semver import semver_newer

DEFAULT_CHUNK_SIZE = 256 * 1024

MANIFEST_FILE = "project.json"
BUNDLE_FILE = "model.bundle"


class SimulatedNetworkFailure(Exception):
    """Raised by the fault-injection hook when the byte budget is spent."""


class _TransferMeter:
    def __init__(self, fail_after_bytes: int | None):
        self.fail_after = fail_after_bytes
        self.sent = 0
        self.dead = False

    def check(self) -> None:
        if self.dead:
            raise SimulatedNetworkFailure("connection lost")

    def send(self, n: int) -> None:
        """Account for n bytes about to go on the wire; may kill the link."""
        self.check()
        if self.fail_after is None:
            self.sent += n
            return
        remaining = self.fail_after - self.sent
        if remaining < n:
            self.sent += max(0, remaining)  # the truncated part still left the client
            self.dead = True
            raise SimulatedNetworkFailure(f"connection lost after {self.sent} bytes")
        self.sent += n


@dataclass
class SyncPolicy:
    max_retries: int = 3
    chunk_size: int = DEFAULT_CHUNK_SIZE
    fail_after_bytes: int | None = None


@dataclass
class SyncReport:
    uploaded: int = 0
    resumed: int = 0
    failed: int = 0
    bytes_sent: int = 0
    model_updated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "uploaded": self.uploaded,
            "resumed": self.resumed,
            "failed": self.failed,
            "bytes_sent": self.bytes_sent,
            "model_updated": self.model_updated,
        }


_CODE_MAP = {
    cls.code: cls
    for cls in vars(E).values()
    if isinstance(cls, type) and issubclass(cls, FieldForgeError) and cls is not FieldForgeError
}


def _raise_for_error(response: httpx.Response) -> None:
    if response.status_code < 400:
        return
    try:
        body = response.json()
        code, message = body["code"], body["message"]
    except (ValueError, KeyError):
        code, message = "error", response.text
    klass = _CODE_MAP.get(code, FieldForgeError)
    raise klass(message)


class SyncClient:
    """Typed wrapper over the server wire protocol.

    ``http`` is any httpx-compatible client with a base_url (a real
    ``httpx.Client`` in production, a test client in tests). An optional
    bearer token is forwarded; the reference server ignores it.
    """

    def __init__(self, http: httpx.Client, token: str | None = None):
        self.http = http
        self.headers = {"Authorization": f"Bearer {token}"} if token else {}

    def _json(self, response: httpx.Response):
        _raise_for_error(response)
        return response.json()

    # registry
    def create_project(self, manifest: ProjectManifest) -> dict:
        return self._json(self.http.post(
            "/v1/projects", content=canonical_json(manifest.to_dict()),
            headers=self.headers,
        ))

    def get_manifest(self, project_id: str) -> ProjectManifest:
        return parse_manifest(self._json(self.http.get(
            f"/v1/projects/{project_id}/manifest", headers=self.headers,
        )))

    def publish_model(self, project_id: str, bundle_bytes: bytes) -> dict:
        return self._json(self.http.post(
            f"/v1/projects/{project_id}/model", content=bundle_bytes,
            headers=self.headers,
        ))

    def check_model_update(self, project_id: str, current: str | None) -> dict | None:
        params = {"current": current} if current else {}
        response = self.http.get(
            f"/v1/projects/{project_id}/model", params=params, headers=self.headers,
        )
        if response.status_code == 204:
            return None
        return self._json(response)

    def download_model(self, project_id: str) -> bytes:
        response = self.http.get(
            f"/v1/projects/{project_id}/model/download", headers=self.headers,
        )
        _raise_for_error(response)
        return response.content

    # uploads
    def begin_upload(
        self, project_id: str, observation_id: str, content_digest: str, total_size: int
    ) -> dict:
        return self._json(self.http.post(
            f"/v1/projects/{project_id}/uploads",
            content=canonical_json({
                "observation_id": observation_id,
                "content_digest": content_digest,
                "total_size": total_size,
            }),
            headers=self.headers,
        ))

    def get_session(self, session_id: str) -> dict:
        return self._json(self.http.get(f"/v1/uploads/{session_id}", headers=self.headers))

    def put_chunk(self, session_id: str, offset: int, chunk: bytes) -> int:
        body = self._json(self.http.put(
            f"/v1/uploads/{session_id}/chunks", params={"offset": offset},
            content=chunk, headers=self.headers,
        ))
        return body["committed_offset"]

    def complete_upload(self, session_id: str, record: dict) -> str:
        body = self._json(self.http.post(
            f"/v1/uploads/{session_id}/complete", content=canonical_json(record),
            headers=self.headers,
        ))
        return body["observation_id"]

    # review (used by tests and the console; not by run_sync)
    def list_observations(self, project_id: str, **params) -> dict:
        clean = {k: v for k, v in params.items() if v is not None}
        return self._json(self.http.get(
            f"/v1/projects/{project_id}/observations", params=clean, headers=self.headers,
        ))

    def submit_review(self, observation_id: str, decision: dict) -> dict:
        return self._json(self.http.post(
            f"/v1/observations/{observation_id}/review",
            content=canonical_json(decision), headers=self.headers,
        ))

    def export_snapshot(self, project_id: str) -> dict:
        return self._json(self.http.post(
            f"/v1/projects/{project_id}/snapshots", headers=self.headers,
        ))


class Workspace:
    """Client-side project directory: manifest, active bundle, observations.

    Layout: ``project.json`` and ``model.bundle`` next to the observation
    store (``media/``, ``journal.ndjson``, ``overlays/``).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.store = ObservationStore(self.root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_FILE

    @property
    def bundle_path(self) -> Path:
        return self.root / BUNDLE_FILE

    def manifest(self) -> ProjectManifest:
        return parse_manifest(self.manifest_path.read_bytes())

    def load_bundle(self) -> LoadedBundle:
        return LoadedBundle.from_bytes(self.bundle_path.read_bytes())

    def bundle_version(self) -> str | None:
        if not self.bundle_path.exists():
            return None
        meta, _, _ = open_bundle(self.bundle_path.read_bytes())
        return meta.version

    def install(self, manifest_bytes: bytes, bundle_bytes: bytes) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_bytes(manifest_bytes)
        self.bundle_path.write_bytes(bundle_bytes)


def _upload_one(
    client: SyncClient,
    store: ObservationStore,
    obs: Observation,
    policy: SyncPolicy,
    meter: _TransferMeter,
) -> tuple[bool, bool]:
    """Upload one observation; returns (resumed, uploaded)."""
    media = store.media_bytes(obs)
    restarts = 0
    while True:
        try:
            meter.check()
            session = client.begin_upload(
                obs.project_id, obs.observation_id, obs.content_digest, len(media)
            )
            session_id = session["session_id"]
            offset = session["committed_offset"]
            resumed = session["state"] == "open" and offset > 0
            retries = 0
            while offset < len(media):
                chunk = media[offset:offset + policy.chunk_size]
                meter.send(len(chunk))
                try:
                    offset = client.put_chunk(session_id, offset, chunk)
                except E.OffsetMismatch:
                    retries += 1
                    if retries > policy.max_retries:
                        raise
                    offset = client.get_session(session_id)["committed_offset"]
            meter.check()
            client.complete_upload(session_id, obs.to_record())
            return resumed, True
        except E.DigestMismatch:
            # transfer corrupted; the server aborted the session. Restart.
            restarts += 1
            if restarts > policy.max_retries:
                raise
            continue


def run_sync(workspace: Workspace, client: SyncClient, policy: SyncPolicy | None = None) -> SyncReport:
    """Push every selected (and previously failed) observation, then check
    for a newer published model. Per-item failures never abort the run."""
    policy = policy or SyncPolicy()
    store = workspace.store
    report = SyncReport()
    meter = _TransferMeter(policy.fail_after_bytes)

    pending = store.list_observations("selected") + store.list_observations("failed")
    pending.sort(key=lambda o: (o.captured_at, o.observation_id))
    for obs in pending:
        if meter.dead:
            break  # connection gone; untouched items stay queued for next run
        store.transition_state(obs.observation_id, "uploading")
        try:
            resumed, _ = _upload_one(client, store, obs, policy, meter)
            store.transition_state(obs.observation_id, "uploaded")
            report.uploaded += 1
            if resumed:
                report.resumed += 1
        except (FieldForgeError, SimulatedNetworkFailure, httpx.HTTPError):
            store.transition_state(obs.observation_id, "failed")
            report.failed += 1
    report.bytes_sent = meter.sent

    try:
        meter.check()
        project_id = workspace.manifest().project_id
        current = workspace.bundle_version()
        update = client.check_model_update(project_id, current)
        if update is not None:
            version = update["meta"]["version"]
            if current is None or semver_newer(version, current):
                data = client.download_model(project_id)
                LoadedBundle.from_bytes(data, expected_digest=update["digest"])
                workspace.bundle_path.write_bytes(data)
                report.model_updated = True
    except (FieldForgeError, SimulatedNetworkFailure, httpx.HTTPError, OSError):
        pass  # model refresh is best-effort; uploads already counted

    return report
