"""Server-side project registry and per-project data stores.

One directory per project, mirroring the client journal design: NDJSON event
logs plus media files addressed by content digest. Nothing here needs a
database; a project's data store is a mountable directory.

    <root>/projects/<project_id>/
        project.json            canonical manifest
        model.bundle            published bundle bytes
        model.json              published bundle meta + digest
        media/<digest>.png      ingested media
        observations.ndjson     append-only ingest log
        reviews.ndjson          append-only review history
        rescores.ndjson         append-only server-side re-scoring results
        snapshots/snapshot-<n>.json
        uploads/                resumable upload sessions (see uploads.py)

Per-project mutations are serialized through one lock per project; operations
on different projects run fully in parallel.
"""

from __future__ import annotations

import base64
import hashlib
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .bundle import BundleMeta, open_bundle
from .clock import is_utc_iso, utc_now_iso
from .detection import Detection
from .errors import (
    BadCursor,
    DuplicateProject,
    InvalidManifest,
    LabelMismatch,
    MalformedDecision,
    MediaMissing,
    NoModel,
    NothingReviewed,
    RecordInvalid,
    StaleVersion,
    UnknownObservation,
    UnknownProject,
)
from .imaging import decode_image
from .jsoncanon import canonical_json, canonical_json_line, parse_json
from .manifest import DIGEST_RE, ProjectManifest, parse_manifest, validate_manifest
from .refdet import RefDetModel, refdet_infer
from .semver import semver_newer

VERDICTS = ("confirm", "refute", "correct")


@dataclass(frozen=True)
class ReviewDecision:
    verdict: str
    corrected_detections: tuple[Detection, ...]
    reviewer: str
    decided_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "corrected_detections": [d.to_dict() for d in self.corrected_detections],
            "reviewer": self.reviewer,
            "decided_at": self.decided_at,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "ReviewDecision":
        return cls(
            verdict=d["verdict"],
            corrected_detections=tuple(
                Detection.from_dict(x) for x in d.get("corrected_detections", [])
            ),
            reviewer=d.get("reviewer", ""),
            decided_at=d.get("decided_at", ""),
        )


@dataclass(frozen=True)
class StoredObservation:
    observation_id: str
    project_id: str
    content_digest: str
    captured_at: str
    sensor: dict | None
    detections: tuple[Detection, ...]
    model_version: str
    received_at: str
    review: ReviewDecision | None = None
    review_history: tuple[ReviewDecision, ...] = ()
    server_detections: tuple[Detection, ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "observation_id": self.observation_id,
            "project_id": self.project_id,
            "content_digest": self.content_digest,
            "captured_at": self.captured_at,
            "sensor": self.sensor,
            "detections": [d.to_dict() for d in self.detections],
            "model_version": self.model_version,
            "received_at": self.received_at,
            "review": self.review.to_dict() if self.review else None,
            "review_history": [r.to_dict() for r in self.review_history],
            "server_detections": (
                [d.to_dict() for d in self.server_detections]
                if self.server_detections is not None
                else None
            ),
        }


@dataclass
class DatasetSnapshot:
    snapshot_id: int
    created_at: str
    images: list[dict]
    annotations: list[dict]
    stats: dict

    def to_dict(self) -> dict[str, Any]:
        return {
            "snapshot_id": self.snapshot_id,
            "created_at": self.created_at,
            "images": self.images,
            "annotations": self.annotations,
            "stats": self.stats,
        }


def validate_decision(decision: ReviewDecision, label_count: int) -> None:
    if decision.verdict not in VERDICTS:
        raise MalformedDecision(f"verdict must be one of {VERDICTS}, got {decision.verdict!r}")
    if decision.verdict != "correct" and decision.corrected_detections:
        raise MalformedDecision(
            f"corrected_detections must be empty for verdict={decision.verdict}"
        )
    if decision.verdict == "correct":
        for i, det in enumerate(decision.corrected_detections):
            if not det.is_valid(label_count):
                raise MalformedDecision(f"corrected_detections[{i}] is invalid")
    if not isinstance(decision.reviewer, str):
        raise MalformedDecision("reviewer must be a string")
    if not is_utc_iso(decision.decided_at):
        raise MalformedDecision("decided_at must be a UTC timestamp")


def _validate_record(record: Any, media: bytes, label_count: int) -> dict:
    if not isinstance(record, dict):
        raise RecordInvalid("observation record must be a JSON object")
    for key in ("observation_id", "project_id", "content_digest", "captured_at",
                "detections", "model_version"):
        if key not in record:
            raise RecordInvalid(f"record missing field {key!r}")
    if not isinstance(record["observation_id"], str) or not record["observation_id"]:
        raise RecordInvalid("observation_id must be a non-empty string")
    digest = record["content_digest"]
    if not isinstance(digest, str) or not DIGEST_RE.match(digest):
        raise RecordInvalid("content_digest must be 64 lowercase hex characters")
    if hashlib.sha256(media).hexdigest() != digest:
        raise RecordInvalid("media bytes do not match content_digest")
    if not is_utc_iso(record["captured_at"]):
        raise RecordInvalid("captured_at must be a UTC timestamp")
    if not isinstance(record["detections"], list):
        raise RecordInvalid("detections must be a list")
    dets = []
    for i, d in enumerate(record["detections"]):
        try:
            det = Detection.from_dict(d)
        except (KeyError, TypeError) as exc:
            raise RecordInvalid(f"detections[{i}] malformed: {exc}") from exc
        if not det.is_valid(label_count):
            raise RecordInvalid(f"detections[{i}] invalid against project labels")
        dets.append(det)
    record = dict(record)
    record["detections"] = dets
    return record


class _ProjectState:
    def __init__(self, root: Path, manifest: ProjectManifest):
        self.root = root
        self.manifest = manifest
        self.lock = threading.RLock()
        self.published: tuple[BundleMeta, str] | None = None  # (meta, digest)
        self.observations: dict[str, StoredObservation] = {}
        self.digest_index: dict[str, str] = {}  # content_digest -> observation_id
        self.order: list[tuple[str, str]] = []  # (received_at, observation_id)
        self.snapshot_count = 0

    @property
    def media_dir(self) -> Path:
        return self.root / "media"

    @property
    def uploads_dir(self) -> Path:
        return self.root / "uploads"


class ProjectRegistry:
    """The primary server's state: all projects, each with its own store."""

    def __init__(self, root: str | Path, quota_bytes: int | None = None):
        self.root = Path(root)
        self.projects_dir = self.root / "projects"
        self.projects_dir.mkdir(parents=True, exist_ok=True)
        self.quota_bytes = quota_bytes
        self._lock = threading.RLock()
        self._projects: dict[str, _ProjectState] = {}
        self._oid_index: dict[str, str] = {}  # observation_id -> project_id
        self._load_all()

    # -- loading ----------------------------------------------------------

    def _load_all(self) -> None:
        for proj_dir in sorted(self.projects_dir.iterdir()) if self.projects_dir.exists() else []:
            manifest_path = proj_dir / "project.json"
            if not manifest_path.is_file():
                continue
            manifest = parse_manifest(manifest_path.read_bytes())
            state = _ProjectState(proj_dir, manifest)
            self._load_project_logs(state)
            self._projects[manifest.project_id] = state
            for oid in state.observations:
                self._oid_index[oid] = manifest.project_id

    def _load_project_logs(self, state: _ProjectState) -> None:
        model_meta = state.root / "model.json"
        if model_meta.is_file():
            d = parse_json(model_meta.read_bytes())
            state.published = (BundleMeta.from_dict(d["meta"]), d["digest"])
        obs_log = state.root / "observations.ndjson"
        if obs_log.is_file():
            for line in obs_log.read_bytes().split(b"\n")[:-1]:
                if not line:
                    continue
                d = parse_json(line)
                obs = StoredObservation(
                    observation_id=d["observation_id"],
                    project_id=d["project_id"],
                    content_digest=d["content_digest"],
                    captured_at=d["captured_at"],
                    sensor=d.get("sensor"),
                    detections=tuple(Detection.from_dict(x) for x in d["detections"]),
                    model_version=d["model_version"],
                    received_at=d["received_at"],
                )
                if obs.content_digest not in state.digest_index:
                    state.observations[obs.observation_id] = obs
                    state.digest_index[obs.content_digest] = obs.observation_id
                    state.order.append((obs.received_at, obs.observation_id))
        review_log = state.root / "reviews.ndjson"
        if review_log.is_file():
            for line in review_log.read_bytes().split(b"\n")[:-1]:
                if not line:
                    continue
                d = parse_json(line)
                oid = d["observation_id"]
                if oid in state.observations:
                    decision = ReviewDecision.from_dict(d["decision"])
                    obs = state.observations[oid]
                    state.observations[oid] = replace(
                        obs,
                        review=decision,
                        review_history=obs.review_history + (decision,),
                    )
        rescore_log = state.root / "rescores.ndjson"
        if rescore_log.is_file():
            for line in rescore_log.read_bytes().split(b"\n")[:-1]:
                if not line:
                    continue
                d = parse_json(line)
                oid = d["observation_id"]
                if oid in state.observations:
                    dets = tuple(Detection.from_dict(x) for x in d["server_detections"])
                    state.observations[oid] = replace(
                        state.observations[oid], server_detections=dets
                    )
        snap_dir = state.root / "snapshots"
        if snap_dir.is_dir():
            state.snapshot_count = len(list(snap_dir.glob("snapshot-*.json")))
        state.order.sort()

    # -- helpers ----------------------------------------------------------

    def _state(self, project_id: str) -> _ProjectState:
        state = self._projects.get(project_id)
        if state is None:
            raise UnknownProject(f"no project {project_id!r}")
        return state

    def _append_log(self, path: Path, payload: dict) -> None:
        import os

        with open(path, "ab") as fh:
            fh.write(canonical_json_line(payload))
            fh.flush()
            os.fsync(fh.fileno())

    def project_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._projects)

    def manifest(self, project_id: str) -> ProjectManifest:
        return self._state(project_id).manifest

    def media_bytes_used(self, project_id: str) -> int:
        state = self._state(project_id)
        if not state.media_dir.is_dir():
            return 0
        return sum(p.stat().st_size for p in state.media_dir.iterdir())

    # -- operations -------------------------------------------------------

    def create_project(self, manifest: ProjectManifest) -> ProjectManifest:
        violations = validate_manifest(manifest)
        if violations:
            raise InvalidManifest(violations)
        with self._lock:
            if manifest.project_id in self._projects:
                raise DuplicateProject(manifest.project_id)
            proj_dir = self.projects_dir / manifest.project_id
            proj_dir.mkdir(parents=True)
            (proj_dir / "media").mkdir()
            (proj_dir / "uploads").mkdir()
            (proj_dir / "snapshots").mkdir()
            (proj_dir / "project.json").write_bytes(canonical_json(manifest.to_dict()))
            self._projects[manifest.project_id] = _ProjectState(proj_dir, manifest)
        return manifest

    def publish_model(self, project_id: str, bundle_bytes: bytes) -> BundleMeta:
        state = self._state(project_id)
        meta, labels, _payload = open_bundle(bundle_bytes)
        if meta.label_count != len(state.manifest.labels):
            raise LabelMismatch(
                f"bundle has {meta.label_count} labels, manifest has {len(state.manifest.labels)}"
            )
        with state.lock:
            if state.published is not None and not semver_newer(
                meta.version, state.published[0].version
            ):
                raise StaleVersion(
                    f"published version {state.published[0].version} is not older than {meta.version}"
                )
            digest = hashlib.sha256(bundle_bytes).hexdigest()
            (state.root / "model.bundle").write_bytes(bundle_bytes)
            (state.root / "model.json").write_bytes(
                canonical_json({"meta": meta.to_dict(), "digest": digest})
            )
            state.published = (meta, digest)
        return meta

    def published_model(self, project_id: str) -> tuple[BundleMeta, str]:
        state = self._state(project_id)
        if state.published is None:
            raise NoModel(f"project {project_id!r} has no published model")
        return state.published

    def model_bytes(self, project_id: str) -> bytes:
        state = self._state(project_id)
        if state.published is None:
            raise NoModel(f"project {project_id!r} has no published model")
        return (state.root / "model.bundle").read_bytes()

    def check_model_update(self, project_id: str, current_version: str | None):
        """None for no change, else the (meta, digest) of a strictly newer bundle."""
        state = self._state(project_id)
        if state.published is None:
            return None
        meta, digest = state.published
        if current_version is None or semver_newer(meta.version, current_version):
            return meta, digest
        return None

    def has_digest(self, project_id: str, content_digest: str) -> bool:
        state = self._state(project_id)
        with state.lock:
            return content_digest in state.digest_index

    def find_by_digest(self, project_id: str, content_digest: str) -> StoredObservation | None:
        state = self._state(project_id)
        with state.lock:
            oid = state.digest_index.get(content_digest)
            return state.observations[oid] if oid is not None else None

    def ingest(self, project_id: str, media: bytes, record: Any) -> StoredObservation:
        """Store an observation once per (project, content_digest)."""
        state = self._state(project_id)
        record = _validate_record(record, media, len(state.manifest.labels))
        if record["project_id"] != project_id:
            raise RecordInvalid("record project_id does not match the target project")
        with state.lock:
            existing_oid = state.digest_index.get(record["content_digest"])
            if existing_oid is not None:
                return state.observations[existing_oid]
            obs = StoredObservation(
                observation_id=record["observation_id"],
                project_id=project_id,
                content_digest=record["content_digest"],
                captured_at=record["captured_at"],
                sensor=record.get("sensor"),
                detections=tuple(record["detections"]),
                model_version=record["model_version"],
                received_at=utc_now_iso(),
            )
            if obs.observation_id in state.observations:
                raise RecordInvalid(
                    f"observation_id {obs.observation_id!r} already stored with a different digest"
                )
            media_path = state.media_dir / f"{obs.content_digest}.png"
            if not media_path.exists():
                tmp = media_path.with_suffix(".tmp")
                tmp.write_bytes(media)
                tmp.replace(media_path)
            log_entry = obs.to_dict()
            for drop in ("review", "review_history", "server_detections"):
                del log_entry[drop]
            self._append_log(state.root / "observations.ndjson", log_entry)
            state.observations[obs.observation_id] = obs
            state.digest_index[obs.content_digest] = obs.observation_id
            state.order.append((obs.received_at, obs.observation_id))
            state.order.sort()
            with self._lock:
                self._oid_index[obs.observation_id] = project_id
        return obs

    def find_observation(self, observation_id: str) -> tuple[str, StoredObservation]:
        with self._lock:
            project_id = self._oid_index.get(observation_id)
        if project_id is None:
            raise UnknownObservation(observation_id)
        state = self._state(project_id)
        with state.lock:
            return project_id, state.observations[observation_id]

    def get_observation(self, project_id: str, observation_id: str) -> StoredObservation:
        state = self._state(project_id)
        with state.lock:
            obs = state.observations.get(observation_id)
        if obs is None:
            raise UnknownObservation(observation_id)
        return obs

    def observation_media(self, project_id: str, content_digest: str) -> bytes:
        state = self._state(project_id)
        path = state.media_dir / f"{content_digest}.png"
        if not path.is_file():
            raise MediaMissing(f"no media stored for digest {content_digest}")
        return path.read_bytes()

    def submit_review(
        self, project_id: str, observation_id: str, decision: ReviewDecision
    ) -> StoredObservation:
        state = self._state(project_id)
        validate_decision(decision, len(state.manifest.labels))
        with state.lock:
            obs = state.observations.get(observation_id)
            if obs is None:
                raise UnknownObservation(observation_id)
            self._append_log(
                state.root / "reviews.ndjson",
                {"observation_id": observation_id, "decision": decision.to_dict()},
            )
            updated = replace(
                obs, review=decision, review_history=obs.review_history + (decision,)
            )
            state.observations[observation_id] = updated
        return updated

    def rescore_observation(
        self, project_id: str, observation_id: str, verification_model: RefDetModel
    ) -> list[Detection]:
        state = self._state(project_id)
        with state.lock:
            obs = state.observations.get(observation_id)
        if obs is None:
            raise UnknownObservation(observation_id)
        media = self.observation_media(project_id, obs.content_digest)
        dets = refdet_infer(verification_model, decode_image(media))
        with state.lock:
            self._append_log(
                state.root / "rescores.ndjson",
                {
                    "observation_id": observation_id,
                    "server_detections": [d.to_dict() for d in dets],
                    "rescored_at": utc_now_iso(),
                },
            )
            state.observations[observation_id] = replace(
                state.observations[observation_id], server_detections=tuple(dets)
            )
        return dets

    def export_snapshot(self, project_id: str) -> DatasetSnapshot:
        """Freeze all currently reviewed observations into a training export.

        Verdict rules: confirm keeps the device-model detections (source
        "model"); correct keeps the expert boxes (source "expert"); refute
        keeps the image with zero annotations, a negative example.
        """
        state = self._state(project_id)
        with state.lock:
            reviewed = [o for o in state.observations.values() if o.review is not None]
            if not reviewed:
                raise NothingReviewed(f"project {project_id!r} has no reviewed observations")
            reviewed.sort(key=lambda o: o.content_digest)
            images = [
                {"content_digest": o.content_digest, "media_path": f"media/{o.content_digest}.png"}
                for o in reviewed
            ]
            annotations: list[dict] = []
            label_stats: dict[str, int] = {}
            verdict_stats = {v: 0 for v in VERDICTS}
            for obs in reviewed:
                verdict = obs.review.verdict
                verdict_stats[verdict] += 1
                if verdict == "confirm":
                    rows = [(d, "model") for d in obs.detections]
                elif verdict == "correct":
                    rows = [(d, "expert") for d in obs.review.corrected_detections]
                else:
                    rows = []
                for det, source in rows:
                    annotations.append({
                        "content_digest": obs.content_digest,
                        "detection": det.to_dict(),
                        "source": source,
                    })
                    key = str(det.label_id)
                    label_stats[key] = label_stats.get(key, 0) + 1
            state.snapshot_count += 1
            snapshot = DatasetSnapshot(
                snapshot_id=state.snapshot_count,
                created_at=utc_now_iso(),
                images=images,
                annotations=annotations,
                stats={"labels": label_stats, "verdicts": verdict_stats},
            )
            path = state.root / "snapshots" / f"snapshot-{snapshot.snapshot_id}.json"
            path.write_bytes(canonical_json(snapshot.to_dict()))
        return snapshot

    def snapshot_bytes(self, project_id: str, snapshot_id: int) -> bytes:
        state = self._state(project_id)
        path = state.root / "snapshots" / f"snapshot-{snapshot_id}.json"
        if not path.is_file():
            raise UnknownObservation(f"no snapshot {snapshot_id} for project {project_id!r}")
        return path.read_bytes()

    def list_observations(
        self,
        project_id: str,
        reviewed: bool | None = None,
        verdict: str | None = None,
        limit: int | None = None,
        cursor: str | None = None,
    ) -> tuple[list[StoredObservation], str | None]:
        """Page of observations ordered by (received_at, observation_id)."""
        state = self._state(project_id)
        with state.lock:
            ordered = [state.observations[oid] for _, oid in state.order]
        if reviewed is not None:
            ordered = [o for o in ordered if (o.review is not None) == reviewed]
        if verdict is not None:
            if verdict not in VERDICTS:
                raise BadCursor(f"unknown verdict filter {verdict!r}")
            ordered = [o for o in ordered if o.review is not None and o.review.verdict == verdict]
        start = 0
        if cursor is not None:
            key = _decode_cursor(cursor)
            start = 0
            for i, obs in enumerate(ordered):
                if (obs.received_at, obs.observation_id) <= key:
                    start = i + 1
        page = ordered[start:] if limit is None else ordered[start:start + limit]
        next_cursor = None
        if limit is not None and start + limit < len(ordered):
            last = page[-1]
            next_cursor = _encode_cursor((last.received_at, last.observation_id))
        return page, next_cursor


def _encode_cursor(key: tuple[str, str]) -> str:
    raw = canonical_json({"r": key[0], "o": key[1]})
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")


def _decode_cursor(cursor: str) -> tuple[str, str]:
    try:
        padded = cursor + "=" * (-len(cursor) % 4)
        d = parse_json(base64.urlsafe_b64decode(padded.encode("ascii")))
        return (d["r"], d["o"])
    except (ValueError, KeyError, TypeError) as exc:
        raise BadCursor(f"cannot decode cursor: {exc}") from exc
