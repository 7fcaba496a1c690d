"""Client-side observation store.

Captured media lives in local storage while offline; every observation is a
record in an append-only NDJSON journal plus a content-addressed media file:

    <store>/media/<sha256>.png
    <store>/journal.ndjson      one canonical-JSON record per line,
                                last record per observation_id wins

Ordering of writes gives crash safety without a database: media bytes land
first (write-to-temp, rename), then the journal line is appended in a single
write. A torn trailing line is ignored on read, so a killed process leaves
the observation either fully present or invisible.

This module performs no network I/O anywhere; capture works fully offline.
"""

from __future__ import annotations

import hashlib
import os
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .bundle import LoadedBundle
from .clock import is_utc_iso, utc_now_iso
from .detection import Detection, postprocess
from .errors import IllegalTransition, MissingSensor, StorageFull, UnknownObservation
from .imaging import decode_image
from .jsoncanon import canonical_json_line, parse_json
from .manifest import ProjectManifest

STATES = ("captured", "selected", "uploading", "uploaded", "failed")

# Allowed edges of the observation lifecycle. selected->captured is the
# deselect edge driven by set_selected(False).
EDGES = {
    ("captured", "selected"),
    ("selected", "captured"),
    ("selected", "uploading"),
    ("uploading", "uploaded"),
    ("uploading", "failed"),
    ("failed", "uploading"),
}

JOURNAL_NAME = "journal.ndjson"
MEDIA_DIR = "media"


@dataclass(frozen=True)
class SensorFrame:
    latitude: float
    longitude: float
    gps_accuracy: float = 0.0
    heading: float = 0.0
    captured_at: str = ""

    def is_valid(self) -> bool:
        try:
            return (
                abs(self.latitude) <= 90.0
                and abs(self.longitude) <= 180.0
                and self.gps_accuracy >= 0.0
                and 0.0 <= self.heading < 360.0
                and is_utc_iso(self.captured_at)
            )
        except TypeError:
            return False

    def to_dict(self) -> dict[str, Any]:
        return {
            "latitude": self.latitude,
            "longitude": self.longitude,
            "gps_accuracy": self.gps_accuracy,
            "heading": self.heading,
            "captured_at": self.captured_at,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "SensorFrame":
        return cls(
            latitude=d["latitude"],
            longitude=d["longitude"],
            gps_accuracy=d["gps_accuracy"],
            heading=d["heading"],
            captured_at=d["captured_at"],
        )


@dataclass(frozen=True)
class Observation:
    observation_id: str
    project_id: str
    media_path: str
    content_digest: str
    captured_at: str
    sensor: SensorFrame | None
    detections: tuple[Detection, ...]
    model_version: str
    state: str = "captured"

    def to_dict(self) -> dict[str, Any]:
        return {
            "observation_id": self.observation_id,
            "project_id": self.project_id,
            "media_path": self.media_path,
            "content_digest": self.content_digest,
            "captured_at": self.captured_at,
            "sensor": self.sensor.to_dict() if self.sensor else None,
            "detections": [d.to_dict() for d in self.detections],
            "model_version": self.model_version,
            "state": self.state,
        }

    def to_record(self) -> dict[str, Any]:
        """The portable record sent to the server: local-only fields removed."""
        d = self.to_dict()
        del d["media_path"]
        del d["state"]
        return d

    @classmethod
    def from_dict(cls, d: Any) -> "Observation":
        sensor = d.get("sensor")
        return cls(
            observation_id=d["observation_id"],
            project_id=d["project_id"],
            media_path=d["media_path"],
            content_digest=d["content_digest"],
            captured_at=d["captured_at"],
            sensor=SensorFrame.from_dict(sensor) if sensor else None,
            detections=tuple(Detection.from_dict(x) for x in d["detections"]),
            model_version=d["model_version"],
            state=d["state"],
        )


class ObservationStore:
    """Single-writer local store for one project.

    ``failpoint`` is a test hook: when set, it is called with a stage name
    at each durability boundary and may raise to simulate a crash.
    """

    def __init__(
        self,
        root: str | Path,
        max_bytes: int | None = None,
        failpoint: Callable[[str], None] | None = None,
    ):
        self.root = Path(root)
        self.media_dir = self.root / MEDIA_DIR
        self.journal_path = self.root / JOURNAL_NAME
        self.max_bytes = max_bytes
        self.failpoint = failpoint or (lambda stage: None)
        self.media_dir.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Observation] = {}
        self._cache_size = -1  # journal byte size the cache reflects

    # -- journal ----------------------------------------------------------

    def _load(self) -> dict[str, Observation]:
        """Current records; re-parses the journal only when it changed."""
        size = self.journal_path.stat().st_size if self.journal_path.exists() else 0
        if size == self._cache_size:
            return self._cache
        records: dict[str, Observation] = {}
        if size:
            data = self.journal_path.read_bytes()
            for line in data.split(b"\n")[:-1]:  # incomplete trailing line has no \n
                if not line:
                    continue
                try:
                    obs = Observation.from_dict(parse_json(line))
                except (ValueError, KeyError, TypeError):
                    continue  # torn or foreign line; skip, do not abort
                records[obs.observation_id] = obs
        self._cache = records
        self._cache_size = size
        return records

    def _append(self, obs: Observation) -> None:
        line = canonical_json_line(obs.to_dict())
        self.failpoint("before_journal_append")
        records = self._load()
        with open(self.journal_path, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        records[obs.observation_id] = obs
        self._cache_size += len(line)
        self.failpoint("after_journal_append")

    def _used_bytes(self) -> int:
        total = 0
        for p in self.media_dir.iterdir():
            total += p.stat().st_size
        if self.journal_path.exists():
            total += self.journal_path.stat().st_size
        return total

    # -- operations -------------------------------------------------------

    def record_observation(
        self,
        project: ProjectManifest,
        media: bytes,
        sensor: SensorFrame | None,
        model: LoadedBundle,
    ) -> Observation:
        """Capture one media item: run guidance inference, persist, journal."""
        if project.capture.require_gps and sensor is None:
            raise MissingSensor("project requires GPS but no sensor frame given")
        if sensor is not None and not sensor.is_valid():
            raise MissingSensor("sensor frame fails validation")
        if self.max_bytes is not None and self._used_bytes() + len(media) > self.max_bytes:
            raise StorageFull(f"store over {self.max_bytes} byte limit")

        raster = decode_image(media)
        raw = model.infer(raster)
        dets = postprocess(
            raw,
            min_confidence=project.capture.min_confidence_to_suggest,
            iou_threshold=model.model.nms_iou_threshold,
            max_out=model.model.max_detections,
        )

        digest = hashlib.sha256(media).hexdigest()
        media_rel = f"{MEDIA_DIR}/{digest}.png"
        media_path = self.root / media_rel
        if not media_path.exists():
            tmp = media_path.with_suffix(".tmp")
            tmp.write_bytes(media)
            self.failpoint("after_media_tmp")
            os.replace(tmp, media_path)
        self.failpoint("after_media")

        captured_at = sensor.captured_at if sensor is not None else utc_now_iso()
        obs = Observation(
            observation_id=str(uuid.uuid4()),
            project_id=project.project_id,
            media_path=media_rel,
            content_digest=digest,
            captured_at=captured_at,
            sensor=sensor,
            detections=tuple(dets),
            model_version=model.meta.version,
            state="captured",
        )
        self._append(obs)
        return obs

    def get(self, observation_id: str) -> Observation:
        obs = self._load().get(observation_id)
        if obs is None:
            raise UnknownObservation(observation_id)
        return obs

    def media_bytes(self, obs: Observation) -> bytes:
        return (self.root / obs.media_path).read_bytes()

    def set_selected(self, observation_id: str, selected: bool) -> Observation:
        """Toggle upload selection. Idempotent within {captured, selected};
        observations already in the upload pipeline cannot be toggled."""
        obs = self.get(observation_id)
        target = "selected" if selected else "captured"
        if obs.state == target:
            return obs
        return self.transition_state(observation_id, target)

    def transition_state(self, observation_id: str, to: str) -> Observation:
        obs = self.get(observation_id)
        if to not in STATES:
            raise IllegalTransition(f"unknown state {to!r}")
        if (obs.state, to) not in EDGES:
            raise IllegalTransition(f"{obs.state} -> {to} is not an allowed edge")
        updated = Observation(**{**obs.__dict__, "state": to})
        self._append(updated)
        return updated

    def list_observations(self, state: str | None = None) -> list[Observation]:
        """All observations, captured_at ascending, id as tie-break."""
        rows = self._load().values()
        if state is not None:
            rows = [o for o in rows if o.state == state]
        return sorted(rows, key=lambda o: (o.captured_at, o.observation_id))
