"""Project manifests: the single configuration artifact shared by the
authoring CLI, the reference client, and the server.

A manifest names the project, declares its label set and capture policy,
and optionally pins a model bundle and a server endpoint. The canonical
serialization (sorted-key minimal JSON) is byte-stable, so manifests can be
digested and diffed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from .errors import InvalidManifest, InvalidSlug
from .jsoncanon import canonical_json, parse_json

SCHEMA_VERSION = 1
SLUG_RE = re.compile(r"^[a-z0-9-]{3,64}$")
MEDIA_TYPES = ("image", "video")
DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")

DEFAULT_LABEL_COLOR = (0, 114, 255)


@dataclass
class LabelDef:
    id: int
    name: str
    display_color: tuple[int, int, int] = DEFAULT_LABEL_COLOR

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "display_color": list(self.display_color),
        }

    @classmethod
    def from_dict(cls, d: Any) -> "LabelDef":
        if not isinstance(d, dict):
            return cls(id=d, name="", display_color=d)
        color = d.get("display_color", DEFAULT_LABEL_COLOR)
        if isinstance(color, list):
            color = tuple(color)
        return cls(id=d.get("id"), name=d.get("name"), display_color=color)


@dataclass
class CaptureConfig:
    require_gps: bool = True
    media_types: tuple[str, ...] = ("image",)
    min_confidence_to_suggest: float = 0.5

    def to_dict(self) -> dict[str, Any]:
        return {
            "require_gps": self.require_gps,
            "media_types": list(self.media_types),
            "min_confidence_to_suggest": self.min_confidence_to_suggest,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "CaptureConfig":
        if not isinstance(d, dict):
            return cls(require_gps=d, media_types=d, min_confidence_to_suggest=d)
        media = d.get("media_types", ())
        if isinstance(media, list):
            media = tuple(media)
        return cls(
            require_gps=d.get("require_gps"),
            media_types=media,
            min_confidence_to_suggest=d.get("min_confidence_to_suggest"),
        )


@dataclass
class ModelRef:
    engine_id: str
    version: str
    digest: str

    def to_dict(self) -> dict[str, Any]:
        return {"engine_id": self.engine_id, "version": self.version, "digest": self.digest}

    @classmethod
    def from_dict(cls, d: Any) -> "ModelRef":
        if not isinstance(d, dict):
            return cls(engine_id=d, version=d, digest=d)
        return cls(
            engine_id=d.get("engine_id"),
            version=d.get("version"),
            digest=d.get("digest"),
        )


@dataclass
class ProjectManifest:
    project_id: str
    name: str
    description: str = ""
    schema_version: int = SCHEMA_VERSION
    labels: list[LabelDef] = field(default_factory=list)
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    model_ref: ModelRef | None = None
    server_base: str | None = None
    tutorial: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "schema_version": self.schema_version,
            "project_id": self.project_id,
            "name": self.name,
            "description": self.description,
            "labels": [lab.to_dict() for lab in self.labels],
            "capture": self.capture.to_dict(),
            "tutorial": list(self.tutorial),
        }
        if self.model_ref is not None:
            d["model_ref"] = self.model_ref.to_dict()
        if self.server_base is not None:
            d["server_base"] = self.server_base
        return d

    @classmethod
    def from_dict(cls, d: Any) -> "ProjectManifest":
        """Best-effort construction; never raises on shape problems.

        Whatever it cannot interpret it carries through unchanged so that
        validate_manifest can report the violation instead of crashing.
        """
        if not isinstance(d, dict):
            d = {}
        labels = d.get("labels", [])
        if isinstance(labels, list):
            labels = [LabelDef.from_dict(x) for x in labels]
        model_ref = d.get("model_ref")
        if model_ref is not None:
            model_ref = ModelRef.from_dict(model_ref)
        tutorial = d.get("tutorial", [])
        if isinstance(tutorial, list):
            tutorial = list(tutorial)
        return cls(
            project_id=d.get("project_id"),
            name=d.get("name"),
            description=d.get("description", ""),
            schema_version=d.get("schema_version"),
            labels=labels,
            capture=CaptureConfig.from_dict(d.get("capture", {})),
            model_ref=model_ref,
            server_base=d.get("server_base"),
            tutorial=tutorial,
        )


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"path": self.path, "message": self.message}


def is_valid_slug(value: Any) -> bool:
    return isinstance(value, str) and SLUG_RE.match(value) is not None


def new_from_template(project_id: str, name: str) -> ProjectManifest:
    """Blank project with the built-in defaults; always self-validates."""
    if not is_valid_slug(project_id):
        raise InvalidSlug(f"project_id must match [a-z0-9-]{{3,64}}, got {project_id!r}")
    return ProjectManifest(
        project_id=project_id,
        name=name,
        description="",
        schema_version=SCHEMA_VERSION,
        labels=[LabelDef(id=0, name="object", display_color=DEFAULT_LABEL_COLOR)],
        capture=CaptureConfig(
            require_gps=True,
            media_types=("image",),
            min_confidence_to_suggest=0.5,
        ),
        model_ref=None,
        server_base=None,
        tutorial=[],
    )


def _is_rgb(value: Any) -> bool:
    return (
        isinstance(value, (tuple, list))
        and len(value) == 3
        and all(isinstance(c, int) and not isinstance(c, bool) and 0 <= c <= 255 for c in value)
    )


def _is_fraction(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and 0.0 <= float(value) <= 1.0
    )


def validate_manifest(m: ProjectManifest) -> list[Violation]:
    """Every invariant violation, with a field path; empty list means valid.

    Total over arbitrary parsed input: wrong-typed fields become violations,
    never exceptions. Result is sorted by (path, message).
    """
    out: list[Violation] = []

    def bad(path: str, message: str) -> None:
        out.append(Violation(path, message))

    if not isinstance(m.schema_version, int) or isinstance(m.schema_version, bool):
        bad("schema_version", "must be an integer")
    elif m.schema_version != SCHEMA_VERSION:
        bad("schema_version", f"unsupported version {m.schema_version}, expected {SCHEMA_VERSION}")

    if not is_valid_slug(m.project_id):
        bad("project_id", "must match [a-z0-9-]{3,64}")

    if not isinstance(m.name, str) or not m.name:
        bad("name", "must be a non-empty string")

    if not isinstance(m.description, str):
        bad("description", "must be a string")

    if not isinstance(m.labels, list):
        bad("labels", "must be a list")
    elif not m.labels:
        bad("labels", "must be non-empty")
    else:
        for i, lab in enumerate(m.labels):
            if not isinstance(lab, LabelDef):
                bad(f"labels[{i}]", "must be a label object")
                continue
            if not isinstance(lab.id, int) or isinstance(lab.id, bool) or lab.id != i:
                bad(f"labels[{i}].id", f"ids must be contiguous from 0; expected {i}")
            if not isinstance(lab.name, str) or not lab.name:
                bad(f"labels[{i}].name", "must be a non-empty string")
            if not _is_rgb(lab.display_color):
                bad(f"labels[{i}].display_color", "must be an RGB triple of 0-255 integers")

    cap = m.capture
    if not isinstance(cap, CaptureConfig):
        bad("capture", "must be a capture config object")
    else:
        if not isinstance(cap.require_gps, bool):
            bad("capture.require_gps", "must be a boolean")
        if not isinstance(cap.media_types, tuple) or not cap.media_types:
            bad("capture.media_types", "must be a non-empty list")
        elif any(t not in MEDIA_TYPES for t in cap.media_types) or len(set(cap.media_types)) != len(cap.media_types):
            bad("capture.media_types", "must be a subset of {image, video} without duplicates")
        if not _is_fraction(cap.min_confidence_to_suggest):
            bad("capture.min_confidence_to_suggest", "must be a fraction in [0,1]")

    if m.model_ref is not None:
        ref = m.model_ref
        if not isinstance(ref, ModelRef):
            bad("model_ref", "must be a model reference object")
        else:
            if not isinstance(ref.engine_id, str) or not ref.engine_id:
                bad("model_ref.engine_id", "must be a non-empty string")
            if not isinstance(ref.version, str) or not ref.version:
                bad("model_ref.version", "must be a non-empty string")
            if not isinstance(ref.digest, str) or not DIGEST_RE.match(ref.digest or ""):
                bad("model_ref.digest", "must be 64 lowercase hex characters")

    if m.server_base is not None and (not isinstance(m.server_base, str) or not m.server_base):
        bad("server_base", "must be a non-empty URL string")

    if not isinstance(m.tutorial, list) or any(not isinstance(s, str) for s in m.tutorial):
        bad("tutorial", "must be a list of strings")

    return sorted(out, key=lambda v: (v.path, v.message))


def canonicalize(m: ProjectManifest) -> bytes:
    """Canonical JSON bytes of a valid manifest."""
    violations = validate_manifest(m)
    if violations:
        raise InvalidManifest(violations)
    return canonical_json(m.to_dict())


def parse_manifest(data: bytes | str | dict) -> ProjectManifest:
    """Parse JSON (or an already-parsed dict) into a manifest value.

    Does not validate; pair with validate_manifest.
    """
    if isinstance(data, (bytes, str)):
        data = parse_json(data)
    return ProjectManifest.from_dict(data)
