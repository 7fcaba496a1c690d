"""Model bundles: the platform-neutral packaged model artifact.

A bundle is an uncompressed tar archive with exactly three entries, in
lexicographic order, all timestamps and ownership zeroed:

    bundle.json   canonical JSON of the bundle metadata
    labels.json   canonical JSON list of label definitions
    model.bin     opaque engine payload

With the metadata canonical and the tar fields pinned, identical inputs
produce identical archive bytes, so the SHA-256 of the archive identifies
the model everywhere (manifests, servers, clients).
"""

from __future__ import annotations

import hashlib
import io
import tarfile
from dataclasses import dataclass
from typing import Any, Callable

from . import refdet
from .clock import EPOCH_ISO, is_utc_iso
from .errors import (
    DigestMismatch,
    InvalidMeta,
    LabelCountMismatch,
    MalformedArchive,
    UnknownEngine,
)
from .jsoncanon import canonical_json, parse_json
from .manifest import LabelDef
from .semver import is_semver

ENTRY_META = "bundle.json"
ENTRY_LABELS = "labels.json"
ENTRY_PAYLOAD = "model.bin"
ENTRY_ORDER = (ENTRY_META, ENTRY_LABELS, ENTRY_PAYLOAD)

MIN_INPUT_PX = 16


@dataclass(frozen=True)
class InputSpec:
    width: int
    height: int
    channels: int = 3

    def to_dict(self) -> dict[str, int]:
        return {"width": self.width, "height": self.height, "channels": self.channels}

    @classmethod
    def from_dict(cls, d: Any) -> "InputSpec":
        return cls(d["width"], d["height"], d.get("channels", 3))


@dataclass(frozen=True)
class BundleMeta:
    engine_id: str
    version: str
    label_count: int
    input: InputSpec
    created_at: str = EPOCH_ISO

    def to_dict(self) -> dict[str, Any]:
        return {
            "engine_id": self.engine_id,
            "version": self.version,
            "label_count": self.label_count,
            "input": self.input.to_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "BundleMeta":
        return cls(
            engine_id=d["engine_id"],
            version=d["version"],
            label_count=d["label_count"],
            input=InputSpec.from_dict(d["input"]),
            created_at=d["created_at"],
        )


def validate_meta(meta: BundleMeta) -> None:
    if not isinstance(meta.engine_id, str) or not meta.engine_id:
        raise InvalidMeta("engine_id must be a non-empty string")
    if not isinstance(meta.version, str) or not is_semver(meta.version):
        raise InvalidMeta(f"version must be semver X.Y.Z, got {meta.version!r}")
    if not isinstance(meta.label_count, int) or meta.label_count < 1:
        raise InvalidMeta("label_count must be >= 1")
    if meta.input.width < MIN_INPUT_PX or meta.input.height < MIN_INPUT_PX:
        raise InvalidMeta(f"input dimensions must be >= {MIN_INPUT_PX}px")
    if meta.input.channels != 3:
        raise InvalidMeta("input channels must be 3")
    if not is_utc_iso(meta.created_at):
        raise InvalidMeta("created_at must be a UTC timestamp")


# Engine registry: engine_id -> payload decoder (payload, label_count) -> model.
ENGINES: dict[str, Callable[[bytes, int], Any]] = {
    refdet.ENGINE_ID: refdet.decode_payload,
}


def _deterministic_tar(entries: list[tuple[str, bytes]]) -> bytes:
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tf:
        for name, data in entries:
            info = tarfile.TarInfo(name)
            info.size = len(data)
            info.mtime = 0
            info.mode = 0o644
            info.uid = 0
            info.gid = 0
            info.uname = ""
            info.gname = ""
            tf.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def pack_bundle(
    meta: BundleMeta,
    model_payload: bytes,
    labels: list[LabelDef],
) -> tuple[bytes, str]:
    """Build the archive; returns (bundle bytes, sha256 hex digest)."""
    validate_meta(meta)
    if len(labels) != meta.label_count:
        raise LabelCountMismatch(
            f"meta declares {meta.label_count} labels, got {len(labels)}"
        )
    entries = [
        (ENTRY_META, canonical_json(meta.to_dict())),
        (ENTRY_LABELS, canonical_json([lab.to_dict() for lab in labels])),
        (ENTRY_PAYLOAD, model_payload),
    ]
    data = _deterministic_tar(entries)
    return data, hashlib.sha256(data).hexdigest()


def bundle_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def open_bundle(
    data: bytes,
    expected_digest: str | None = None,
) -> tuple[BundleMeta, list[LabelDef], bytes]:
    """Verify and unpack an archive into (meta, labels, payload)."""
    if expected_digest is not None and bundle_digest(data) != expected_digest:
        raise DigestMismatch("bundle bytes do not match the expected digest")
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r") as tf:
            members = tf.getmembers()
            names = tuple(m.name for m in members)
            if names != ENTRY_ORDER:
                raise MalformedArchive(
                    f"expected entries {list(ENTRY_ORDER)}, got {list(names)}"
                )
            parts = {m.name: tf.extractfile(m).read() for m in members}
    except tarfile.TarError as exc:
        raise MalformedArchive(f"not a bundle archive: {exc}") from exc

    try:
        meta = BundleMeta.from_dict(parse_json(parts[ENTRY_META]))
        raw_labels = parse_json(parts[ENTRY_LABELS])
        labels = [LabelDef.from_dict(x) for x in raw_labels]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedArchive(f"unreadable bundle metadata: {exc}") from exc

    try:
        validate_meta(meta)
    except InvalidMeta as exc:
        raise MalformedArchive(str(exc)) from exc
    if len(labels) != meta.label_count:
        raise MalformedArchive("labels.json length does not match label_count")
    if meta.engine_id not in ENGINES:
        raise UnknownEngine(f"engine {meta.engine_id!r} is not registered")
    return meta, labels, parts[ENTRY_PAYLOAD]


@dataclass(frozen=True)
class LoadedBundle:
    """A verified bundle with its engine payload decoded, ready to run."""

    meta: BundleMeta
    labels: list[LabelDef]
    model: Any
    digest: str

    @classmethod
    def from_bytes(cls, data: bytes, expected_digest: str | None = None) -> "LoadedBundle":
        meta, labels, payload = open_bundle(data, expected_digest)
        model = ENGINES[meta.engine_id](payload, meta.label_count)
        return cls(meta=meta, labels=labels, model=model, digest=bundle_digest(data))

    def infer(self, image) -> list:
        return refdet.refdet_infer(self.model, image)
