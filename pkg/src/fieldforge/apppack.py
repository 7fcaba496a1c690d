"""App packages: the client-consumable artifact a researcher ships.

A package is a deterministic tar (same conventions as model bundles) with
two entries in lexicographic order:

    model.bundle    the packaged model archive
    project.json    canonical manifest, model_ref pinned to that bundle

The manifest inside must reference the embedded bundle by digest, so a
client can verify the pair before trusting either.
"""

from __future__ import annotations

import hashlib
import io
import tarfile

from .bundle import bundle_digest, open_bundle, _deterministic_tar
from .errors import DigestMismatch, LabelMismatch, MalformedArchive
from .manifest import ModelRef, ProjectManifest, canonicalize, parse_manifest

ENTRY_BUNDLE = "model.bundle"
ENTRY_MANIFEST = "project.json"
ENTRY_ORDER = (ENTRY_BUNDLE, ENTRY_MANIFEST)


def build_app_package(manifest: ProjectManifest, bundle_bytes: bytes) -> tuple[bytes, str, ProjectManifest]:
    """Assemble a package; returns (package bytes, digest, pinned manifest).

    The returned manifest carries the model_ref pointing at the bundle; the
    caller is expected to persist it back to the project directory so the
    directory and the package agree.
    """
    meta, labels, _ = open_bundle(bundle_bytes)
    manifest_pairs = [(lab.id, lab.name) for lab in manifest.labels]
    bundle_pairs = [(lab.id, lab.name) for lab in labels]
    if manifest_pairs != bundle_pairs:
        raise LabelMismatch("bundle labels do not match the manifest labels")

    digest = bundle_digest(bundle_bytes)
    pinned = ProjectManifest.from_dict(manifest.to_dict())
    pinned.model_ref = ModelRef(engine_id=meta.engine_id, version=meta.version, digest=digest)

    entries = [
        (ENTRY_BUNDLE, bundle_bytes),
        (ENTRY_MANIFEST, canonicalize(pinned)),
    ]
    data = _deterministic_tar(entries)
    return data, hashlib.sha256(data).hexdigest(), pinned


def open_app_package(data: bytes) -> tuple[ProjectManifest, bytes]:
    """Verify a package and return (manifest, bundle bytes)."""
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
        raise MalformedArchive(f"not an app package: {exc}") from exc

    manifest = parse_manifest(parts[ENTRY_MANIFEST])
    bundle_bytes = parts[ENTRY_BUNDLE]
    if manifest.model_ref is None:
        raise MalformedArchive("package manifest has no model_ref")
    if manifest.model_ref.digest != bundle_digest(bundle_bytes):
        raise DigestMismatch("package manifest model_ref does not match the embedded bundle")
    open_bundle(bundle_bytes, expected_digest=manifest.model_ref.digest)
    return manifest, bundle_bytes


def package_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
