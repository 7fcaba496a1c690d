"""Shared error types.

Every error carries a stable ``code`` string that doubles as the wire-level
error code in HTTP error bodies ``{code, message}``.
"""

from __future__ import annotations


class FieldForgeError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# --- manifest ---

class InvalidSlug(FieldForgeError):
    code = "invalid_slug"


class InvalidManifest(FieldForgeError):
    code = "invalid_manifest"

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(f"{v.path}: {v.message}" for v in self.violations)
        super().__init__(f"manifest invalid: {detail}")


# --- model bundles / detection ---

class InvalidMeta(FieldForgeError):
    code = "invalid_meta"


class LabelCountMismatch(FieldForgeError):
    code = "label_count_mismatch"


class MalformedArchive(FieldForgeError):
    code = "malformed_archive"


class DigestMismatch(FieldForgeError):
    code = "digest_mismatch"


class UnknownEngine(FieldForgeError):
    code = "unknown_engine"


class ImageDecodeError(FieldForgeError):
    code = "image_decode_error"


# --- capture ---

class MissingSensor(FieldForgeError):
    code = "missing_sensor"


class StorageFull(FieldForgeError):
    code = "storage_full"


class UnknownObservation(FieldForgeError):
    code = "unknown_observation"


class IllegalTransition(FieldForgeError):
    code = "illegal_transition"


# --- sync / uploads ---

class UnknownProject(FieldForgeError):
    code = "unknown_project"


class QuotaExceeded(FieldForgeError):
    code = "quota_exceeded"


class OffsetMismatch(FieldForgeError):
    code = "offset_mismatch"

    def __init__(self, message: str = "", committed_offset: int = 0):
        super().__init__(message)
        self.committed_offset = committed_offset


class SessionClosed(FieldForgeError):
    code = "session_closed"


class ChunkTooLarge(FieldForgeError):
    code = "chunk_too_large"


class Incomplete(FieldForgeError):
    code = "incomplete"


class RecordInvalid(FieldForgeError):
    code = "record_invalid"


class UnknownSession(FieldForgeError):
    code = "unknown_session"


# --- server registry / review ---

class DuplicateProject(FieldForgeError):
    code = "duplicate_project"


class StaleVersion(FieldForgeError):
    code = "stale_version"


class NoModel(FieldForgeError):
    code = "no_model"


class LabelMismatch(FieldForgeError):
    code = "label_mismatch"


class MalformedDecision(FieldForgeError):
    code = "malformed_decision"


class MediaMissing(FieldForgeError):
    code = "media_missing"


class NothingReviewed(FieldForgeError):
    code = "nothing_reviewed"


class BadCursor(FieldForgeError):
    code = "bad_cursor"
