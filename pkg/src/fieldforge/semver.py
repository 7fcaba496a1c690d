"""Minimal semver: MAJOR.MINOR.PATCH with numeric components."""

from __future__ import annotations

import re

_SEMVER_RE = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")


def parse_semver(version: str) -> tuple[int, int, int]:
    """Parse ``X.Y.Z`` into an ordering tuple. Raises ValueError otherwise."""
    m = _SEMVER_RE.match(version)
    if not m:
        raise ValueError(f"not a semver string: {version!r}")
    return (int(m.group(1)), int(m.group(2)), int(m.group(3)))


def is_semver(version: str) -> bool:
    return _SEMVER_RE.match(version) is not None


def semver_newer(candidate: str, current: str) -> bool:
    """True iff candidate is strictly newer than current."""
    return parse_semver(candidate) > parse_semver(current)
