"""Canonical JSON encoding.

One byte representation per value: UTF-8, object keys sorted lexicographically,
no insignificant whitespace, integers as plain decimals, floats as Python's
shortest round-trip repr. NaN/Infinity are rejected (not valid JSON).

All persisted artifacts (manifests, bundle metadata, journals, snapshots) go
through this module so content digests are stable across runs and machines.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_json(value: Any) -> bytes:
    return json.dumps(
        value,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def canonical_json_line(value: Any) -> bytes:
    """One NDJSON line, newline-terminated."""
    return canonical_json(value) + b"\n"


def parse_json(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)
