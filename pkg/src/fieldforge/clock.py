"""UTC timestamps in one fixed text form.

Format is ``YYYY-MM-DDTHH:MM:SS.ffffffZ`` (always 6 fractional digits) so that
lexicographic order equals chronological order, which cursors and journals
rely on.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{6}Z$")

EPOCH_ISO = "1970-01-01T00:00:00.000000Z"


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def is_utc_iso(value: str) -> bool:
    return isinstance(value, str) and _TS_RE.match(value) is not None
