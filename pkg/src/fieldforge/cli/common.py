"""Shared CLI conventions.

Machine-readable JSON goes to stdout, diagnostics to stderr. Documented exit
codes: 0 success, 1 completed with per-item failures, 2 invalid input or
server rejection, 3 server unreachable.
"""

from __future__ import annotations

import os
import sys
from typing import Any

from ..jsoncanon import canonical_json

EXIT_OK = 0
EXIT_ITEM_FAILURES = 1
EXIT_INVALID = 2
EXIT_UNREACHABLE = 3

SERVER_ENV = "FIELDFORGE_SERVER"


def emit(payload: Any) -> None:
    sys.stdout.write(canonical_json(payload).decode("utf-8") + "\n")


def diag(message: str) -> None:
    sys.stderr.write(message + "\n")


def resolve_server(flag_value: str | None) -> str | None:
    return flag_value or os.environ.get(SERVER_ENV)
