"""`fieldforge-server` - run the project server over a storage root."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from ..api import create_app
from ..registry import ProjectRegistry


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fieldforge-server", description=__doc__)
    parser.add_argument("--root", required=True, help="storage root directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8571)
    parser.add_argument("--quota-bytes", type=int, default=None,
                        help="per-project media byte quota (default unlimited)")
    args = parser.parse_args(argv)

    registry = ProjectRegistry(args.root, quota_bytes=args.quota_bytes)
    app = create_app(registry)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
