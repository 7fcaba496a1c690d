"""`fieldsim` - headless reference participant client.

    fieldsim capture STORE --package FILE --images DIR    record observations
    fieldsim sync STORE [--server URL] [--select-all]     upload selected ones

Capture works fully offline. GPS comes from per-image sidecar files named
`<image>.gps` (e.g. `beach1.png.gps`) containing `lat,lon[,accuracy[,heading]]`.
For every captured image an overlay JSON (detections with label names and
colors) is written under STORE/overlays/ for inspection.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from .. import errors as E
from ..apppack import open_app_package
from ..capture import SensorFrame
from ..clock import utc_now_iso
from ..jsoncanon import canonical_json
from ..manifest import canonicalize
from ..sync import SyncClient, SyncPolicy, Workspace, run_sync
from .common import (
    EXIT_INVALID,
    EXIT_ITEM_FAILURES,
    EXIT_OK,
    EXIT_UNREACHABLE,
    diag,
    emit,
    resolve_server,
)


def _parse_sidecar(path: Path) -> SensorFrame:
    fields = path.read_text().strip().split(",")
    if len(fields) < 2:
        raise ValueError(f"{path}: expected lat,lon[,accuracy[,heading]]")
    lat, lon = float(fields[0]), float(fields[1])
    accuracy = float(fields[2]) if len(fields) > 2 else 0.0
    heading = float(fields[3]) if len(fields) > 3 else 0.0
    return SensorFrame(
        latitude=lat,
        longitude=lon,
        gps_accuracy=accuracy,
        heading=heading,
        captured_at=utc_now_iso(),
    )


def cmd_capture(args) -> int:
    store_dir = Path(args.store)
    try:
        manifest, bundle_bytes = open_app_package(Path(args.package).read_bytes())
    except (E.FieldForgeError, FileNotFoundError) as exc:
        diag(f"error: cannot open package: {exc}")
        return EXIT_INVALID

    workspace = Workspace(store_dir)
    if not workspace.manifest_path.exists():
        workspace.install(canonicalize(manifest), bundle_bytes)
    model = workspace.load_bundle()
    project = workspace.manifest()

    images_dir = Path(args.images)
    if not images_dir.is_dir():
        diag(f"error: {images_dir} is not a directory")
        return EXIT_INVALID

    overlays_dir = store_dir / "overlays"
    overlays_dir.mkdir(parents=True, exist_ok=True)
    label_names = {lab.id: lab.name for lab in project.labels}
    label_colors = {lab.id: list(lab.display_color) for lab in project.labels}

    rows = []
    failures = 0
    for image_path in sorted(images_dir.glob("*.png")):
        sidecar = image_path.parent / (image_path.name + ".gps")
        try:
            sensor = _parse_sidecar(sidecar) if sidecar.exists() else None
            obs = workspace.store.record_observation(
                project, image_path.read_bytes(), sensor, model
            )
        except (E.FieldForgeError, ValueError) as exc:
            failures += 1
            diag(f"skipped {image_path.name}: {exc}")
            continue
        overlay = {
            "digest": obs.content_digest,
            "model_version": obs.model_version,
            "detections": [
                {
                    "label_id": d.label_id,
                    "label_name": label_names.get(d.label_id, ""),
                    "color": label_colors.get(d.label_id, [0, 0, 0]),
                    "bbox": d.bbox.to_dict(),
                    "confidence": d.confidence,
                }
                for d in obs.detections
            ],
        }
        (overlays_dir / f"{obs.content_digest}.json").write_bytes(canonical_json(overlay))
        rows.append({
            "file": image_path.name,
            "observation_id": obs.observation_id,
            "content_digest": obs.content_digest,
            "detections": len(obs.detections),
        })

    emit({"captured": len(rows), "failed": failures, "observations": rows})
    return EXIT_OK if failures == 0 else EXIT_INVALID


def cmd_sync(args) -> int:
    workspace = Workspace(Path(args.store))
    if not workspace.manifest_path.exists():
        diag(f"error: {workspace.manifest_path} not found; run `fieldsim capture` first")
        return EXIT_INVALID
    server = resolve_server(args.server)
    if server is None:
        diag("error: no server URL (use --server or FIELDFORGE_SERVER)")
        return EXIT_INVALID

    project = workspace.manifest()
    client = SyncClient(httpx.Client(base_url=server, timeout=30.0), token=args.token)
    try:
        client.get_manifest(project.project_id)  # reachability probe
    except httpx.TransportError as exc:
        diag(f"error: server unreachable: {exc}")
        return EXIT_UNREACHABLE
    except E.FieldForgeError:
        pass  # reachable but e.g. project missing: per-item failures will say so

    if args.select_all:
        for obs in workspace.store.list_observations("captured"):
            workspace.store.set_selected(obs.observation_id, True)

    policy = SyncPolicy(
        max_retries=args.max_retries,
        chunk_size=args.chunk_size,
        fail_after_bytes=args.fail_after_bytes,
    )
    report = run_sync(workspace, client, policy)
    emit(report.to_dict())
    return EXIT_OK if report.failed == 0 else EXIT_ITEM_FAILURES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="record observations from a directory of PNGs")
    p.add_argument("store")
    p.add_argument("--package", required=True, help="app package from `forge build-app`")
    p.add_argument("--images", required=True, help="directory of .png files")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("sync", help="upload selected observations")
    p.add_argument("store")
    p.add_argument("--server", help="server base URL (default $FIELDFORGE_SERVER)")
    p.add_argument("--select-all", action="store_true", help="select every captured observation first")
    p.add_argument("--chunk-size", type=int, default=SyncPolicy().chunk_size)
    p.add_argument("--max-retries", type=int, default=SyncPolicy().max_retries)
    p.add_argument("--fail-after-bytes", type=int, default=None,
                   help="test hook: kill the connection after N media bytes")
    p.add_argument("--token", help="opaque bearer token forwarded to the server")
    p.set_defaults(func=cmd_sync)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
