"""`forge` - researcher-side authoring commands.

    forge init DIR --id ID --name NAME     start a project from the template
    forge validate DIR                     check project.json
    forge pack DIR --model FILE ...        package a detection model bundle
    forge build-app DIR --bundle FILE      assemble the app package
    forge publish DIR [--server URL]       create/refresh the project server-side

Only `publish` touches the network.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from .. import errors as E
from ..apppack import build_app_package, open_app_package, package_digest
from ..bundle import BundleMeta, InputSpec, pack_bundle
from ..clock import EPOCH_ISO, is_utc_iso
from ..jsoncanon import parse_json
from ..manifest import canonicalize, new_from_template, parse_manifest, validate_manifest
from ..refdet import ENGINE_ID, RefDetModel, encode_payload, validate_model
from ..sync import SyncClient
from .common import EXIT_INVALID, EXIT_OK, EXIT_ITEM_FAILURES, EXIT_UNREACHABLE, diag, emit, resolve_server

DEFAULT_INPUT_PX = 320
PACKAGE_NAME = "app.pkg"


def cmd_init(args) -> int:
    target = Path(args.dir)
    if target.exists() and any(target.iterdir()):
        diag(f"error: {target} is not empty")
        return EXIT_INVALID
    try:
        manifest = new_from_template(args.id, args.name)
    except E.InvalidSlug as exc:
        diag(f"error: {exc.message}")
        return EXIT_INVALID
    target.mkdir(parents=True, exist_ok=True)
    (target / "project.json").write_bytes(canonicalize(manifest))
    emit({"project_id": manifest.project_id, "path": str(target / "project.json")})
    return EXIT_OK


def _load_manifest(project_dir: Path):
    path = project_dir / "project.json"
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run `forge init` first")
    return parse_manifest(path.read_bytes())


def cmd_validate(args) -> int:
    try:
        manifest = _load_manifest(Path(args.dir))
    except (FileNotFoundError, ValueError) as exc:
        diag(f"error: {exc}")
        return EXIT_INVALID
    violations = validate_manifest(manifest)
    emit({
        "valid": not violations,
        "violations": [v.to_dict() for v in violations],
    })
    return EXIT_OK if not violations else EXIT_ITEM_FAILURES


def cmd_pack(args) -> int:
    project_dir = Path(args.dir)
    try:
        manifest = _load_manifest(project_dir)
        violations = validate_manifest(manifest)
        if violations:
            raise E.InvalidManifest(violations)
        spec = parse_json(Path(args.model).read_bytes())
        model = RefDetModel.from_dict(spec)
        validate_model(model, len(manifest.labels))
        input_spec = InputSpec.from_dict(spec.get("input", {
            "width": DEFAULT_INPUT_PX, "height": DEFAULT_INPUT_PX,
        }))
        created_at = spec.get("created_at", EPOCH_ISO)
        if not is_utc_iso(created_at):
            raise E.InvalidMeta("created_at in the model file must be a UTC timestamp")
        meta = BundleMeta(
            engine_id=ENGINE_ID,
            version=args.version,
            label_count=len(manifest.labels),
            input=input_spec,
            created_at=created_at,
        )
        data, digest = pack_bundle(meta, encode_payload(model), manifest.labels)
    except (E.FieldForgeError, FileNotFoundError, ValueError, KeyError, TypeError) as exc:
        diag(f"error: {exc}")
        return EXIT_INVALID
    out = Path(args.out) if args.out else project_dir / f"model-{args.version}.bundle"
    out.write_bytes(data)
    emit({"path": str(out), "digest": digest, "version": args.version})
    return EXIT_OK


def cmd_build_app(args) -> int:
    project_dir = Path(args.dir)
    try:
        manifest = _load_manifest(project_dir)
        bundle_bytes = Path(args.bundle).read_bytes()
        package, digest, pinned = build_app_package(manifest, bundle_bytes)
    except (E.FieldForgeError, FileNotFoundError, ValueError) as exc:
        diag(f"error: {exc}")
        return EXIT_INVALID
    out = Path(args.out) if args.out else project_dir / PACKAGE_NAME
    out.write_bytes(package)
    # keep the project directory in agreement with what was packaged
    (project_dir / "project.json").write_bytes(canonicalize(pinned))
    emit({"path": str(out), "package_digest": digest})
    return EXIT_OK


def cmd_publish(args) -> int:
    project_dir = Path(args.dir)
    package_path = Path(args.package) if args.package else project_dir / PACKAGE_NAME
    server = resolve_server(args.server)
    if server is None:
        diag("error: no server URL (use --server or FIELDFORGE_SERVER)")
        return EXIT_INVALID
    try:
        manifest, bundle_bytes = open_app_package(package_path.read_bytes())
    except (E.FieldForgeError, FileNotFoundError) as exc:
        diag(f"error: {exc}")
        return EXIT_INVALID

    client = SyncClient(httpx.Client(base_url=server, timeout=30.0), token=args.token)
    try:
        try:
            client.get_manifest(manifest.project_id)
        except E.UnknownProject:
            try:
                client.create_project(manifest)
            except E.DuplicateProject:
                pass  # lost a race; the project exists now
        try:
            meta = client.publish_model(manifest.project_id, bundle_bytes)
            emit({
                "project_id": manifest.project_id,
                "version": meta["version"],
                "status": "published",
            })
            return EXIT_OK
        except E.StaleVersion as exc:
            published = client.check_model_update(manifest.project_id, None)
            if published is not None and published["digest"] == manifest.model_ref.digest:
                emit({
                    "project_id": manifest.project_id,
                    "version": published["meta"]["version"],
                    "status": "unchanged",
                })
                return EXIT_OK
            diag(f"error: {exc.message}")
            return EXIT_INVALID
        except E.FieldForgeError as exc:
            diag(f"error: {exc.message}")
            return EXIT_INVALID
    except httpx.TransportError as exc:
        diag(f"error: server unreachable: {exc}")
        return EXIT_UNREACHABLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a project directory from the blank template")
    p.add_argument("dir")
    p.add_argument("--id", required=True, help="project id (lowercase slug)")
    p.add_argument("--name", required=True, help="human-readable project name")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("validate", help="validate project.json")
    p.add_argument("dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pack", help="pack a detection model into a bundle")
    p.add_argument("dir")
    p.add_argument("--model", required=True, help="refdet model JSON file")
    p.add_argument("--version", required=True, help="bundle semver, e.g. 1.0.0")
    p.add_argument("--out", help="output path (default DIR/model-<version>.bundle)")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("build-app", help="assemble the app package from manifest + bundle")
    p.add_argument("dir")
    p.add_argument("--bundle", required=True, help="bundle file from `forge pack`")
    p.add_argument("--out", help=f"output path (default DIR/{PACKAGE_NAME})")
    p.set_defaults(func=cmd_build_app)

    p = sub.add_parser("publish", help="create the project and publish its bundle")
    p.add_argument("dir")
    p.add_argument("--package", help=f"app package (default DIR/{PACKAGE_NAME})")
    p.add_argument("--server", help="server base URL (default $FIELDFORGE_SERVER)")
    p.add_argument("--token", help="opaque bearer token forwarded to the server")
    p.set_defaults(func=cmd_publish)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
