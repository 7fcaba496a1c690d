"""HTTP/JSON wire surface of the server.

Thin translation layer only: parses requests, calls the registry and upload
manager, and maps domain errors onto status codes with ``{code, message}``
bodies. Bodies that have a canonical byte form (manifests, snapshots) are
returned verbatim from storage.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import errors as E
from .jsoncanon import parse_json
from .manifest import parse_manifest
from .refdet import RefDetModel, validate_model
from .registry import ProjectRegistry, ReviewDecision
from .uploads import UploadManager
from .clock import utc_now_iso

STATUS_BY_ERROR: list[tuple[type, int]] = [
    (E.UnknownProject, 404),
    (E.UnknownObservation, 404),
    (E.UnknownSession, 404),
    (E.NoModel, 404),
    (E.MediaMissing, 404),
    (E.DuplicateProject, 409),
    (E.StaleVersion, 409),
    (E.OffsetMismatch, 409),
    (E.Incomplete, 409),
    (E.SessionClosed, 409),
    (E.NothingReviewed, 409),
    (E.QuotaExceeded, 409),
    (E.ChunkTooLarge, 413),
    (E.DigestMismatch, 422),
    (E.RecordInvalid, 422),
    (E.MalformedDecision, 422),
    (E.InvalidManifest, 422),
    (E.LabelMismatch, 422),
    (E.MalformedArchive, 422),
    (E.UnknownEngine, 422),
    (E.BadCursor, 400),
    (E.InvalidSlug, 400),
]


def _status_for(exc: E.FieldForgeError) -> int:
    for klass, status in STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 400


async def _json_body(request: Request):
    try:
        return parse_json(await request.body())
    except (ValueError, UnicodeDecodeError) as exc:
        raise E.RecordInvalid(f"body is not valid JSON: {exc}") from exc


def create_app(registry: ProjectRegistry) -> FastAPI:
    app = FastAPI(title="fieldforge server", docs_url=None, redoc_url=None)
    uploads = UploadManager(registry)
    app.state.registry = registry
    app.state.uploads = uploads

    @app.exception_handler(E.FieldForgeError)
    async def handle_domain_error(request: Request, exc: E.FieldForgeError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": exc.message},
        )

    # framework-raised errors must carry the same {code, message} body shape
    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad_request", "message": str(exc.errors()[:1])},
        )

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(request: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": "http_error", "message": str(exc.detail)},
        )

    # -- registry ---------------------------------------------------------

    @app.post("/v1/projects")
    async def create_project(request: Request):
        manifest = parse_manifest(await _json_body(request))
        registry.create_project(manifest)
        return {"project_id": manifest.project_id}

    @app.get("/v1/projects/{project_id}/manifest")
    async def get_manifest(project_id: str):
        return JSONResponse(content=registry.manifest(project_id).to_dict())

    @app.post("/v1/projects/{project_id}/model")
    async def publish_model(project_id: str, request: Request):
        meta = registry.publish_model(project_id, await request.body())
        return meta.to_dict()

    @app.get("/v1/projects/{project_id}/model")
    async def model_update(project_id: str, current: str | None = None):
        try:
            update = registry.check_model_update(project_id, current)
        except ValueError as exc:  # unparseable ?current=
            raise E.RecordInvalid(str(exc)) from exc
        if update is None:
            return Response(status_code=204)
        meta, digest = update
        return {"meta": meta.to_dict(), "digest": digest}

    @app.get("/v1/projects/{project_id}/model/download")
    async def model_download(project_id: str):
        return Response(
            content=registry.model_bytes(project_id),
            media_type="application/octet-stream",
        )

    @app.get("/v1/projects/{project_id}/media/{digest}")
    async def get_media(project_id: str, digest: str):
        return Response(
            content=registry.observation_media(project_id, digest),
            media_type="image/png",
        )

    # -- uploads ----------------------------------------------------------

    @app.post("/v1/projects/{project_id}/uploads")
    async def begin_upload(project_id: str, request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise E.RecordInvalid("upload request must be a JSON object")
        session = uploads.begin_upload(
            project_id,
            observation_id=body.get("observation_id"),
            content_digest=body.get("content_digest"),
            total_size=body.get("total_size"),
        )
        return {
            "session_id": session.session_id,
            "committed_offset": session.committed_offset(),
            "state": session.state,
        }

    @app.get("/v1/uploads/{session_id}")
    async def session_status(session_id: str):
        return uploads.get_session(session_id).to_dict()

    @app.put("/v1/uploads/{session_id}/chunks")
    async def put_chunk(session_id: str, request: Request, offset: int):
        committed = uploads.put_chunk(session_id, offset, await request.body())
        return {"committed_offset": committed}

    @app.post("/v1/uploads/{session_id}/complete")
    async def complete_upload(session_id: str, request: Request):
        stored = uploads.complete_upload(session_id, await _json_body(request))
        return {"observation_id": stored.observation_id}

    # -- observations / review -------------------------------------------

    @app.get("/v1/projects/{project_id}/observations")
    async def list_observations(
        project_id: str,
        reviewed: str | None = None,
        verdict: str | None = None,
        limit: int | None = None,
        cursor: str | None = None,
    ):
        reviewed_flag = None
        if reviewed is not None and reviewed != "":
            if reviewed not in ("true", "false"):
                raise E.BadCursor("reviewed filter must be 'true' or 'false'")
            reviewed_flag = reviewed == "true"
        if verdict == "":
            verdict = None
        page, next_cursor = registry.list_observations(
            project_id,
            reviewed=reviewed_flag,
            verdict=verdict,
            limit=limit,
            cursor=cursor,
        )
        return {
            "observations": [o.to_dict() for o in page],
            "next_cursor": next_cursor,
        }

    @app.get("/v1/observations/{observation_id}")
    async def get_observation(observation_id: str):
        project_id, obs = registry.find_observation(observation_id)
        body = obs.to_dict()
        body["media_url"] = f"/v1/projects/{project_id}/media/{obs.content_digest}"
        return body

    @app.post("/v1/observations/{observation_id}/review")
    async def submit_review(observation_id: str, request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise E.MalformedDecision("review body must be a JSON object")
        project_id, _ = registry.find_observation(observation_id)
        try:
            decision = ReviewDecision.from_dict(
                {**body, "decided_at": body.get("decided_at") or utc_now_iso()}
            )
        except (KeyError, TypeError) as exc:
            raise E.MalformedDecision(f"malformed decision: {exc}") from exc
        stored = registry.submit_review(project_id, observation_id, decision)
        return stored.to_dict()

    @app.post("/v1/observations/{observation_id}/rescore")
    async def rescore(observation_id: str, request: Request):
        body = await _json_body(request)
        project_id, _ = registry.find_observation(observation_id)
        try:
            model = RefDetModel.from_dict(body)
        except (KeyError, TypeError) as exc:
            raise E.RecordInvalid(f"malformed verification model: {exc}") from exc
        try:
            validate_model(model, len(registry.manifest(project_id).labels))
        except E.MalformedArchive as exc:
            raise E.RecordInvalid(exc.message) from exc
        dets = registry.rescore_observation(project_id, observation_id, model)
        return {"server_detections": [d.to_dict() for d in dets]}

    # -- snapshots ---------------------------------------------------------

    @app.post("/v1/projects/{project_id}/snapshots")
    async def export_snapshot(project_id: str):
        snapshot = registry.export_snapshot(project_id)
        return Response(
            content=registry.snapshot_bytes(project_id, snapshot.snapshot_id),
            media_type="application/json",
        )

    @app.get("/v1/projects/{project_id}/snapshots/{snapshot_id}")
    async def get_snapshot(project_id: str, snapshot_id: int):
        return Response(
            content=registry.snapshot_bytes(project_id, snapshot_id),
            media_type="application/json",
        )

    return app
