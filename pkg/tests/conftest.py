import threading
import time
import warnings

import numpy as np
import pytest
import uvicorn

from fieldforge import (
    BundleMeta,
    InputSpec,
    LabelDef,
    ProjectRegistry,
    RefDetModel,
    new_from_template,
    pack_bundle,
)
from fieldforge.api import create_app
from fieldforge.clock import EPOCH_ISO
from fieldforge.imaging import encode_png
from fieldforge.refdet import ENGINE_ID, encode_payload

warnings.filterwarnings("ignore", message="Using `httpx`")

# Two prototype colors far apart and far from the backgrounds used in tests.
PROTO_A = (200, 30, 40)
PROTO_B = (30, 60, 200)
BACKGROUND = (128, 128, 128)


def two_label_manifest(project_id="rip-pilot", name="Rip Currents"):
    m = new_from_template(project_id, name)
    m.labels = [
        LabelDef(0, "rip current", (0, 114, 255)),
        LabelDef(1, "calm water", (30, 200, 90)),
    ]
    return m


def default_model(grid=2, score_threshold=0.75, nms_iou_threshold=0.5, max_detections=16):
    return RefDetModel(
        grid=grid,
        prototypes=(PROTO_A, PROTO_B),
        score_threshold=score_threshold,
        nms_iou_threshold=nms_iou_threshold,
        max_detections=max_detections,
    )


def make_bundle(manifest, model=None, version="1.0.0", created_at=EPOCH_ISO):
    model = model or default_model()
    meta = BundleMeta(
        engine_id=ENGINE_ID,
        version=version,
        label_count=len(manifest.labels),
        input=InputSpec(320, 320),
        created_at=created_at,
    )
    return pack_bundle(meta, encode_payload(model), manifest.labels)


def solid_image(color, width=32, height=32) -> np.ndarray:
    return np.full((height, width, 3), color, dtype=np.uint8)


def quadrant_image(top_left_color, rest_color, width=32, height=32) -> np.ndarray:
    img = np.full((height, width, 3), rest_color, dtype=np.uint8)
    img[: height // 2, : width // 2] = top_left_color
    return img


def solid_png(color, width=32, height=32) -> bytes:
    return encode_png(solid_image(color, width, height))


def noise_png(seed, width=48, height=48) -> bytes:
    """Incompressible media: PNG size ~ 3*W*H, so transfers span many chunks."""
    rng = np.random.default_rng(seed)
    return encode_png(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def manifest():
    return two_label_manifest()


@pytest.fixture
def registry(tmp_path):
    return ProjectRegistry(tmp_path / "server-root")


@pytest.fixture
def api_client(registry):
    from fastapi.testclient import TestClient

    with TestClient(create_app(registry)) as client:
        yield client


@pytest.fixture
def live_server(tmp_path):
    """A real uvicorn server on an ephemeral port, for CLI and e2e tests."""
    registry = ProjectRegistry(tmp_path / "live-server-root")
    app = create_app(registry)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}", registry
    server.should_exit = True
    thread.join(timeout=5)
