"""fieldforge: authoring tools, reference field client, and review server
for ML-guided data-collection projects."""

from .bundle import BundleMeta, InputSpec, LoadedBundle, open_bundle, pack_bundle
from .capture import Observation, ObservationStore, SensorFrame
from .detection import BBox, Detection, iou, nms, postprocess
from .manifest import (
    CaptureConfig,
    LabelDef,
    ModelRef,
    ProjectManifest,
    canonicalize,
    new_from_template,
    parse_manifest,
    validate_manifest,
)
from .refdet import RefDetModel, refdet_infer
from .registry import DatasetSnapshot, ProjectRegistry, ReviewDecision, StoredObservation
from .sync import SyncClient, SyncPolicy, SyncReport, Workspace, run_sync
from .uploads import UploadManager, UploadSession

__all__ = [
    "BBox",
    "BundleMeta",
    "CaptureConfig",
    "DatasetSnapshot",
    "Detection",
    "InputSpec",
    "LabelDef",
    "LoadedBundle",
    "ModelRef",
    "Observation",
    "ObservationStore",
    "ProjectManifest",
    "ProjectRegistry",
    "RefDetModel",
    "ReviewDecision",
    "SensorFrame",
    "StoredObservation",
    "SyncClient",
    "SyncPolicy",
    "SyncReport",
    "UploadManager",
    "UploadSession",
    "Workspace",
    "canonicalize",
    "iou",
    "new_from_template",
    "nms",
    "open_bundle",
    "pack_bundle",
    "parse_manifest",
    "postprocess",
    "refdet_infer",
    "run_sync",
    "validate_manifest",
]

__version__ = "0.1.0"
