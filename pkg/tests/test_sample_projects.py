"""The shipped sample projects must stay valid and canonical."""

from pathlib import Path

import pytest

from fieldforge import canonicalize, parse_manifest, validate_manifest
from fieldforge.jsoncanon import parse_json
from fieldforge.refdet import RefDetModel, validate_model

SAMPLES = Path(__file__).resolve().parent.parent / "sample-projects"


@pytest.mark.parametrize("name", ["rip-currents", "marine-mammals"])
def test_sample_project_is_valid_and_canonical(name):
    raw = (SAMPLES / name / "project.json").read_bytes()
    manifest = parse_manifest(raw)
    assert validate_manifest(manifest) == []
    assert canonicalize(manifest) == raw

    model = RefDetModel.from_dict(parse_json((SAMPLES / name / "refdet.json").read_bytes()))
    validate_model(model, len(manifest.labels))
