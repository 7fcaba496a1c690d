import json

import pytest

from conftest import PROTO_A, PROTO_B, noise_png, solid_png, two_label_manifest
from fieldforge.cli import fieldsim, forge
from fieldforge.jsoncanon import canonical_json, parse_json
from fieldforge.manifest import canonicalize, parse_manifest


def run_forge(capsys, *argv):
    code = forge.main(list(argv))
    captured = capsys.readouterr()
    out = json.loads(captured.out) if captured.out.strip() else None
    return code, out, captured.err


def run_sim(capsys, *argv):
    code = fieldsim.main(list(argv))
    captured = capsys.readouterr()
    out = json.loads(captured.out) if captured.out.strip() else None
    return code, out, captured.err


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "refdet.json"
    path.write_bytes(canonical_json({
        "grid": 2,
        "prototypes": [list(PROTO_A), list(PROTO_B)],
        "score_threshold": 0.75,
        "nms_iou_threshold": 0.5,
        "max_detections": 16,
    }))
    return path


def init_two_label_project(tmp_path, capsys):
    project_dir = tmp_path / "proj"
    code, out, _ = run_forge(capsys, "init", str(project_dir), "--id", "rip-pilot", "--name", "Rip Currents")
    assert code == 0
    # researcher edits the template: two labels instead of the placeholder
    (project_dir / "project.json").write_bytes(canonicalize(two_label_manifest()))
    return project_dir


class TestForgeInit:
    def test_creates_valid_project(self, tmp_path, capsys):
        target = tmp_path / "new-proj"
        code, out, _ = run_forge(capsys, "init", str(target), "--id", "rip-pilot", "--name", "Rip")
        assert code == 0
        assert out["project_id"] == "rip-pilot"
        manifest = parse_manifest((target / "project.json").read_bytes())
        from fieldforge import validate_manifest
        assert validate_manifest(manifest) == []

    def test_nonempty_dir_rejected(self, tmp_path, capsys):
        target = tmp_path / "proj"
        target.mkdir()
        (target / "project.json").write_text("{}")
        code, _, err = run_forge(capsys, "init", str(target), "--id", "rip-pilot", "--name", "Rip")
        assert code == 2
        assert "not empty" in err

    def test_bad_slug(self, tmp_path, capsys):
        code, _, err = run_forge(capsys, "init", str(tmp_path / "x"), "--id", "RIP!", "--name", "Rip")
        assert code == 2
        assert "[a-z0-9-]" in err


class TestForgeValidate:
    def test_valid(self, tmp_path, capsys):
        project_dir = init_two_label_project(tmp_path, capsys)
        code, out, _ = run_forge(capsys, "validate", str(project_dir))
        assert code == 0
        assert out == {"valid": True, "violations": []}

    def test_invalid_reports_paths(self, tmp_path, capsys):
        project_dir = init_two_label_project(tmp_path, capsys)
        broken = two_label_manifest()
        broken.labels[1].id = 7
        (project_dir / "project.json").write_bytes(canonical_json(broken.to_dict()))
        code, out, _ = run_forge(capsys, "validate", str(project_dir))
        assert code == 1
        assert out["valid"] is False
        assert out["violations"][0]["path"] == "labels[1].id"


class TestForgePackAndBuild:
    def test_pack_deterministic(self, tmp_path, capsys, model_file):
        project_dir = init_two_label_project(tmp_path, capsys)
        code, first, _ = run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
        assert code == 0
        bundle_path = project_dir / "model-1.0.0.bundle"
        assert bundle_path.exists()
        first_bytes = bundle_path.read_bytes()

        code, second, _ = run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
        assert code == 0
        assert bundle_path.read_bytes() == first_bytes
        assert first["digest"] == second["digest"]

    def test_pack_prototype_count_mismatch(self, tmp_path, capsys, model_file):
        project_dir = init_two_label_project(tmp_path, capsys)
        spec = parse_json(model_file.read_bytes())
        spec["prototypes"] = [[1, 2, 3]]
        model_file.write_bytes(canonical_json(spec))
        code, _, err = run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
        assert code == 2
        assert "prototype" in err

    def test_build_app_deterministic_and_pins_model_ref(self, tmp_path, capsys, model_file):
        project_dir = init_two_label_project(tmp_path, capsys)
        run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
        bundle = str(project_dir / "model-1.0.0.bundle")

        code, first, _ = run_forge(capsys, "build-app", str(project_dir), "--bundle", bundle)
        assert code == 0
        pkg_bytes = (project_dir / "app.pkg").read_bytes()
        manifest = parse_manifest((project_dir / "project.json").read_bytes())
        assert manifest.model_ref is not None
        assert manifest.model_ref.version == "1.0.0"

        code, second, _ = run_forge(capsys, "build-app", str(project_dir), "--bundle", bundle)
        assert code == 0
        assert (project_dir / "app.pkg").read_bytes() == pkg_bytes
        assert first["package_digest"] == second["package_digest"]

    def test_build_app_label_mismatch(self, tmp_path, capsys, model_file):
        project_dir = init_two_label_project(tmp_path, capsys)
        run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
        renamed = two_label_manifest()
        renamed.labels[1].name = "different name"
        (project_dir / "project.json").write_bytes(canonical_json(renamed.to_dict()))
        code, _, err = run_forge(
            capsys, "build-app", str(project_dir),
            "--bundle", str(project_dir / "model-1.0.0.bundle"),
        )
        assert code == 2
        assert "label" in err.lower()


class TestForgePublish:
    def build(self, tmp_path, capsys, model_file, version="1.0.0"):
        project_dir = init_two_label_project(tmp_path, capsys)
        run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", version)
        run_forge(capsys, "build-app", str(project_dir), "--bundle", str(project_dir / f"model-{version}.bundle"))
        return project_dir

    def test_publish_then_unchanged_then_stale(self, tmp_path, capsys, model_file, live_server):
        url, registry = live_server
        project_dir = self.build(tmp_path, capsys, model_file)

        code, out, _ = run_forge(capsys, "publish", str(project_dir), "--server", url)
        assert code == 0
        assert out == {"project_id": "rip-pilot", "version": "1.0.0", "status": "published"}
        assert registry.manifest("rip-pilot").name == "Rip Currents"

        code, out, _ = run_forge(capsys, "publish", str(project_dir), "--server", url)
        assert code == 0
        assert out["status"] == "unchanged"

        # a newer version goes out, then the old package is a stale downgrade
        run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.1.0")
        run_forge(capsys, "build-app", str(project_dir), "--bundle", str(project_dir / "model-1.1.0.bundle"))
        code, out, _ = run_forge(capsys, "publish", str(project_dir), "--server", url)
        assert code == 0
        assert out["version"] == "1.1.0"

        old = self.build(tmp_path / "old", capsys, model_file)  # rebuild 1.0.0 elsewhere
        code, _, err = run_forge(capsys, "publish", str(old), "--server", url)
        assert code == 2
        assert "1.1.0" in err

    def test_unreachable_server(self, tmp_path, capsys, model_file):
        project_dir = self.build(tmp_path, capsys, model_file)
        code, _, err = run_forge(capsys, "publish", str(project_dir), "--server", "http://127.0.0.1:1")
        assert code == 3
        assert "unreachable" in err

    def test_env_var_supplies_server(self, tmp_path, capsys, model_file, live_server, monkeypatch):
        url, _ = live_server
        project_dir = self.build(tmp_path, capsys, model_file)
        monkeypatch.setenv("FIELDFORGE_SERVER", url)
        code, out, _ = run_forge(capsys, "publish", str(project_dir))
        assert code == 0
        assert out["status"] == "published"


@pytest.fixture
def built_project(tmp_path, capsys, model_file):
    project_dir = init_two_label_project(tmp_path, capsys)
    run_forge(capsys, "pack", str(project_dir), "--model", str(model_file), "--version", "1.0.0")
    run_forge(capsys, "build-app", str(project_dir), "--bundle", str(project_dir / "model-1.0.0.bundle"))
    return project_dir


def write_images(images_dir, with_gps=True):
    images_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "a-match.png": solid_png(PROTO_A),
        "b-noise.png": noise_png(7),
        "c-noise.png": noise_png(8),
    }
    for name, data in files.items():
        (images_dir / name).write_bytes(data)
        if with_gps:
            (images_dir / f"{name}.gps").write_text("36.95,-122.02,4.0,90.0")
    return files


class TestSimCapture:
    def test_captures_and_writes_overlays(self, tmp_path, capsys, built_project):
        images = tmp_path / "images"
        write_images(images)
        store = tmp_path / "store"
        code, out, _ = run_sim(
            capsys, "capture", str(store),
            "--package", str(built_project / "app.pkg"), "--images", str(images),
        )
        assert code == 0
        assert out["captured"] == 3
        assert out["failed"] == 0
        by_file = {row["file"]: row for row in out["observations"]}
        assert by_file["a-match.png"]["detections"] == 4  # uniform prototype image

        overlay_path = store / "overlays" / f"{by_file['a-match.png']['content_digest']}.json"
        overlay = parse_json(overlay_path.read_bytes())
        assert overlay["model_version"] == "1.0.0"
        assert len(overlay["detections"]) == 4
        det = overlay["detections"][0]
        assert det["label_name"] == "rip current"
        assert det["color"] == [0, 114, 255]
        assert det["confidence"] == 1.0

    def test_empty_directory(self, tmp_path, capsys, built_project):
        images = tmp_path / "none"
        images.mkdir()
        code, out, _ = run_sim(
            capsys, "capture", str(tmp_path / "store"),
            "--package", str(built_project / "app.pkg"), "--images", str(images),
        )
        assert code == 0
        assert out == {"captured": 0, "failed": 0, "observations": []}

    def test_missing_gps_counted_others_processed(self, tmp_path, capsys, built_project):
        images = tmp_path / "images"
        write_images(images, with_gps=True)
        (images / "b-noise.png.gps").unlink()
        code, out, err = run_sim(
            capsys, "capture", str(tmp_path / "store"),
            "--package", str(built_project / "app.pkg"), "--images", str(images),
        )
        assert code == 2
        assert out["captured"] == 2
        assert out["failed"] == 1
        assert "b-noise.png" in err

    def test_undecodable_image_counted_others_processed(self, tmp_path, capsys, built_project):
        images = tmp_path / "images"
        write_images(images)
        (images / "broken.png").write_bytes(b"not a png")
        (images / "broken.png.gps").write_text("1,1")
        code, out, _ = run_sim(
            capsys, "capture", str(tmp_path / "store"),
            "--package", str(built_project / "app.pkg"), "--images", str(images),
        )
        assert code == 2
        assert out["captured"] == 3
        assert out["failed"] == 1


class TestSimSync:
    def capture_into(self, tmp_path, capsys, built_project):
        images = tmp_path / "images"
        write_images(images)
        store = tmp_path / "store"
        run_sim(capsys, "capture", str(store),
                "--package", str(built_project / "app.pkg"), "--images", str(images))
        return store

    def test_healthy_sync(self, tmp_path, capsys, built_project, live_server):
        url, registry = live_server
        run_forge(capsys, "publish", str(built_project), "--server", url)
        store = self.capture_into(tmp_path, capsys, built_project)
        code, out, _ = run_sim(capsys, "sync", str(store), "--server", url, "--select-all")
        assert code == 0
        assert out["uploaded"] == 3
        assert out["failed"] == 0
        rows, _ = registry.list_observations("rip-pilot")
        assert len(rows) == 3

    def test_fail_after_bytes_then_rerun_resumes(self, tmp_path, capsys, built_project, live_server):
        url, registry = live_server
        run_forge(capsys, "publish", str(built_project), "--server", url)
        store = self.capture_into(tmp_path, capsys, built_project)

        code, first, _ = run_sim(
            capsys, "sync", str(store), "--server", url,
            "--select-all", "--chunk-size", "512", "--fail-after-bytes", "2000",
        )
        assert code == 1
        assert first["failed"] >= 1

        code, second, _ = run_sim(
            capsys, "sync", str(store), "--server", url, "--chunk-size", "512",
        )
        assert code == 0
        assert second["resumed"] >= 1
        assert second["failed"] == 0
        rows, _ = registry.list_observations("rip-pilot")
        assert len(rows) == 3  # no duplicate rows
        assert len({r.content_digest for r in rows}) == 3

    def test_unreachable_exit_3(self, tmp_path, capsys, built_project):
        store = self.capture_into(tmp_path, capsys, built_project)
        code, _, err = run_sim(
            capsys, "sync", str(store), "--server", "http://127.0.0.1:1", "--select-all",
        )
        assert code == 3
        assert "unreachable" in err
