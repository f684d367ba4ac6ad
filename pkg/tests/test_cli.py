import json
import shutil

import pytest

from gverify.backend import RunConfig, build_messages, record_response
from gverify.cli import EXIT_DEFECT, EXIT_ERROR, EXIT_OK, EXIT_USAGE, main
from gverify.vision import load_image


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen", str(root)]) == EXIT_OK
    return root


def inst(root, iid):
    return str(root / "catalog" / iid / "program.nc"), str(root / "catalog" / iid / "screen.png")


class TestVerify:
    def test_clean_exits_zero(self, generated, capsys):
        assert main(["verify", *inst(generated, "S7-i2")]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["gcode_validity"]["valid"] and doc["corrections"] == []

    def test_defect_exits_two(self, generated, capsys):
        assert main(["verify", *inst(generated, "S5-i1")]) == EXIT_DEFECT
        doc = json.loads(capsys.readouterr().out)
        assert any("Feed F missing value" in e for e in doc["gcode_validity"]["g-code errors"])

    def test_cluster_and_few_shot(self, generated, capsys):
        args = ["verify", *inst(generated, "S2-i1"), "--view", "full+cluster", "--shots", "few",
                "--examples", str(generated / "fewshot")]
        assert main(args) == EXIT_DEFECT
        doc = json.loads(capsys.readouterr().out)
        assert doc["slots"]["collet_clamped"] is False

    def test_overlay_written(self, generated, tmp_path):
        out = tmp_path / "overlay.png"
        main(["verify", *inst(generated, "S7-i2"), "--overlay", str(out)])
        overlay, original = load_image(out), load_image(inst(generated, "S7-i2")[1])
        assert overlay.shape == original.shape and (overlay != original).any()

    def test_schema_invalid_output_exits_one(self, generated, tmp_path, capsys):
        program, screen = inst(generated, "S7-i2")
        msgs = build_messages(RunConfig(backend="mock"), open(program).read(), load_image(screen))
        record_response(tmp_path, msgs, '{"slots": "nope"}')
        code = main(["verify", program, screen, "--backend", "mock", "--recordings", str(tmp_path)])
        assert code == EXIT_ERROR
        assert "slots: expected object" in capsys.readouterr().err

    def test_missing_recording_exits_one(self, generated, tmp_path):
        assert main(["verify", *inst(generated, "S7-i2"), "--backend", "mock",
                     "--recordings", str(tmp_path)]) == EXIT_ERROR

    def test_missing_file_exits_one(self, generated, tmp_path):
        assert main(["verify", str(tmp_path / "x.nc"), inst(generated, "S7-i2")[1]]) == EXIT_ERROR

    @pytest.mark.parametrize("extra", [["--view", "cluster"], ["--bbox", "1,2,3"], ["--frobnicate"],
                                       ["--shots", "few"]])
    def test_usage_errors(self, generated, extra):
        with pytest.raises(SystemExit) as info:
            code = main(["verify", *inst(generated, "S7-i2"), *extra])
            raise SystemExit(code)
        assert info.value.code == EXIT_USAGE

    def test_config_file(self, generated, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"max_feed": 5000}))
        assert main(["verify", *inst(generated, "S8-i1"), "--config", str(cfg)]) == EXIT_DEFECT
        cfg.write_text(json.dumps({"colour": "red"}))
        assert main(["verify", *inst(generated, "S8-i1"), "--config", str(cfg)]) == EXIT_USAGE


class TestGen:
    def test_gen_is_byte_identical(self, generated, tmp_path):
        assert main(["gen", str(tmp_path)]) == EXIT_OK
        for sub in ("catalog", "fewshot"):
            a = sorted(p.relative_to(generated / sub) for p in (generated / sub).rglob("*") if p.is_file())
            b = sorted(p.relative_to(tmp_path / sub) for p in (tmp_path / sub).rglob("*") if p.is_file())
            assert a == b
            for rel in a:
                assert (generated / sub / rel).read_bytes() == (tmp_path / sub / rel).read_bytes()

    def test_gen_catalog_only(self, tmp_path):
        assert main(["gen", str(tmp_path), "--catalog"]) == EXIT_OK
        assert (tmp_path / "catalog" / "manifest.json").is_file()
        assert not (tmp_path / "fewshot").exists()


class TestBatchAndEval:
    def test_batch_all_oracle(self, generated, tmp_path, capsys):
        out = tmp_path / "pred"
        assert main(["batch", str(generated / "catalog" / "manifest.json"), "--out", str(out)]) == EXIT_OK
        files = list(out.rglob("*.json"))
        assert len(files) == 64
        assert main(["eval", str(out), str(generated / "catalog" / "manifest.json")]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["configs"]) == {"zs-full", "zs-cluster", "fs-full", "fs-cluster"}
        assert "Structural metrics" in capsys.readouterr().out

    def test_corrupted_image_isolated(self, generated, tmp_path, capsys):
        cat = tmp_path / "catalog"
        shutil.copytree(generated / "catalog", cat)
        (cat / "S3-i2" / "screen.png").write_bytes(b"corrupt")
        out = tmp_path / "pred"
        code = main(["batch", str(cat / "manifest.json"), "--configs", "zs-full", "--out", str(out)])
        assert code == EXIT_OK
        statuses = [json.loads(p.read_text())["status"] for p in (out / "zs-full").glob("*.json")]
        assert statuses.count("ok") == 15 and statuses.count("error") == 1
        assert "S3-i2" in capsys.readouterr().err
        assert main(["eval", str(out), str(cat / "manifest.json")]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())["configs"]["zs-full"]
        assert summary["structural"]["schema_valid"]["accuracy"] == "0.938"
        assert any("S3-i2" in n for n in summary["notes"])

    def test_few_shot_configs_need_pack(self, generated, tmp_path):
        cat = tmp_path / "catalog"
        shutil.copytree(generated / "catalog", cat)
        assert main(["batch", str(cat / "manifest.json"), "--configs", "fs-full"]) == EXIT_USAGE

    def test_unknown_config(self, generated):
        assert main(["batch", str(generated / "catalog" / "manifest.json"), "--configs", "zs-half"]) == EXIT_USAGE

    def test_bad_threshold(self, generated):
        with pytest.raises(SystemExit) as info:
            main(["eval", str(generated), str(generated / "catalog" / "manifest.json"), "--threshold", "1.5"])
        assert info.value.code == EXIT_USAGE
