import json
import os

import numpy as np
import pytest
from PIL import Image

from lrtc import DenseTensor
from lrtc.cli import (
    config_from_mapping,
    load_image,
    load_mask_image,
    main,
    save_image,
)
from lrtc.experiments import read_history
from lrtc.solver import SolverConfig


# ----------------------------------------------------------------- images


def test_load_image_shape_and_values(tmp_path):
    arr = np.array(
        [[[10, 20, 30], [40, 50, 60]], [[70, 80, 90], [100, 110, 120]]],
        dtype=np.uint8,
    )
    path = tmp_path / "px.png"
    Image.fromarray(arr, "RGB").save(path)
    t = load_image(str(path))
    assert t.shape == (2, 2, 3)
    assert np.array_equal(t.to_array(), arr.astype(float))


def test_image_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 256, size=(5, 7, 3)).astype(np.float64)
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    save_image(DenseTensor.from_array(arr), str(p1))
    t = load_image(str(p1))
    assert np.array_equal(t.to_array(), arr)
    save_image(t, str(p2))
    assert np.array_equal(load_image(str(p2)).to_array(), arr)


def test_load_image_grayscale_expands(tmp_path):
    arr = np.arange(16, dtype=np.uint8).reshape(4, 4)
    path = tmp_path / "gray.png"
    Image.fromarray(arr, "L").save(path)
    t = load_image(str(path))
    assert t.shape == (4, 4, 3)
    full = t.to_array()
    assert np.array_equal(full[:, :, 0], arr.astype(float))
    assert np.array_equal(full[:, :, 0], full[:, :, 1])
    assert np.array_equal(full[:, :, 0], full[:, :, 2])


def test_load_image_rejects_non_png(tmp_path):
    arr = np.zeros((4, 4, 3), dtype=np.uint8)
    path = tmp_path / "img.jpg"
    Image.fromarray(arr, "RGB").save(path, format="JPEG")
    with pytest.raises(ValueError, match="PNG"):
        load_image(str(path))


def test_load_image_rejects_16_bit(tmp_path):
    arr = np.zeros((4, 4), dtype=np.uint16)
    path = tmp_path / "deep.png"
    Image.fromarray(arr).save(path)
    with pytest.raises(ValueError, match="8-bit"):
        load_image(str(path))


def test_load_image_missing_file():
    with pytest.raises(FileNotFoundError):
        load_image("/nonexistent/image.png")


def test_save_image_clips_and_rounds(tmp_path):
    values = np.array(
        [[[300.0, -5.0, 127.6], [2.5, 127.5, 254.49]]]
    )  # shape (1, 2, 3)
    path = tmp_path / "clip.png"
    save_image(DenseTensor.from_array(values), str(path))
    back = load_image(str(path)).to_array()
    assert back[0, 0, 0] == 255.0  # clipped high
    assert back[0, 0, 1] == 0.0  # clipped low
    assert back[0, 0, 2] == 128.0  # 127.6 rounds up
    assert back[0, 1, 0] == 3.0  # ties away from zero
    assert back[0, 1, 1] == 128.0  # ties away from zero
    assert back[0, 1, 2] == 254.0


def test_save_image_validates(tmp_path):
    with pytest.raises(ValueError):
        save_image(DenseTensor.from_array(np.zeros((4, 4))), str(tmp_path / "x.png"))
    bad = DenseTensor.from_array(np.full((2, 2, 3), np.nan))
    with pytest.raises(ValueError):
        save_image(bad, str(tmp_path / "y.png"))


def test_load_mask_image_grayscale_broadcasts(tmp_path):
    arr = np.array([[255, 0], [0, 7]], dtype=np.uint8)
    path = tmp_path / "mask.png"
    Image.fromarray(arr, "L").save(path)
    mask = load_mask_image(str(path), (2, 2, 3))
    # observed pixels (0,0) and (1,1) across all 3 channels, F-order indices
    assert mask.indices.tolist() == [0, 3, 4, 7, 8, 11]


def test_load_mask_image_shape_mismatch(tmp_path):
    arr = np.zeros((3, 3), dtype=np.uint8)
    path = tmp_path / "mask.png"
    Image.fromarray(arr, "L").save(path)
    with pytest.raises(ValueError):
        load_mask_image(str(path), (2, 2, 3))


# ----------------------------------------------------------------- config


def test_config_from_mapping():
    cfg = config_from_mapping({"lam": 2.0, "alphas": [0.5, 0.5], "t_max": 9})
    assert cfg.lam == 2.0 and cfg.alphas == (0.5, 0.5) and cfg.t_max == 9
    with pytest.raises(ValueError):
        config_from_mapping({"bogus_knob": 1})
    with pytest.raises(ValueError):
        config_from_mapping({"xi": 5.0})
    base = SolverConfig(t_max=77)
    assert config_from_mapping({}, base=base).t_max == 77


# -------------------------------------------------------------------- cli


def test_main_without_arguments_exits_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err.lower()


def test_main_unreadable_image_errors(tmp_path, capsys):
    rc = main(
        ["complete", "--image", str(tmp_path / "nope.png"),
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 1
    assert "error" in capsys.readouterr().err.lower()


def test_complete_fully_observed_reproduces_image(tmp_path, small_image_16):
    white = np.full((16, 16), 255, dtype=np.uint8)
    mask_path = tmp_path / "full.png"
    Image.fromarray(white, "L").save(mask_path)
    out = tmp_path / "out"
    rc = main(
        ["complete", "--image", small_image_16, "--mask-image", str(mask_path),
         "--out-dir", str(out), "--t-max", "5"]
    )
    assert rc == 0
    recon = load_image(str(out / "reconstruction.png"))
    original = load_image(small_image_16)
    assert np.array_equal(recon.to_array(), original.to_array())


def test_complete_writes_history_and_manifest(tmp_path, small_image_16):
    out = tmp_path / "out"
    rc = main(
        ["complete", "--image", small_image_16, "--ratio", "0.5", "--seed", "3",
         "--out-dir", str(out), "--t-max", "40"]
    )
    assert rc == 0
    with open(out / "history.csv") as fh:
        history = read_history(fh)
    assert len(history) >= 1
    assert all(h.nmse is not None for h in history)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "complete"
    assert manifest["seed"] == 3
    assert manifest["lam"] > 0
    assert manifest["versions"]["kernels"] in ("numpy", "compiled")
    assert (out / "reconstruction.png").exists()


def _sweep_args(out_dir, config=None, image=None):
    args = ["sweep", "--out-dir", str(out_dir), "--seed", "1", "--n-seeds", "1",
            "--ratios", "0.5", "0.8"]
    if image is not None:
        args += ["--image", image]
    else:
        args += ["--synth-shape", "6", "6", "2", "--synth-ranks", "1", "1", "1"]
    if config is not None:
        args += ["--config", str(config)]
    return args


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        "defaults: {t_max: 25}\n"
        "solvers:\n"
        "  adaptive: {}\n"
        "  fixed: {adaptive_rho: false, over_relax: false}\n"
    )
    return path


def test_sweep_synthetic_outputs(tmp_path, fast_config):
    out = tmp_path / "sweep"
    rc = main(_sweep_args(out, config=fast_config))
    assert rc == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "cfg,ratio,nmse,iters,status"
    assert len(summary) == 5  # 2 cfgs x 2 ratios
    details = (out / "details.csv").read_text().splitlines()
    assert len(details) == 5  # 2 cfgs x 2 ratios x 1 seed
    histories = sorted(os.listdir(out / "histories"))
    assert len(histories) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "sweep"
    assert len(manifest["lam_per_cell"]) == 4


def test_sweep_image_saves_reconstructions(tmp_path, small_image_16, fast_config):
    out = tmp_path / "sweep"
    rc = main(_sweep_args(out, config=fast_config, image=small_image_16))
    assert rc == 0
    images = sorted(os.listdir(out / "images"))
    assert "adaptive_r0.5.png" in images
    assert "fixed_r0.8.png" in images
    assert "observed_r0.5.png" in images


def test_sweep_manifest_replay_reproduces_outputs(tmp_path, fast_config):
    out1 = tmp_path / "run1"
    assert main(_sweep_args(out1, config=fast_config)) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    argv = manifest["argv"]
    out2 = tmp_path / "run2"
    argv = [str(out2) if a == str(out1) else a for a in argv]
    assert main(argv) == 0
    for name in ("summary.csv", "details.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    for name in os.listdir(out1 / "histories"):
        assert (out1 / "histories" / name).read_bytes() == (
            out2 / "histories" / name
        ).read_bytes()


def test_synth_test_passes(tmp_path, capsys):
    rc = main(["synth-test", "--seed", "0", "--out-dir", str(tmp_path / "st")])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "st" / "manifest.json").read_text())
    assert manifest["passed"] is True


def test_synth_test_fails_when_starved(capsys, monkeypatch):
    monkeypatch.setenv("LRTC_LOG", "INFO")
    rc = main(["synth-test", "--t-max", "1"])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out
