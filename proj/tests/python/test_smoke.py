import math

import numpy as np
import pytest

import shipsr


def test_psnr_offset_case():
    a = np.full((16, 16, 3), 0.5, dtype=np.float32)
    b = a + np.float32(16 / 255)
    diff = float(np.float32(0.5) + np.float32(16 / 255)) - 0.5
    assert shipsr.psnr(a, b) == pytest.approx(-10 * math.log10(diff * diff), rel=1e-9)
    assert shipsr.psnr(a, a) == 100.0


def test_ssim_constant_images():
    zeros = np.zeros((16, 16, 3), dtype=np.float32)
    ones = np.ones((16, 16, 3), dtype=np.float32)
    assert shipsr.ssim(zeros, ones) == pytest.approx(1e-4 / (1 + 1e-4), abs=1e-9)


def test_frechet_closed_form():
    eye = np.eye(3)
    assert shipsr.frechet_distance(np.zeros(3), eye, np.array([2.0, 0, 0]), eye) == pytest.approx(4.0, abs=1e-8)


def test_schedule_is_decreasing():
    ab = shipsr.alpha_bars("linear", 200)
    assert len(ab) == 200
    assert all(x > y for x, y in zip(ab, ab[1:]))
    with pytest.raises(shipsr.ArgumentError):
        shipsr.alpha_bars("linear", 0)


def test_degrade_shapes_and_errors(tmp_path):
    rng = np.random.default_rng(0)
    hr = rng.random((64, 64, 3), dtype=np.float32)
    lr = shipsr.degrade(hr, factor=8, kernel_sigma=1.0, seed=3)
    assert lr.shape == (8, 8, 3)
    assert np.array_equal(lr, shipsr.degrade(hr, factor=8, kernel_sigma=1.0, seed=3))
    assert shipsr.bicubic_upsample(lr, 8).shape == (64, 64, 3)
    with pytest.raises(shipsr.DimensionError):
        shipsr.degrade(hr[:60], factor=8)
    path = tmp_path / "x.png"
    shipsr.write_png(str(path), hr)
    back = shipsr.read_png(str(path))
    assert np.abs(back - hr).max() <= 0.5 / 255 + 1e-6


def test_config_and_prompts():
    cfg = shipsr.default_config()
    fp = shipsr.fingerprint(cfg)
    assert len(fp) == 16
    cfg["seed"] += 1
    assert shipsr.fingerprint(cfg) != fp
    with pytest.raises(shipsr.ConfigurationError):
        shipsr.fingerprint({"unknown_key": 1})
    assert "Hermes" in shipsr.render_prompt(0, "Hermes", "Tugs")


def test_cli_exit_codes(tmp_path):
    code, _, _ = shipsr.run_cli([])
    assert code == 2
    code, _, err = shipsr.run_cli(["train-sr", "--run-dir", str(tmp_path)])
    assert code == 3
    assert "train-sr" in err
