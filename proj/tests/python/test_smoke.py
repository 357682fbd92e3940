import math

import numpy as np
import pytest

import centernet3d as cn


def test_geometry():
    box = [1.0, 2.0, 0.0, 4.0, 2.0, 2.0, 0.4]
    assert cn.rotated_iou_bev(box, box) == pytest.approx(1.0, abs=1e-12)
    assert cn.iou_3d(box, [1.0, 2.0, 1.0, 4.0, 2.0, 2.0, 0.4]) == pytest.approx(1 / 3, abs=1e-12)
    corners = cn.corners_3d(box)
    assert corners.shape == (8, 3)
    assert corners.mean(axis=0) == pytest.approx([1.0, 2.0, 0.0])
    m = np.arange(4, dtype=float).reshape(2, 2, 1)
    assert cn.bilinear_sample(m, 0.5, 0.5) == pytest.approx(1.5)


def test_losses_and_metrics():
    b = math.exp(3.0) - 1.0
    value, grad = cn.balanced_l1(10.0)
    assert value == pytest.approx(15.0 + 1.5 / b - 0.5, abs=1e-12)
    assert grad == pytest.approx(1.5)
    assert cn.nds(0.5157, [0.29, 0.20, 0.30, 0.25, 0.32]) == pytest.approx(0.6218, abs=5e-4)
    assert cn.ap40([0.9, 0.4], [True, False], 2) == pytest.approx(0.5)
    assert cn.gaussian_radius(10, 10, 1.0) == 0.0
    with pytest.raises(ValueError):
        cn.gaussian_radius(10, 10, 0.0)


def test_encode_detect_round_trip():
    scene = cn.synth_scene(3)
    assert scene["points"].shape[1] == 4
    assert len(scene["boxes"]) == len(scene["classes"]) >= 1
    targets = cn.encode_targets(scene["boxes"], scene["classes"])
    assert len(targets["positives"]) == len(scene["boxes"])
    found = cn.detect(targets, {"infer.threshold": 0})
    assert len(found["classes"]) == len(scene["boxes"])
    for gt in scene["boxes"]:
        err = np.abs(found["boxes"][:, :6] - gt[:6]).max(axis=1)
        assert err.min() < 1e-9
    conf = cn.kswarp(targets["center"], targets["corner"], scene["boxes"], scene["classes"])
    assert all(0.0 <= c <= 1.0 for c in conf)
    bev = cn.network_input(scene["points"])
    assert bev.shape == (128, 128, 4)


def test_config_overrides_and_errors():
    assert "grid.voxel" in cn.default_config()
    with pytest.raises(ValueError):
        cn.synth_scene(0, {"grid.bogus": 1})
    scene = cn.synth_scene(0, {"scene.classes": "Car Pedestrian", "scene.boxes_max": 2})
    assert len(scene["boxes"]) <= 2
    assert scene["class_names"] == ["Car", "Pedestrian"]


def test_commands(tmp_path):
    cfg = {
        "train.scenes": 3,
        "train.val_scenes": 2,
        "model.hidden": 8,
        "model.backbone_widths": [4, 8],
        "model.extra_blocks": 0,
    }
    cn.synth(tmp_path / "data", 4, cfg)
    n = cn.infer(tmp_path / "data", tmp_path / "dets", oracle_head=True, config=cfg)
    assert n == 4
    report = cn.evaluate(tmp_path / "dets", tmp_path / "data" / "labels", config=cfg)
    assert report["classes"][0]["ap_bev"] == 1.0
    result = cn.train_toy(tmp_path / "run", 3, cfg)
    assert len(result["step_losses"]) == 3
    assert math.isfinite(result["final_loss"])
    n = cn.infer(tmp_path / "data", tmp_path / "dets2", checkpoint=tmp_path / "run" / "checkpoint", config=cfg)
    assert n == 4


def test_kitti_bin_round_trip(tmp_path):
    pts = np.array([[1.0, 2.0, -1.5, 0.25], [3.5, -0.5, 0.0, 1.0]])
    cn.save_kitti_bin(tmp_path / "a.bin", pts)
    assert np.array_equal(cn.load_kitti_bin(tmp_path / "a.bin"), pts)
