"""Single-stage NMS-free 3D object detection on LiDAR point clouds.

Boxes are (N, 7) float arrays of cx, cy, cz, l, w, h, yaw in LiDAR meters.
Maps are (H, W, C) arrays. ``config`` arguments are dicts of config-key
overrides, for example ``{"grid.voxel": [0.1, 0.1, 0.1], "infer.kswarp": False}``.
"""

from ._core import (
    Error,
    InvalidArgument,
    ap40,
    balanced_l1,
    bilinear_sample,
    corners_3d,
    default_config,
    detect,
    encode_targets,
    evaluate,
    gaussian_radius,
    infer,
    iou_3d,
    kswarp,
    load_kitti_bin,
    nds,
    network_input,
    rotated_iou_bev,
    save_kitti_bin,
    synth,
    synth_scene,
    train_toy,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "ap40",
    "balanced_l1",
    "bilinear_sample",
    "corners_3d",
    "default_config",
    "detect",
    "encode_targets",
    "evaluate",
    "gaussian_radius",
    "infer",
    "iou_3d",
    "kswarp",
    "load_kitti_bin",
    "nds",
    "network_input",
    "rotated_iou_bev",
    "save_kitti_bin",
    "synth",
    "synth_scene",
    "train_toy",
]
