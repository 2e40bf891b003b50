"""On-disk dataset layout, scene presets, and export/load round-trips.

Layout of an exported dataset directory::

    rgb/<view>.png            8-bit color
    depth/<view>.png          16-bit depth, with depth/<view>.json {"scale": s}
    vis/<a>_<b>.png           ground-truth pairwise visibility (train pairs)
    cameras.json              intrinsics/poses/bounds per view
    sparse_depth.json         {view_id: [{x, y, depth}]}
    split.json                {"train": [...], "test": [...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Camera
from .scene import (
    AnalyticScene,
    Box,
    Sphere,
    ground_truth_visibility,
    raycast_ground_truth,
    smooth_noise_albedo,
)

__all__ = [
    "SceneData",
    "DatasetError",
    "make_preset",
    "PRESETS",
    "export_dataset",
    "load_dataset",
    "save_png",
    "load_png",
    "save_depth_png",
    "load_depth_png",
]


class DatasetError(ValueError):
    """Malformed or missing dataset artifact."""


def save_png(path: Path, image: np.ndarray) -> None:
    """8-bit PNG from float [0,1]; single channel or RGB."""
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_png(path: Path) -> np.ndarray:
    try:
        arr = np.asarray(Image.open(path), dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise DatasetError(f"missing image file: {path}")
    return arr


def save_depth_png(path: Path, depth: np.ndarray, z_max: float) -> None:
    """16-bit depth PNG plus a JSON sidecar holding the quantization scale."""
    scale = z_max * 1.001 / 65535.0
    quantized = np.clip(np.round(depth / scale), 0, 65535).astype(np.uint16)
    Image.fromarray(quantized).save(path)
    path.with_suffix(".json").write_text(json.dumps({"scale": scale}))


def load_depth_png(path: Path) -> np.ndarray:
    scale = json.loads(path.with_suffix(".json").read_text())["scale"]
    return np.asarray(Image.open(path), dtype=np.float64) * scale


def _camera_to_json(view_id: int, cam: Camera) -> dict:
    return {
        "id": view_id,
        "width": cam.width,
        "height": cam.height,
        "intrinsics": [float(v) for v in cam.intrinsics.reshape(-1)],
        "world_from_camera": [float(v) for v in cam.world_from_camera.reshape(-1)],
        "z_min": cam.z_min,
        "z_max": cam.z_max,
    }


def _camera_from_json(entry: dict) -> Camera:
    return Camera(
        intrinsics=np.array(entry["intrinsics"]).reshape(3, 3),
        world_from_camera=np.array(entry["world_from_camera"]).reshape(4, 4),
        width=entry["width"],
        height=entry["height"],
        z_min=entry["z_min"],
        z_max=entry["z_max"],
    )


@dataclass
class SceneData:
    """In-memory view of an exported dataset."""

    cameras: dict[int, Camera]
    images: dict[int, np.ndarray]
    depths: dict[int, np.ndarray]
    visibility: dict[tuple[int, int], np.ndarray]
    sparse_depth: dict[int, np.ndarray]  # rows (x, y, depth)
    train_ids: list[int]
    test_ids: list[int]


# --- presets ---------------------------------------------------------------


def _lateral_camera(x: float, width: int, height: int) -> Camera:
    f = 1.25 * width
    K = np.array([[f, 0, (width - 1) / 2.0], [0, f, (height - 1) / 2.0], [0, 0, 1.0]])
    M = np.eye(4)
    M[0, 3] = x
    return Camera(K, M, width, height, z_min=2.0, z_max=10.0)


def _look_at(position, target, up=(0.0, -1.0, 0.0)) -> np.ndarray:
    position = np.asarray(position, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - position
    z /= np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=np.float64), z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    M = np.eye(4)
    M[:3, 0], M[:3, 1], M[:3, 2], M[:3, 3] = x, y, z, position
    return M


def _sphere_box_scene(seed: int) -> AnalyticScene:
    # Blue sphere behind a brown box; the box occludes part of the sphere
    # from laterally displaced viewpoints.
    sphere = Sphere(
        center=np.array([0.35, 0.0, 5.2]),
        radius=0.9,
        albedo=smooth_noise_albedo([0.20, 0.35, 0.85], amplitude=0.30, scale=2.6, seed=seed + 1),
    )
    # Kept clear of the frame edge in every view so its occlusions are
    # geometric, not frame-cropping.
    box = Box(
        min_corner=np.array([-0.75, -0.60, 3.6]),
        max_corner=np.array([-0.05, 0.50, 4.3]),
        albedo=smooth_noise_albedo([0.62, 0.40, 0.18], amplitude=0.30, scale=2.4, seed=seed + 2),
    )
    backdrop = smooth_noise_albedo([0.55, 0.55, 0.50], amplitude=0.30, scale=2.0, seed=seed + 3)
    return AnalyticScene(primitives=(sphere, box), backdrop_z=9.0, backdrop_albedo=backdrop)


def _lateral_scene(seed: int) -> AnalyticScene:
    left = Sphere(
        center=np.array([-0.9, 0.45, 5.6]),
        radius=0.75,
        albedo=smooth_noise_albedo([0.80, 0.30, 0.30], amplitude=0.22, scale=2.2, seed=seed + 1),
    )
    right = Sphere(
        center=np.array([0.9, -0.35, 4.6]),
        radius=0.65,
        albedo=smooth_noise_albedo([0.30, 0.75, 0.35], amplitude=0.22, scale=2.2, seed=seed + 2),
    )
    box = Box(
        min_corner=np.array([-0.45, -0.75, 3.4]),
        max_corner=np.array([0.45, 0.15, 4.2]),
        albedo=smooth_noise_albedo([0.70, 0.60, 0.20], amplitude=0.22, scale=2.0, seed=seed + 3),
    )
    backdrop = smooth_noise_albedo([0.50, 0.52, 0.58], amplitude=0.28, scale=0.9, seed=seed + 4)
    return AnalyticScene(primitives=(left, right, box), backdrop_z=9.0, backdrop_albedo=backdrop)


def make_preset(
    name: str,
    n_train_views: int = 2,
    n_test_views: int = 8,
    resolution: int = 64,
    seed: int = 0,
) -> tuple[AnalyticScene, list[Camera], list[int], list[int]]:
    """Instantiate a named scene preset with its camera rig and split.

    Returns (scene, cameras, train_ids, test_ids); cameras are indexed by
    position in the returned list.
    """
    if name not in PRESETS:
        raise DatasetError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    if n_train_views < 2:
        raise DatasetError("need at least 2 training views")
    W = H = resolution
    span = 0.6
    if name in ("sphere-box", "lateral"):
        scene = _sphere_box_scene(seed) if name == "sphere-box" else _lateral_scene(seed)
        train_x = np.linspace(0.0, span, n_train_views)
        test_x = np.linspace(0.05, span - 0.05, n_test_views)
        cams = [_lateral_camera(x, W, H) for x in train_x]
        cams += [_lateral_camera(x, W, H) for x in test_x]
    else:  # arc
        scene = _lateral_scene(seed)
        target = np.array([0.0, 0.0, 5.0])
        radius = 5.0
        f = 1.25 * W
        K = np.array([[f, 0, (W - 1) / 2.0], [0, f, (H - 1) / 2.0], [0, 0, 1.0]])

        def arc_cam(theta):
            pos = target + radius * np.array([np.sin(theta), 0.0, -np.cos(theta)])
            return Camera(K, _look_at(pos, target), W, H, z_min=2.0, z_max=10.0)

        arc = 0.12  # radians, half-spread
        train_t = np.linspace(-arc, arc, n_train_views)
        test_t = np.linspace(-arc * 0.8, arc * 0.8, n_test_views)
        cams = [arc_cam(t) for t in train_t] + [arc_cam(t) for t in test_t]
    train_ids = list(range(n_train_views))
    test_ids = list(range(n_train_views, n_train_views + n_test_views))
    return scene, cams, train_ids, test_ids


PRESETS = ("sphere-box", "lateral", "arc")


# --- export / load ---------------------------------------------------------


def _textured_pixel_mask(image: np.ndarray) -> np.ndarray:
    luma = image @ np.array([0.299, 0.587, 0.114])
    gy, gx = np.gradient(luma)
    mag = np.hypot(gx, gy)
    return mag > np.percentile(mag, 60)


def export_dataset(
    scene: AnalyticScene,
    cameras: list[Camera],
    train_ids: list[int],
    test_ids: list[int],
    k_sparse: int,
    out_dir: Path,
    seed: int = 0,
) -> Path:
    """Write the full dataset directory; returns `out_dir`."""
    out_dir = Path(out_dir)
    for sub in ("rgb", "depth", "vis"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    sparse: dict[str, list[dict]] = {}
    for vid in train_ids + test_ids:
        cam = cameras[vid]
        rgb, depth = raycast_ground_truth(scene, cam)
        save_png(out_dir / "rgb" / f"{vid:02d}.png", rgb)
        save_depth_png(out_dir / "depth" / f"{vid:02d}.png", depth, cam.z_max)
        if vid in train_ids:
            mask = _textured_pixel_mask(rgb)
            ys, xs = np.nonzero(mask)
            pick = rng.choice(len(xs), size=min(k_sparse, len(xs)), replace=False)
            sparse[str(vid)] = [
                {"x": int(xs[i]), "y": int(ys[i]), "depth": float(depth[ys[i], xs[i]])}
                for i in sorted(pick)
            ]

    for a in train_ids:
        for b in train_ids:
            if a != b:
                vis = ground_truth_visibility(scene, cameras[a], cameras[b])
                save_png(out_dir / "vis" / f"{a:02d}_{b:02d}.png", vis.astype(np.float64))

    views = [_camera_to_json(vid, cameras[vid]) for vid in train_ids + test_ids]
    (out_dir / "cameras.json").write_text(json.dumps({"views": views}, indent=1))
    (out_dir / "sparse_depth.json").write_text(json.dumps(sparse, indent=1))
    (out_dir / "split.json").write_text(json.dumps({"train": train_ids, "test": test_ids}))
    return out_dir


def load_dataset(path: Path) -> SceneData:
    path = Path(path)
    try:
        split = json.loads((path / "split.json").read_text())
        cam_entries = json.loads((path / "cameras.json").read_text())["views"]
        sparse_raw = json.loads((path / "sparse_depth.json").read_text())
    except FileNotFoundError as e:
        raise DatasetError(f"missing dataset file: {e.filename}")

    cameras = {e["id"]: _camera_from_json(e) for e in cam_entries}
    if len(cameras) < 2:
        raise DatasetError("dataset must contain at least 2 cameras")
    train_ids, test_ids = split["train"], split["test"]
    for vid in train_ids + test_ids:
        if vid not in cameras:
            raise DatasetError(f"view {vid} in split.json has no camera entry")

    images = {vid: load_png(path / "rgb" / f"{vid:02d}.png") for vid in cameras}
    depths = {vid: load_depth_png(path / "depth" / f"{vid:02d}.png") for vid in cameras}
    visibility = {}
    for a in train_ids:
        for b in train_ids:
            if a != b:
                f = path / "vis" / f"{a:02d}_{b:02d}.png"
                if f.exists():
                    visibility[(a, b)] = load_png(f) > 0.5
    sparse_depth = {
        int(vid): np.array([[s["x"], s["y"], s["depth"]] for s in entries])
        for vid, entries in sparse_raw.items()
    }
    return SceneData(cameras, images, depths, visibility, sparse_depth, train_ids, test_ids)
