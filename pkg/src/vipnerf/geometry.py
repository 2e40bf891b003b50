"""Pinhole cameras, ray generation, cross-view projection, and depth warping.

Conventions: pixel (x, y) addresses the center of column x, row y; images are
(H, W, 3) float64 in [0, 1]. Ray directions are scaled so the camera-frame z
coordinate of ``origin + z * direction`` equals the depth parameter z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Camera",
    "Ray",
    "BehindCameraError",
    "ray_through_pixel",
    "rays_through_pixels",
    "project",
    "project_points",
    "warp_at_depth",
    "bilinear_sample",
]


class BehindCameraError(ValueError):
    """A point projected with non-positive camera-frame depth."""


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics, rigid pose, depth bounds, and resolution."""

    intrinsics: np.ndarray  # 3x3, zero skew
    world_from_camera: np.ndarray  # 4x4 rigid transform
    width: int
    height: int
    z_min: float
    z_max: float

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        M = np.asarray(self.world_from_camera, dtype=np.float64)
        if K.shape != (3, 3) or M.shape != (4, 4):
            raise ValueError("intrinsics must be 3x3 and world_from_camera 4x4")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        R = M[:3, :3]
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation block is not orthonormal")
        if not (0 < self.z_min < self.z_max):
            raise ValueError(f"need 0 < z_min < z_max, got ({self.z_min}, {self.z_max})")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "world_from_camera", M)

    @property
    def rotation(self) -> np.ndarray:
        return self.world_from_camera[:3, :3]

    @property
    def center(self) -> np.ndarray:
        return self.world_from_camera[:3, 3]


@dataclass(frozen=True)
class Ray:
    """Camera ray; `origin + z * direction` has camera-frame depth z."""

    origin: np.ndarray
    direction: np.ndarray
    unit_view_dir: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "unit_view_dir", self.direction / np.linalg.norm(self.direction)
        )


def rays_through_pixels(cam: Camera, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ray generation: returns (origins, directions), both (..., 3)."""
    pixels = np.asarray(pixels, dtype=np.float64)
    K = cam.intrinsics
    x = (pixels[..., 0] - K[0, 2]) / K[0, 0]
    y = (pixels[..., 1] - K[1, 2]) / K[1, 1]
    dirs_cam = np.stack([x, y, np.ones_like(x)], axis=-1)
    dirs_world = dirs_cam @ cam.rotation.T
    origins = np.broadcast_to(cam.center, dirs_world.shape)
    return origins, dirs_world


def ray_through_pixel(cam: Camera, pixel) -> Ray:
    """Ray from the camera center through one pixel (must be in bounds)."""
    px, py = float(pixel[0]), float(pixel[1])
    if not (0 <= px <= cam.width - 1 and 0 <= py <= cam.height - 1):
        raise ValueError(f"pixel ({px}, {py}) outside {cam.width}x{cam.height} image")
    origins, dirs = rays_through_pixels(cam, np.array([px, py]))
    return Ray(origin=origins, direction=dirs)


def project_points(cam: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points (..., 3) -> (pixels (..., 2), depths (...)).

    Does not range-check; pixels may fall outside the frame and depths may be
    non-positive. Callers mask as needed.
    """
    points = np.asarray(points, dtype=np.float64)
    p_cam = (points - cam.center) @ cam.rotation
    depth = p_cam[..., 2]
    K = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        px = K[0, 0] * p_cam[..., 0] / depth + K[0, 2]
        py = K[1, 1] * p_cam[..., 1] / depth + K[1, 2]
    return np.stack([px, py], axis=-1), depth


def project(cam: Camera, world_point) -> tuple[np.ndarray, float]:
    """Project one world point; raises BehindCameraError for depth <= 1e-9."""
    pixel, depth = project_points(cam, np.asarray(world_point, dtype=np.float64))
    if depth <= 1e-9:
        raise BehindCameraError(f"point {world_point} has camera depth {depth:.3g}")
    return pixel, float(depth)


def bilinear_sample(image: np.ndarray, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample `image` (H, W, C) at continuous (x, y) coords (..., 2).

    Returns (samples (..., C), valid (...)). A sample is valid when it lies
    inside [0, W-1] x [0, H-1]; out-of-range samples are returned as zeros.
    """
    H, W = image.shape[:2]
    x = coords[..., 0]
    y = coords[..., 1]
    # tolerate round-off at the frame border so identity warps stay valid
    eps = 1e-9
    valid = (
        (x >= -eps) & (x <= W - 1 + eps) & (y >= -eps) & (y <= H - 1 + eps)
        & np.isfinite(x) & np.isfinite(y)
    )
    xc = np.clip(np.nan_to_num(x), 0, W - 1)
    yc = np.clip(np.nan_to_num(y), 0, H - 1)
    x0 = np.floor(xc).astype(int)
    y0 = np.floor(yc).astype(int)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = xc - x0
    fy = yc - y0
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    out = (
        image[y0, x0] * w00[..., None]
        + image[y0, x1] * w10[..., None]
        + image[y1, x0] * w01[..., None]
        + image[y1, x1] * w11[..., None]
    )
    out[~valid] = 0.0
    return out, valid


def warp_at_depth(
    primary: Camera, secondary: Camera, secondary_image: np.ndarray, z: float
) -> tuple[np.ndarray, np.ndarray]:
    """Warp the secondary image into the primary view at a single depth plane.

    Each primary pixel is backprojected to depth z along its ray, projected
    into the secondary view, and bilinearly sampled. Pixels falling outside
    the secondary frame or behind the secondary camera are masked invalid.
    """
    if not (primary.z_min <= z <= primary.z_max):
        raise ValueError(f"plane depth {z} outside [{primary.z_min}, {primary.z_max}]")
    xs, ys = np.meshgrid(np.arange(primary.width), np.arange(primary.height))
    pixels = np.stack([xs, ys], axis=-1).astype(np.float64)
    origins, dirs = rays_through_pixels(primary, pixels)
    points = origins + z * dirs
    coords, depths = project_points(secondary, points)
    warped, valid = bilinear_sample(secondary_image, coords)
    in_front = depths > 1e-9
    valid = valid & in_front
    warped[~valid] = 0.0
    return warped, valid
