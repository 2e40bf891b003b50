"""Plane sweep volumes and the binary visibility prior derived from them.

The secondary image is warped into the primary view at D depth planes spaced
uniformly in inverse depth. Per-plane photometric error (L1 over channels, on
the 0-255 intensity scale) is minimized across planes; thresholding the
minimum yields a conservative per-pixel visibility prior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Camera, warp_at_depth
from .dataset import save_png, load_png

__all__ = [
    "PlaneDepths",
    "PlaneSweepVolume",
    "VisibilityPriorMap",
    "sample_plane_depths",
    "build_psv",
    "visibility_prior",
    "psv_dense_depth",
    "prior_for_all_pairs",
    "save_prior",
    "load_prior",
]


@dataclass(frozen=True)
class PlaneDepths:
    """D plane depths, uniform in inverse depth, increasing."""

    depths: np.ndarray

    @property
    def count(self) -> int:
        return len(self.depths)


@dataclass
class PlaneSweepVolume:
    """Warped images, validity masks, and photometric error maps per plane."""

    depths: PlaneDepths
    warped: np.ndarray  # (D, H, W, 3)
    valid: np.ndarray  # (D, H, W) bool
    error_maps: np.ndarray  # (D, H, W); +inf where invalid
    min_error: np.ndarray  # (H, W); +inf where no plane valid
    argmin_plane: np.ndarray  # (H, W) int

    @property
    def any_valid(self) -> np.ndarray:
        return np.isfinite(self.min_error)


@dataclass
class VisibilityPriorMap:
    """Binary per-pixel prior: 1 where a photoconsistent match was found."""

    tau: np.ndarray  # (H, W) in {0, 1}
    gamma: float
    plane_count: int
    primary_view_id: int = -1
    secondary_view_id: int = -1


def sample_plane_depths(z_min: float, z_max: float, D: int) -> PlaneDepths:
    """D depths with reciprocals linearly spaced over [1/z_max, 1/z_min]."""
    if not (0 < z_min < z_max):
        raise ValueError(f"need 0 < z_min < z_max, got ({z_min}, {z_max})")
    if D < 2:
        raise ValueError(f"need at least 2 planes, got {D}")
    disparities = np.linspace(1.0 / z_min, 1.0 / z_max, D)
    return PlaneDepths(depths=np.sort(1.0 / disparities))


def build_psv(
    primary_img: np.ndarray,
    primary_cam: Camera,
    secondary_img: np.ndarray,
    secondary_cam: Camera,
    planes: PlaneDepths,
) -> PlaneSweepVolume:
    """Warp the secondary view at every plane and compute error maps.

    Errors are summed absolute channel differences on the 0-255 scale;
    invalid (out-of-frame) warp pixels carry +inf and never win the min.
    """
    H, W = primary_cam.height, primary_cam.width
    if primary_img.shape[:2] != (H, W) or secondary_img.shape[:2] != (
        secondary_cam.height,
        secondary_cam.width,
    ):
        raise ValueError(
            f"image shapes {primary_img.shape[:2]}/{secondary_img.shape[:2]} do not "
            "match the camera resolutions"
        )
    D = planes.count
    warped = np.zeros((D, H, W, 3))
    valid = np.zeros((D, H, W), dtype=bool)
    errors = np.full((D, H, W), np.inf)
    for k, z in enumerate(planes.depths):
        warped[k], valid[k] = warp_at_depth(primary_cam, secondary_cam, secondary_img, z)
        e = np.abs(primary_img - warped[k]).sum(axis=-1) * 255.0
        errors[k] = np.where(valid[k], e, np.inf)
    # Ties go to the nearer plane: argmin picks the first (nearest) minimum.
    argmin = np.argmin(errors, axis=0)
    min_error = np.min(errors, axis=0)
    return PlaneSweepVolume(planes, warped, valid, errors, min_error, argmin)


def visibility_prior(psv: PlaneSweepVolume, gamma: float) -> VisibilityPriorMap:
    """tau = 1 iff exp(-min_error / gamma) > 0.5, i.e. min_error < gamma*ln 2."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    tau = (psv.min_error < gamma * math.log(2.0)).astype(np.uint8)
    return VisibilityPriorMap(tau=tau, gamma=gamma, plane_count=psv.depths.count)


def psv_dense_depth(psv: PlaneSweepVolume) -> tuple[np.ndarray, np.ndarray]:
    """Argmin-error depth per pixel; returns (depth map, valid mask)."""
    depth = psv.depths.depths[psv.argmin_plane]
    return depth, psv.any_valid


def prior_for_all_pairs(
    images: dict[int, np.ndarray],
    cameras: dict[int, Camera],
    view_ids: list[int],
    D: int = 64,
    gamma: float = 10.0,
) -> list[VisibilityPriorMap]:
    """One prior per ordered view pair: n*(n-1) maps for n views."""
    if len(view_ids) < 2:
        raise ValueError(f"need at least 2 views, got {len(view_ids)}")
    priors = []
    for a in view_ids:
        planes = sample_plane_depths(cameras[a].z_min, cameras[a].z_max, D)
        for b in view_ids:
            if a == b:
                continue
            psv = build_psv(images[a], cameras[a], images[b], cameras[b], planes)
            prior = visibility_prior(psv, gamma)
            prior.primary_view_id = a
            prior.secondary_view_id = b
            priors.append(prior)
    return priors


def save_prior(prior: VisibilityPriorMap, out_dir: Path) -> Path:
    """8-bit PNG (255 = visible) plus a JSON sidecar with the parameters."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{prior.primary_view_id:02d}_{prior.secondary_view_id:02d}"
    save_png(out_dir / f"{stem}.png", prior.tau.astype(np.float64))
    sidecar = {
        "primary_view": prior.primary_view_id,
        "secondary_view": prior.secondary_view_id,
        "gamma": prior.gamma,
        "D": prior.plane_count,
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(sidecar))
    return out_dir / f"{stem}.png"


def load_prior(png_path: Path) -> VisibilityPriorMap:
    png_path = Path(png_path)
    meta = json.loads(png_path.with_suffix(".json").read_text())
    tau = (load_png(png_path) > 0.5).astype(np.uint8)
    return VisibilityPriorMap(
        tau=tau,
        gamma=meta["gamma"],
        plane_count=meta["D"],
        primary_view_id=meta["primary_view"],
        secondary_view_id=meta["secondary_view"],
    )
