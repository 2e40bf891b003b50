"""Analytic Lambertian test scenes rendered by exact first-hit ray casting.

Scenes are built from spheres, axis-aligned boxes, and a textured backdrop
plane that guarantees every ray hits a surface. Albedos are view-independent
callables over world positions, so photoconsistency holds exactly across
views (up to resampling).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Camera, project_points, rays_through_pixels

__all__ = [
    "Sphere",
    "Box",
    "AnalyticScene",
    "constant_albedo",
    "checker_albedo",
    "smooth_noise_albedo",
    "raycast_ground_truth",
    "ground_truth_visibility",
]

Albedo = Callable[[np.ndarray], np.ndarray]  # world points (..., 3) -> rgb (..., 3)


def constant_albedo(rgb) -> Albedo:
    rgb = np.asarray(rgb, dtype=np.float64)

    def fn(points):
        return np.broadcast_to(rgb, points.shape[:-1] + (3,)).copy()

    return fn


def checker_albedo(color_a, color_b, period: float = 1.0) -> Albedo:
    a = np.asarray(color_a, dtype=np.float64)
    b = np.asarray(color_b, dtype=np.float64)

    def fn(points):
        idx = np.floor(points[..., 0] / period) + np.floor(points[..., 1] / period)
        mask = (idx.astype(int) % 2 == 0)[..., None]
        return np.where(mask, a, b)

    return fn


def smooth_noise_albedo(
    base, amplitude: float = 0.25, scale: float = 1.5, seed: int = 0
) -> Albedo:
    """Non-periodic smooth texture: a few incommensurate 3D sinusoids.

    `scale` bounds the spatial frequency, which keeps image-space gradients
    gentle enough for sub-pixel warp error to stay below matching thresholds.
    """
    base = np.asarray(base, dtype=np.float64)
    rng = np.random.default_rng(seed)
    # Independent sinusoid sums per color channel: a coincidental photometric
    # match at a wrong depth then needs three simultaneous coincidences.
    freqs = rng.uniform(0.4, 1.0, size=(3, 4, 3)) * scale
    phases = rng.uniform(0, 2 * np.pi, size=(3, 4))
    weights = rng.uniform(0.5, 1.0, size=(3, 4))
    weights /= weights.sum(axis=1, keepdims=True)

    def fn(points):
        rgb = np.zeros(points.shape[:-1] + (3,))
        for c in range(3):
            s = np.zeros(points.shape[:-1])
            for f, ph, w in zip(freqs[c], phases[c], weights[c]):
                s += w * np.sin(points @ f + ph)
            rgb[..., c] = base[c] * (1.0 + amplitude * s)
        return np.clip(rgb, 0.0, 1.0)

    return fn


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    albedo: Albedo

    def intersect(self, origins, dirs):
        """Smallest positive ray parameter per ray, +inf on miss."""
        oc = origins - np.asarray(self.center, dtype=np.float64)
        a = np.sum(dirs * dirs, axis=-1)
        b = 2.0 * np.sum(oc * dirs, axis=-1)
        c = np.sum(oc * oc, axis=-1) - self.radius**2
        disc = b * b - 4 * a * c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = (-b - sq) / (2 * a)
        t1 = (-b + sq) / (2 * a)
        t = np.where(t0 > 1e-9, t0, t1)
        return np.where(hit & (t > 1e-9), t, np.inf)


@dataclass(frozen=True)
class Box:
    min_corner: np.ndarray
    max_corner: np.ndarray
    albedo: Albedo

    def intersect(self, origins, dirs):
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo - origins) / dirs
            t_hi = (hi - origins) / dirs
        t_near = np.max(np.minimum(t_lo, t_hi), axis=-1)
        t_far = np.min(np.maximum(t_lo, t_hi), axis=-1)
        hit = (t_near <= t_far) & (t_far > 1e-9)
        t = np.where(t_near > 1e-9, t_near, t_far)
        return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class _Backdrop:
    z: float
    albedo: Albedo

    def intersect(self, origins, dirs):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.z - origins[..., 2]) / dirs[..., 2]
        return np.where(t > 1e-9, t, np.inf)


@dataclass(frozen=True)
class AnalyticScene:
    """Primitives plus a mandatory backdrop plane at fixed world z."""

    primitives: tuple
    backdrop_z: float
    backdrop_albedo: Albedo

    @property
    def surfaces(self) -> tuple:
        return tuple(self.primitives) + (_Backdrop(self.backdrop_z, self.backdrop_albedo),)

    def first_hit(self, origins, dirs):
        """Closest hit over all surfaces: (t, surface index)."""
        ts = np.stack([s.intersect(origins, dirs) for s in self.surfaces], axis=0)
        idx = np.argmin(ts, axis=0)
        t = np.take_along_axis(ts, idx[None], axis=0)[0]
        return t, idx

    def shade(self, points, surface_idx):
        rgb = np.zeros(points.shape)
        for i, s in enumerate(self.surfaces):
            mask = surface_idx == i
            if np.any(mask):
                rgb[mask] = s.albedo(points[mask])
        return rgb


def raycast_ground_truth(scene: AnalyticScene, cam: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Exact render of (rgb (H, W, 3), depth (H, W)) for one camera.

    Depth is the ray's depth parameter (camera-frame z of the hit point).
    """
    xs, ys = np.meshgrid(np.arange(cam.width), np.arange(cam.height))
    pixels = np.stack([xs, ys], axis=-1).astype(np.float64)
    origins, dirs = rays_through_pixels(cam, pixels)
    t, idx = scene.first_hit(origins, dirs)
    if not np.all(np.isfinite(t)):
        raise ValueError("a ray missed every surface including the backdrop")
    points = origins + t[..., None] * dirs
    return scene.shade(points, idx), t


def ground_truth_visibility(
    scene: AnalyticScene, primary: Camera, secondary: Camera, tol: float = 1e-6
) -> np.ndarray:
    """Per-primary-pixel mask: is the first-hit surface point seen by `secondary`?

    A point is visible when the secondary ray toward it hits nothing strictly
    closer (within `tol`, relative), the point is in front of the secondary
    camera, and it projects inside the secondary frame.
    """
    _, depth = raycast_ground_truth(scene, primary)
    xs, ys = np.meshgrid(np.arange(primary.width), np.arange(primary.height))
    pixels = np.stack([xs, ys], axis=-1).astype(np.float64)
    origins, dirs = rays_through_pixels(primary, pixels)
    points = origins + depth[..., None] * dirs

    # Parameterize secondary rays so t = 1 lands exactly on the surface point.
    sec_dirs = points - secondary.center
    sec_origins = np.broadcast_to(secondary.center, sec_dirs.shape)
    t_hit, _ = scene.first_hit(sec_origins, sec_dirs)
    unoccluded = t_hit >= 1.0 - tol

    coords, sec_depth = project_points(secondary, points)
    in_frame = (
        (coords[..., 0] >= 0)
        & (coords[..., 0] <= secondary.width - 1)
        & (coords[..., 1] >= 0)
        & (coords[..., 1] <= secondary.height - 1)
        & (sec_depth > 1e-9)
    )
    return unoccluded & in_frame
